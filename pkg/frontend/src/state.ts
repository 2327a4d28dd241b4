/**
 * Session state derived exclusively from protocol traffic.
 *
 * The store consumes the messages the client sends and the responses and
 * events it receives; it never simulates engine behavior. Feeding it a
 * recorded transcript therefore reproduces the exact state a live
 * session would have produced.
 */

import {
  BreakpointInfo, EventMessage, FrameInfo, IncomingMessage, RequestMessage,
  ResponseMessage, ScopeInfo, StatementLocation, StoppedBody, VariableInfo,
  isEvent, isResponse,
} from "./protocol.js";

export type Phase = "idle" | "running" | "suspended" | "exited";

export interface ScopeState extends ScopeInfo {
  variables: VariableInfo[] | null; // null until the variables call lands
}

export interface UiSessionState {
  connection: "connecting" | "open" | "closed";
  phase: Phase;
  stopReason: string | null;
  stopDescription: string | null;
  exitCode: number | null;
  lastError: string | null;
  /** file -> content, or null when the server reported it unavailable */
  sources: Map<string, string | null>;
  /** file -> resolved statement positions (column markers) */
  statementLocations: Map<string, StatementLocation[]>;
  /** file -> breakpoints as last reported by the server */
  breakpoints: Map<string, BreakpointInfo[]>;
  /** call stack, top first; seeded by stopped events, filled by stackTrace */
  stack: FrameInfo[];
  selectedFrameId: number | null;
  /** scopes of the selected frame */
  scopes: ScopeState[];
  /** lazily expanded variable children by variablesReference */
  children: Map<number, VariableInfo[]>;
  output: string;
}

function initialState(): UiSessionState {
  return {
    connection: "connecting",
    phase: "idle",
    stopReason: null,
    stopDescription: null,
    exitCode: null,
    lastError: null,
    sources: new Map(),
    statementLocations: new Map(),
    breakpoints: new Map(),
    stack: [],
    selectedFrameId: null,
    scopes: [],
    children: new Map(),
    output: "",
  };
}

const RESUME_COMMANDS = new Set(
  ["continue", "stepExpr", "stepInto", "stepOver", "stepOut", "restartFrame"]);

export class SessionStore {
  state: UiSessionState = initialState();
  private pending = new Map<number, RequestMessage>();
  private listeners: Array<() => void> = [];

  subscribe(listener: () => void): void {
    this.listeners.push(listener);
  }

  private changed(): void {
    for (const fn of this.listeners) fn();
  }

  connectionChanged(connection: UiSessionState["connection"]): void {
    this.state.connection = connection;
    this.changed();
  }

  /** Record an outgoing request so its response can be interpreted. */
  applySent(msg: RequestMessage): void {
    this.pending.set(msg.seq, msg);
    if (RESUME_COMMANDS.has(msg.command)) {
      // references become invalid the moment execution resumes
      this.state.phase = "running";
      this.state.scopes = [];
      this.state.children = new Map();
      this.state.stack = [];
      this.state.selectedFrameId = null;
      this.changed();
    }
  }

  applyReceived(msg: IncomingMessage): void {
    if (isResponse(msg)) {
      this.applyResponse(msg);
    } else if (isEvent(msg)) {
      this.applyEvent(msg);
    }
    this.changed();
  }

  private applyResponse(msg: ResponseMessage): void {
    const request = this.pending.get(msg.seq);
    this.pending.delete(msg.seq);
    if (request === undefined) return;
    const args = request.arguments ?? {};
    if (!msg.success) {
      this.state.lastError = msg.error ?? "request failed";
      if (RESUME_COMMANDS.has(request.command)) {
        // the resume was refused (e.g. cannot-step); still suspended
        this.state.phase = "suspended";
      }
      if (request.command === "source") {
        this.state.sources.set(String(args.file), null);
      }
      return;
    }
    this.state.lastError = null;
    const body = msg.body ?? {};
    switch (request.command) {
      case "source":
        this.state.sources.set(String(args.file), String(body.content));
        break;
      case "statementLocations":
        this.state.statementLocations.set(
          String(args.file), body.locations as StatementLocation[]);
        break;
      case "setBreakpoints":
        this.state.breakpoints.set(
          String(args.file), body.breakpoints as BreakpointInfo[]);
        break;
      case "enableBreakpoint": {
        const updated = body.breakpoint as BreakpointInfo & { id: number };
        for (const list of this.state.breakpoints.values()) {
          const i = list.findIndex((b) => b.id === updated.id);
          if (i >= 0) list[i] = { ...list[i], enabled: updated.enabled };
        }
        break;
      }
      case "stackTrace": {
        const frames = body.frames as FrameInfo[];
        this.state.stack = frames;
        if (this.state.selectedFrameId === null ||
            !frames.some((f) => f.frameId === this.state.selectedFrameId)) {
          this.state.selectedFrameId = frames[0]?.frameId ?? null;
        }
        break;
      }
      case "scopes":
        if (args.frameId === this.state.selectedFrameId) {
          const scopes = body.scopes as ScopeInfo[];
          this.state.scopes = scopes.map((s) => ({ ...s, variables: null }));
        }
        break;
      case "variables": {
        const ref = Number(args.ref);
        const variables = body.variables as VariableInfo[];
        const scope = this.state.scopes.find(
          (s) => s.variablesReference === ref);
        if (scope !== undefined) {
          scope.variables = variables;
        } else {
          this.state.children.set(ref, variables);
        }
        break;
      }
      default:
        break;
    }
  }

  private applyEvent(msg: EventMessage): void {
    if (msg.event === "stopped") {
      const body = msg.body as unknown as StoppedBody;
      this.state.phase = "suspended";
      this.state.stopReason = body.reason;
      this.state.stopDescription = body.description ?? null;
      this.state.scopes = [];
      this.state.children = new Map();
      if (body.topFrame !== undefined) {
        this.state.stack = [body.topFrame];
        this.state.selectedFrameId = body.topFrame.frameId;
      } else {
        this.state.stack = [];
        this.state.selectedFrameId = null;
      }
    } else if (msg.event === "exited") {
      this.state.phase = "exited";
      this.state.exitCode = Number(msg.body.code);
      this.state.stack = [];
      this.state.scopes = [];
      this.state.selectedFrameId = null;
    } else if (msg.event === "output") {
      this.state.output += String(msg.body.text ?? "");
    }
  }

  selectFrame(frameId: number): void {
    this.state.selectedFrameId = frameId;
    this.state.scopes = [];
    this.state.children = new Map();
    this.changed();
  }

  /** The frame whose position the source pane shows. */
  selectedFrame(): FrameInfo | null {
    const { stack, selectedFrameId } = this.state;
    return stack.find((f) => f.frameId === selectedFrameId) ?? stack[0] ?? null;
  }
}
