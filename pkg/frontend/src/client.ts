/**
 * WebSocket client: sends requests through the store (so pending
 * requests are known to it) and feeds back every incoming message.
 * On stop events it issues the follow-up queries a debugger view needs:
 * stack, scopes, source text and statement markers.
 */

import { IncomingMessage, RequestMessage } from "./protocol.js";
import { SessionStore } from "./state.js";

export class DebugClient {
  private socket: WebSocket;
  private seq = 0;
  private desiredBreakpoints = new Map<
    string, Array<{ line: number; column?: number; enabled?: boolean }>>();

  constructor(private store: SessionStore, url: string) {
    this.socket = new WebSocket(url);
    this.socket.onopen = () => {
      store.connectionChanged("open");
      this.send("launch", { stopOnEntry: true });
    };
    this.socket.onclose = () => store.connectionChanged("closed");
    this.socket.onmessage = (ev) => {
      const msg = JSON.parse(String(ev.data)) as IncomingMessage;
      this.store.applyReceived(msg);
      this.afterMessage(msg);
    };
  }

  send(command: string, args?: Record<string, unknown>): number {
    this.seq += 1;
    const msg: RequestMessage = {
      seq: this.seq, kind: "request", command,
      arguments: args ?? {},
    };
    this.store.applySent(msg);
    this.socket.send(JSON.stringify(msg));
    return this.seq;
  }

  private afterMessage(msg: IncomingMessage): void {
    if (msg.kind === "event" && msg.event === "stopped") {
      this.send("stackTrace");
      const frame = this.store.selectedFrame();
      if (frame?.file !== undefined) {
        this.ensureFileLoaded(frame.file);
      }
      if (frame !== null) {
        this.send("scopes", { frameId: frame.frameId });
      }
    }
  }

  private ensureFileLoaded(file: string): void {
    if (!this.store.state.sources.has(file)) {
      this.send("source", { file });
      this.send("statementLocations", { file });
    }
  }

  // -- user actions

  resume(mode: "continue" | "stepExpr" | "stepInto" | "stepOver" | "stepOut"):
      void {
    this.send(mode);
  }

  pause(): void {
    this.send("pause");
  }

  restartFrame(frameId: number): void {
    this.send("restartFrame", { frameId });
  }

  selectFrame(frameId: number): void {
    this.store.selectFrame(frameId);
    const frame = this.store.selectedFrame();
    if (frame?.file !== undefined) this.ensureFileLoaded(frame.file);
    this.send("scopes", { frameId });
  }

  expandVariable(ref: number): void {
    this.send("variables", { ref });
  }

  fetchScopeVariables(ref: number): void {
    this.send("variables", { ref });
  }

  /** Toggle a column-precise breakpoint (inline marker click). */
  toggleBreakpoint(file: string, line: number, column?: number): void {
    const wanted = this.desiredBreakpoints.get(file) ?? [];
    const index = wanted.findIndex(
      (b) => b.line === line && b.column === column);
    if (index >= 0) {
      wanted.splice(index, 1);
    } else {
      wanted.push(column === undefined ? { line } : { line, column });
    }
    this.desiredBreakpoints.set(file, wanted);
    this.send("setBreakpoints", { file, breakpoints: wanted });
  }

  setBreakpointEnabled(id: number, enabled: boolean): void {
    this.send("enableBreakpoint", { id, enabled });
  }
}
