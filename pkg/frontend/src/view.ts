/**
 * Pure projection of session state into a renderable view model.
 *
 * The DOM layer and the replay snapshot test both consume this tree, so
 * everything the user can see is captured here: gutter breakpoints,
 * inline column markers, the highlighted statement, stack entries and
 * the scope/variable tree.
 */

import { BreakpointInfo, VariableInfo } from "./protocol.js";
import { SessionStore, UiSessionState } from "./state.js";

export interface MarkerView {
  column: number;
  breakpoint: "none" | "enabled" | "disabled";
  breakpointId: number | null;
}

export interface LineView {
  number: number;
  text: string;
  highlighted: boolean;
  highlightColumn: number | null;
  hasBreakpoint: boolean;
  markers: MarkerView[];
}

export interface SourceView {
  file: string;
  available: boolean;
  lines: LineView[];
}

export interface StackEntryView {
  frameId: number;
  label: string;
  selected: boolean;
}

export interface VariableView {
  name: string;
  value: string;
  type: string;
  ref: number;
  expandable: boolean;
  children: VariableView[] | null; // null until expanded
}

export interface ScopeView {
  name: string;
  ref: number;
  variables: VariableView[] | null;
}

export interface ControlsView {
  canResume: boolean;
  canPause: boolean;
  canRestart: boolean;
}

export interface ViewModel {
  status: string;
  controls: ControlsView;
  source: SourceView | null;
  stack: StackEntryView[];
  scopes: ScopeView[];
  breakpointList: Array<{ id: number; label: string; enabled: boolean }>;
  output: string;
  error: string | null;
}

function statusLine(state: UiSessionState, frameLabel: string | null): string {
  switch (state.phase) {
    case "idle":
      return state.connection === "open" ? "connected" : state.connection;
    case "running":
      return "running";
    case "exited":
      return `exited with code ${state.exitCode}`;
    case "suspended": {
      const reason = state.stopReason ?? "suspended";
      return frameLabel === null ? `suspended (${reason})`
        : `suspended (${reason}) at ${frameLabel}`;
    }
  }
}

function frameLabel(frame: { name: string; file?: string; line?: number;
                             column?: number }): string {
  if (frame.file === undefined) return frame.name;
  return `${frame.name} at ${frame.file}:${frame.line}:${frame.column}`;
}

function variableView(v: VariableInfo,
                      children: Map<number, VariableInfo[]>): VariableView {
  const expanded = v.variablesReference > 0
    ? children.get(v.variablesReference) : undefined;
  return {
    name: v.name,
    value: v.value,
    type: v.type,
    ref: v.variablesReference,
    expandable: v.variablesReference > 0,
    children: expanded === undefined
      ? null
      : expanded.map((c) => variableView(c, children)),
  };
}

export function view(store: SessionStore): ViewModel {
  const state = store.state;
  const frame = store.selectedFrame();
  const file = frame?.file ?? null;

  let source: SourceView | null = null;
  if (file !== null) {
    const content = state.sources.get(file);
    if (content === null || content === undefined) {
      source = { file, available: false, lines: [] };
    } else {
      const statementCols = state.statementLocations.get(file) ?? [];
      const bps = state.breakpoints.get(file) ?? [];
      const byLine = new Map<number, BreakpointInfo[]>();
      for (const bp of bps) {
        if (!bp.verified) continue;
        const list = byLine.get(bp.line) ?? [];
        list.push(bp);
        byLine.set(bp.line, list);
      }
      const lines = content.replace(/\n$/, "").split("\n").map(
        (text, index) => {
          const num = index + 1;
          const lineBps = byLine.get(num) ?? [];
          const markers: MarkerView[] = statementCols
            .filter((loc) => loc.line === num)
            .map((loc) => {
              const bp = lineBps.find((b) => b.column === loc.column);
              return {
                column: loc.column,
                breakpoint: bp === undefined ? "none"
                  : bp.enabled ? "enabled" : "disabled",
                breakpointId: bp?.id ?? null,
              } as MarkerView;
            });
          const highlighted = state.phase === "suspended"
            && frame?.line === num;
          return {
            number: num,
            text,
            highlighted,
            highlightColumn: highlighted ? frame?.column ?? null : null,
            hasBreakpoint: lineBps.some((b) => b.enabled),
            markers,
          };
        });
      source = { file, available: true, lines };
    }
  }

  const breakpointList: ViewModel["breakpointList"] = [];
  for (const [bpFile, bps] of state.breakpoints) {
    for (const bp of bps) {
      const where = bp.column === null ? `${bpFile}:${bp.line}`
        : `${bpFile}:${bp.line}:${bp.column}`;
      breakpointList.push({
        id: bp.id,
        label: bp.verified ? where : `${where} (pending)`,
        enabled: bp.enabled,
      });
    }
  }
  breakpointList.sort((a, b) => a.id - b.id);

  return {
    status: statusLine(state, frame === null ? null : frameLabel(frame)),
    controls: {
      canResume: state.phase === "suspended",
      canPause: state.phase === "running",
      canRestart: state.phase === "suspended" && state.stack.length > 0,
    },
    source,
    stack: state.stack.map((f) => ({
      frameId: f.frameId,
      label: frameLabel(f),
      selected: f.frameId === state.selectedFrameId,
    })),
    scopes: state.scopes.map((s) => ({
      name: s.name,
      ref: s.variablesReference,
      variables: s.variables === null ? null
        : s.variables.map((v) => variableView(v, state.children)),
    })),
    breakpointList,
    output: state.output,
    error: state.lastError,
  };
}
