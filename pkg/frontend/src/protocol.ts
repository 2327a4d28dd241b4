/**
 * Wire types for the newline-delimited JSON debug protocol.
 * See docs/protocol.md in the repository root for the full catalog.
 */

export interface RequestMessage {
  seq: number;
  kind: "request";
  command: string;
  arguments?: Record<string, unknown>;
}

export interface ResponseMessage {
  seq: number;
  kind: "response";
  command: string;
  success: boolean;
  body?: Record<string, unknown>;
  error?: string;
}

export interface EventMessage {
  kind: "event";
  event: "stopped" | "output" | "exited" | string;
  body: Record<string, unknown>;
}

export type IncomingMessage = ResponseMessage | EventMessage;

export type StopReason = "entry" | "breakpoint" | "step" | "pause" | "trap";

export interface FrameInfo {
  frameId: number;
  name: string;
  file?: string;
  line?: number;
  column?: number;
  sourceAvailable?: boolean;
}

export interface StoppedBody {
  reason: StopReason;
  description?: string;
  breakpointId?: number;
  topFrame?: FrameInfo;
}

export interface BreakpointInfo {
  id: number;
  verified: boolean;
  line: number;
  column: number | null;
  enabled: boolean;
}

export interface ScopeInfo {
  name: string;
  variablesReference: number;
  count: number;
}

export interface VariableInfo {
  name: string;
  value: string;
  type: string;
  variablesReference: number;
}

export interface StatementLocation {
  line: number;
  column: number;
}

export function isResponse(msg: IncomingMessage): msg is ResponseMessage {
  return msg.kind === "response";
}

export function isEvent(msg: IncomingMessage): msg is EventMessage {
  return msg.kind === "event";
}
