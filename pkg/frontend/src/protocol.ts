// Wire protocol types: newline-delimited JSON objects, one `type` field
// each.  Mirrors the daemon's documented protocol exactly.

export interface PlatformLink {
  name: string;
  parent: string | null;
  axis: [number, number, number];
  length: number;
  limits: [number, number];
  direction: [number, number, number];
}

export interface PlatformDoc {
  format: number;
  name: string;
  root: [number, number, number];
  links: PlatformLink[];
  labels: Record<string, string[]>;
  reach_scales: Record<string, number>;
}

export interface HelloMessage {
  type: "hello";
  platform: PlatformDoc;
  rate: number;
}

export interface WireDiagnostic {
  severity: "error" | "warning";
  message: string;
  line: number;
  column: number;
  length: number;
}

export interface CompileMessage {
  type: "compile";
  ok: boolean;
  latency_ms: number;
  diagnostics: WireDiagnostic[];
  trajectory_id: number;
}

export interface FrameMessage {
  type: "frame";
  trajectory_id: number;
  t: number;
  q: number[];
  endpoints: [number, number, number][];
  trace_index: number;
}

export interface StateMessage {
  type: "state";
  mode: "playing" | "paused";
  tempo_multiplier: number;
  playhead: number;
}

export interface ErrorMessage {
  type: "error";
  message: string;
}

export type ServerMessage =
  | HelloMessage
  | CompileMessage
  | FrameMessage
  | StateMessage
  | ErrorMessage;

export type ControlOp = "play" | "pause" | "seek" | "tempo" | "apply_transform";

export interface ControlMessage {
  type: "control";
  op: ControlOp;
  value?: number | string;
}

const SERVER_TYPES = new Set(["hello", "compile", "frame", "state", "error"]);

/** Parse one wire line; returns null for anything malformed or unknown. */
export function parseServerMessage(line: string): ServerMessage | null {
  let data: unknown;
  try {
    data = JSON.parse(line);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null) return null;
  const type = (data as { type?: unknown }).type;
  if (typeof type !== "string" || !SERVER_TYPES.has(type)) return null;
  return data as ServerMessage;
}

export function control(op: ControlOp, value?: number | string): ControlMessage {
  return value === undefined ? { type: "control", op } : { type: "control", op, value };
}

export function encodeControl(msg: ControlMessage): string {
  return JSON.stringify(msg) + "\n";
}
