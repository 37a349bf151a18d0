// View state: which frame may be rendered, what the banners say.
//
// Invariant: the rendered frame always belongs to the latest announced
// trajectory id, except within the declared crossfade window after a
// swap (the daemon blends joint values for 200 ms after each compile).

import {
  CompileMessage,
  FrameMessage,
  HelloMessage,
  PlatformDoc,
  ServerMessage,
} from "./protocol.js";

export const CROSSFADE_WINDOW_MS = 250;

export type Plane = "xy" | "xz" | "yz";

export interface Camera {
  plane: Plane;
  zoom: number;
}

export class ViewState {
  platform: PlatformDoc | null = null;
  rate = 0;
  lastCompile: CompileMessage | null = null;
  currentFrame: FrameMessage | null = null;
  camera: Camera = { plane: "xy", zoom: 1.0 };
  latestTrajectoryId = 0;
  maxTraceIndex = 0;
  framesDropped = 0;

  private swapAtMs = Number.NEGATIVE_INFINITY;

  constructor(private now: () => number = () => Date.now()) {}

  ingest(msg: ServerMessage): void {
    switch (msg.type) {
      case "hello":
        this.applyHello(msg);
        break;
      case "compile":
        this.lastCompile = msg;
        if (msg.ok) {
          this.latestTrajectoryId = msg.trajectory_id;
          this.swapAtMs = this.now();
        }
        break;
      case "frame":
        this.applyFrame(msg);
        break;
      default:
        break;
    }
  }

  private applyHello(msg: HelloMessage): void {
    this.platform = msg.platform;
    this.rate = msg.rate;
    this.currentFrame = null;
    this.maxTraceIndex = 0;
  }

  private applyFrame(frame: FrameMessage): void {
    const inWindow = this.now() - this.swapAtMs <= CROSSFADE_WINDOW_MS;
    if (frame.trajectory_id !== this.latestTrajectoryId && !inWindow) {
      this.framesDropped += 1;
      return;
    }
    this.currentFrame = frame;
    if (frame.trace_index > this.maxTraceIndex) {
      this.maxTraceIndex = frame.trace_index;
    }
  }
}

/** One-line compile banner; errors keep the daemon-supplied line:column. */
export function compileBanner(msg: CompileMessage | null): {
  text: string;
  kind: "ok" | "error" | "none";
} {
  if (msg === null) {
    return { text: "waiting for first compile", kind: "none" };
  }
  if (msg.ok) {
    return {
      text: `compiled in ${msg.latency_ms.toFixed(1)} ms (trajectory #${msg.trajectory_id})`,
      kind: "ok",
    };
  }
  const errors = msg.diagnostics.filter((d) => d.severity === "error");
  const first = errors[0] ?? msg.diagnostics[0];
  const where = first ? `${first.line}:${first.column}: ${first.message}` : "no details";
  const more = errors.length > 1 ? ` (+${errors.length - 1} more)` : "";
  return { text: `compile failed at ${where}${more}`, kind: "error" };
}
