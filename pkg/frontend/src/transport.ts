// Transport mirror: the daemon owns playback state, this class only
// reflects `state` echoes.  Steering never mutates local state; a control
// that cannot be sent surfaces as an error instead.

import { ControlMessage, ControlOp, StateMessage, control, encodeControl } from "./protocol.js";

export const TEMPO_MIN = 0.25;
export const TEMPO_MAX = 4.0;

export class Transport {
  mode: "playing" | "paused" = "paused";
  tempoMultiplier = 1.0;
  playhead = 0.0;
  /** Longest playhead the daemon has reported; bounds the seek bar. */
  maxPlayhead = 0.0;

  constructor(
    private sendLine: (line: string) => boolean,
    private onSendError: (message: string) => void = () => {},
  ) {}

  steer(op: ControlOp, value?: number | string): boolean {
    let msg: ControlMessage;
    if (op === "tempo") {
      const clamped = Math.min(TEMPO_MAX, Math.max(TEMPO_MIN, Number(value)));
      msg = control("tempo", clamped);
    } else {
      msg = control(op, value);
    }
    const ok = this.sendLine(encodeControl(msg));
    if (!ok) this.onSendError(`could not send ${op}: not connected`);
    return ok;
  }

  play(): boolean {
    return this.steer("play");
  }

  pause(): boolean {
    return this.steer("pause");
  }

  seek(seconds: number): boolean {
    return this.steer("seek", seconds);
  }

  setTempo(multiplier: number): boolean {
    return this.steer("tempo", multiplier);
  }

  applyTransform(name: "retrograde" | "mirror_x" | "mirror_y" | "mirror_z"): boolean {
    return this.steer("apply_transform", name);
  }

  /** The one and only way transport state changes. */
  applyState(state: StateMessage): void {
    this.mode = state.mode;
    this.tempoMultiplier = state.tempo_multiplier;
    this.playhead = state.playhead;
    this.maxPlayhead = Math.max(this.maxPlayhead, state.playhead);
  }
}
