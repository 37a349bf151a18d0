// Reconnecting socket wrapper.  The actual WebSocket and timer are
// injectable so the logic is testable without a browser or a daemon.

import { ServerMessage, parseServerMessage } from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;
export type Scheduler = (fn: () => void, ms: number) => void;

export type ConnectionStatus = "connecting" | "open" | "retrying" | "closed";

const BACKOFF_MS = [500, 1000, 2000, 4000, 8000];

export class StudioSocket {
  status: ConnectionStatus = "connecting";
  onMessage: (msg: ServerMessage) => void = () => {};
  onStatus: (status: ConnectionStatus, detail: string) => void = () => {};

  private socket: SocketLike | null = null;
  private attempt = 0;
  private stopped = false;

  constructor(
    private url: string,
    private factory: SocketFactory,
    private schedule: Scheduler = (fn, ms) => setTimeout(fn, ms),
  ) {}

  connect(): void {
    this.stopped = false;
    this.open();
  }

  private open(): void {
    this.setStatus("connecting", this.url);
    let socket: SocketLike;
    try {
      socket = this.factory(this.url);
    } catch {
      this.retry();
      return;
    }
    this.socket = socket;
    socket.onopen = () => {
      this.attempt = 0;
      this.setStatus("open", this.url);
    };
    socket.onmessage = (ev) => {
      if (typeof ev.data !== "string") return;
      for (const line of ev.data.split("\n")) {
        if (!line.trim()) continue;
        const msg = parseServerMessage(line);
        if (msg) this.onMessage(msg);
      }
    };
    socket.onclose = () => {
      this.socket = null;
      if (!this.stopped) this.retry();
    };
    socket.onerror = () => {};
  }

  private retry(): void {
    const wait = BACKOFF_MS[Math.min(this.attempt, BACKOFF_MS.length - 1)];
    this.attempt += 1;
    this.setStatus("retrying", `retry #${this.attempt} in ${wait} ms`);
    this.schedule(() => {
      if (!this.stopped) this.open();
    }, wait);
  }

  /** True when the message went out; false means not connected. */
  send(data: string): boolean {
    if (this.status !== "open" || this.socket === null) return false;
    try {
      this.socket.send(data);
      return true;
    } catch {
      return false;
    }
  }

  close(): void {
    this.stopped = true;
    this.setStatus("closed", "");
    this.socket?.close();
    this.socket = null;
  }

  private setStatus(status: ConnectionStatus, detail: string): void {
    this.status = status;
    this.onStatus(status, detail);
  }
}
