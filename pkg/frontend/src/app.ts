// Studio entry point: wires the socket, transport, view, and renderer to
// the page.  The daemon is authoritative for everything; this file only
// reflects it and forwards clicks.

import { control, encodeControl, ServerMessage } from "./protocol.js";
import { StudioSocket } from "./socket.js";
import { Transport, TEMPO_MAX, TEMPO_MIN } from "./transport.js";
import { Renderer } from "./renderer.js";
import { compileBanner, Plane, ViewState } from "./view.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const canvas = el<HTMLCanvasElement>("figure");
const ctx = canvas.getContext("2d")!;
const banner = el<HTMLDivElement>("banner");
const connection = el<HTMLSpanElement>("connection");
const platformName = el<HTMLSpanElement>("platform-name");
const playButton = el<HTMLButtonElement>("play");
const pauseButton = el<HTMLButtonElement>("pause");
const tempoSlider = el<HTMLInputElement>("tempo");
const tempoValue = el<HTMLSpanElement>("tempo-value");
const seekBar = el<HTMLInputElement>("seek");
const playheadValue = el<HTMLSpanElement>("playhead-value");
const retrogradeButton = el<HTMLButtonElement>("retrograde");
const mirrorButton = el<HTMLButtonElement>("mirror-x");
const planeSelect = el<HTMLSelectElement>("plane");
const zoomSlider = el<HTMLInputElement>("zoom");
const scoreStrip = el<HTMLDivElement>("score-strip");

const view = new ViewState();
const renderer = new Renderer(ctx, canvas.width, canvas.height);

const url = `ws://${location.host}/`;
const socket = new StudioSocket(url, (u) => new WebSocket(u) as never);
const transport = new Transport(
  (line) => socket.send(line),
  (message) => showBanner(message, "error"),
);

function showBanner(text: string, kind: "ok" | "error" | "none"): void {
  banner.textContent = text;
  banner.className = `banner ${kind}`;
}

socket.onStatus = (status, detail) => {
  connection.textContent = status === "retrying" ? `${status} (${detail})` : status;
  connection.className = `status ${status}`;
  if (status !== "open") showBanner(`connection ${status} ${detail}`, "error");
};

socket.onMessage = (msg: ServerMessage) => {
  view.ingest(msg);
  switch (msg.type) {
    case "hello":
      platformName.textContent = `${msg.platform.name} @ ${msg.rate} Hz`;
      break;
    case "compile": {
      const b = compileBanner(msg);
      showBanner(b.text, b.kind);
      break;
    }
    case "state":
      // Server-authoritative: controls move only on this echo.
      transport.applyState(msg);
      tempoSlider.value = String(transport.tempoMultiplier);
      tempoValue.textContent = `${transport.tempoMultiplier.toFixed(2)}x`;
      seekBar.max = String(Math.max(transport.maxPlayhead, 1));
      seekBar.value = String(transport.playhead);
      playheadValue.textContent = `${transport.playhead.toFixed(2)} s`;
      playButton.disabled = transport.mode === "playing";
      pauseButton.disabled = transport.mode === "paused";
      break;
    case "error":
      showBanner(msg.message, "error");
      break;
    default:
      break;
  }
};

playButton.addEventListener("click", () => transport.play());
pauseButton.addEventListener("click", () => transport.pause());
retrogradeButton.addEventListener("click", () => transport.applyTransform("retrograde"));
mirrorButton.addEventListener("click", () => transport.applyTransform("mirror_x"));

tempoSlider.min = String(TEMPO_MIN);
tempoSlider.max = String(TEMPO_MAX);
tempoSlider.step = "0.05";
tempoSlider.addEventListener("change", () => {
  transport.setTempo(Number(tempoSlider.value));
});

seekBar.addEventListener("change", () => {
  transport.seek(Number(seekBar.value));
});

planeSelect.addEventListener("change", () => {
  view.camera.plane = planeSelect.value as Plane;
});
zoomSlider.addEventListener("input", () => {
  view.camera.zoom = Number(zoomSlider.value);
});

function renderScoreStrip(): void {
  const current = view.currentFrame?.trace_index ?? 0;
  const total = view.maxTraceIndex + 1;
  const cells: string[] = [];
  for (let i = 0; i < total; i++) {
    cells.push(`<span class="cell${i === current ? " active" : ""}">${i}</span>`);
  }
  scoreStrip.innerHTML = cells.join("");
}

function paint(): void {
  if (view.platform && view.currentFrame) {
    renderer.draw(view.platform, view.currentFrame, view.camera);
    renderScoreStrip();
  }
  requestAnimationFrame(paint);
}

socket.connect();
requestAnimationFrame(paint);
