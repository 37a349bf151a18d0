// Stick-figure rendering: world endpoints arrive on the wire (the daemon
// runs the kinematics), so drawing is projection plus line segments.

import { FrameMessage, PlatformDoc } from "./protocol.js";
import { Camera, Plane } from "./view.js";

export type Vec3 = readonly [number, number, number];

export interface Segment {
  from: Vec3;
  to: Vec3;
}

/** Each link draws from its parent's endpoint (or the root) to its own. */
export function segments(platform: PlatformDoc, endpoints: Vec3[]): Segment[] {
  const byName = new Map<string, number>();
  platform.links.forEach((link, i) => byName.set(link.name, i));
  return platform.links.map((link, i) => {
    const from =
      link.parent === null ? platform.root : endpoints[byName.get(link.parent)!];
    return { from, to: endpoints[i] };
  });
}

export function project(p: Vec3, plane: Plane): [number, number] {
  switch (plane) {
    case "xy":
      return [p[0], p[1]];
    case "xz":
      return [p[0], p[2]];
    case "yz":
      return [p[1], p[2]];
  }
}

/** Full extension of the longest chain, for fitting the view. */
export function platformReach(platform: PlatformDoc): number {
  let total = 0;
  for (const link of platform.links) total += link.length;
  return Math.max(total, 1e-6);
}

// The subset of CanvasRenderingContext2D the renderer touches; tests stub
// it, the browser provides the real one.  Style properties use the DOM's
// union type so a real context is assignable.
export interface Canvas2D {
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  stroke(): void;
  fill(): void;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
}

export class Renderer {
  constructor(
    private ctx: Canvas2D,
    private width: number,
    private height: number,
  ) {}

  resize(width: number, height: number): void {
    this.width = width;
    this.height = height;
  }

  private toPixel(p: Vec3, plane: Plane, scale: number): [number, number] {
    const [u, v] = project(p, plane);
    return [this.width / 2 + u * scale, this.height / 2 - v * scale];
  }

  draw(platform: PlatformDoc, frame: FrameMessage, camera: Camera): void {
    const ctx = this.ctx;
    ctx.clearRect(0, 0, this.width, this.height);
    const fit = (Math.min(this.width, this.height) / 2) * 0.85;
    const scale = (fit / platformReach(platform)) * camera.zoom;

    // Root marker.
    ctx.fillStyle = "#888";
    ctx.beginPath();
    const [rx, ry] = this.toPixel(platform.root, camera.plane, scale);
    ctx.arc(rx, ry, 4, 0, Math.PI * 2);
    ctx.fill();

    ctx.strokeStyle = "#3ba7ff";
    ctx.lineWidth = 3;
    for (const seg of segments(platform, frame.endpoints)) {
      const [x0, y0] = this.toPixel(seg.from, camera.plane, scale);
      const [x1, y1] = this.toPixel(seg.to, camera.plane, scale);
      ctx.beginPath();
      ctx.moveTo(x0, y0);
      ctx.lineTo(x1, y1);
      ctx.stroke();
    }

    ctx.fillStyle = "#ffb13b";
    for (const p of frame.endpoints) {
      const [x, y] = this.toPixel(p, camera.plane, scale);
      ctx.beginPath();
      ctx.arc(x, y, 3.5, 0, Math.PI * 2);
      ctx.fill();
    }
  }
}
