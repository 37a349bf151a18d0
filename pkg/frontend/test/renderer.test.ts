import { describe, expect, test } from "vitest";

import { FrameMessage, PlatformDoc, PlatformLink } from "../src/protocol.js";
import { Canvas2D, platformReach, project, Renderer, segments } from "../src/renderer.js";
import { ViewState } from "../src/view.js";

function chainPlatform(joints: number): PlatformDoc {
  const links: PlatformLink[] = [];
  for (let i = 0; i < joints; i++) {
    links.push({
      name: `j${i}`,
      parent: i === 0 ? null : `j${i - 1}`,
      axis: [0, 0, 1],
      length: 1,
      limits: [-3.14, 3.14],
      direction: [1, 0, 0],
    });
  }
  return {
    format: 1,
    name: `chain${joints}`,
    root: [0, 0, 0],
    links,
    labels: { all: links.map((l) => l.name) },
    reach_scales: { near: 0.33, mid: 0.66, far: 1.0 },
  };
}

class StubCanvas implements Canvas2D {
  calls = 0;
  strokeStyle = "";
  fillStyle = "";
  lineWidth = 0;
  clearRect() { this.calls++; }
  beginPath() { this.calls++; }
  moveTo() { this.calls++; }
  lineTo() { this.calls++; }
  arc() { this.calls++; }
  stroke() { this.calls++; }
  fill() { this.calls++; }
}

describe("geometry", () => {
  test("segments connect each link to its parent endpoint", () => {
    const platform = chainPlatform(3);
    const endpoints: [number, number, number][] = [[1, 0, 0], [2, 0, 0], [3, 0, 0]];
    const segs = segments(platform, endpoints);
    expect(segs).toHaveLength(3);
    expect(segs[0].from).toEqual([0, 0, 0]);
    expect(segs[1].from).toEqual([1, 0, 0]);
    expect(segs[2].from).toEqual([2, 0, 0]);
    expect(segs[2].to).toEqual([3, 0, 0]);
  });

  test("projection picks the camera plane", () => {
    const p: [number, number, number] = [1, 2, 3];
    expect(project(p, "xy")).toEqual([1, 2]);
    expect(project(p, "xz")).toEqual([1, 3]);
    expect(project(p, "yz")).toEqual([2, 3]);
  });

  test("platform reach sums the chain", () => {
    expect(platformReach(chainPlatform(16))).toBe(16);
  });
});

describe("frame budget", () => {
  test("a 16-joint stream renders 10 s of frames at well over 30 fps", () => {
    const joints = 16;
    const platform = chainPlatform(joints);
    const rate = 60;
    const seconds = 10;
    const view = new ViewState(() => 0);
    view.ingest({ type: "hello", platform, rate });
    view.ingest({
      type: "compile", ok: true, latency_ms: 1, diagnostics: [], trajectory_id: 1,
    });

    // 10 s of synthetic stream: a waving chain.
    const stream: FrameMessage[] = [];
    for (let k = 0; k < rate * seconds; k++) {
      const endpoints: [number, number, number][] = [];
      let x = 0, y = 0;
      for (let j = 0; j < joints; j++) {
        const angle = Math.sin(k / 30 + j * 0.4) * 0.8;
        x += Math.cos(angle);
        y += Math.sin(angle);
        endpoints.push([x, y, 0]);
      }
      stream.push({
        type: "frame", trajectory_id: 1, t: k / rate,
        q: new Array(joints).fill(0), endpoints, trace_index: k % 7,
      });
    }

    const canvas = new StubCanvas();
    const renderer = new Renderer(canvas, 900, 640);
    const started = performance.now();
    for (const frame of stream) {
      view.ingest(frame);
      renderer.draw(platform, view.currentFrame!, view.camera);
    }
    const elapsedMs = performance.now() - started;
    const perFrameMs = elapsedMs / stream.length;

    expect(view.currentFrame?.t).toBeCloseTo(seconds - 1 / rate, 5);
    expect(canvas.calls).toBeGreaterThan(stream.length * joints);
    // 30 fps allows 33.3 ms per frame; require 10x headroom.
    expect(perFrameMs).toBeLessThan(3.3);
  });
});
