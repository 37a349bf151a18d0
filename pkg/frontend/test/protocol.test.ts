import { describe, expect, test } from "vitest";

import { control, encodeControl, parseServerMessage } from "../src/protocol.js";

describe("parseServerMessage", () => {
  test("accepts every server type", () => {
    for (const type of ["hello", "compile", "frame", "state", "error"]) {
      const msg = parseServerMessage(JSON.stringify({ type }));
      expect(msg?.type).toBe(type);
    }
  });

  test("rejects garbage, unknown types, and non-objects", () => {
    expect(parseServerMessage("not json")).toBeNull();
    expect(parseServerMessage('"just a string"')).toBeNull();
    expect(parseServerMessage("[1,2]")).toBeNull();
    expect(parseServerMessage('{"type":"surprise"}')).toBeNull();
    expect(parseServerMessage('{"no_type":1}')).toBeNull();
  });

  test("round-trips a frame", () => {
    const wire = JSON.stringify({
      type: "frame",
      trajectory_id: 3,
      t: 1.5,
      q: [0.1, 0.2],
      endpoints: [[1, 0, 0], [2, 0, 0]],
      trace_index: 4,
    });
    const msg = parseServerMessage(wire);
    expect(msg).toMatchObject({ type: "frame", trajectory_id: 3, trace_index: 4 });
  });
});

describe("control encoding", () => {
  test("tempo message matches the documented shape", () => {
    expect(encodeControl(control("tempo", 2.0))).toBe(
      '{"type":"control","op":"tempo","value":2}\n',
    );
  });

  test("play carries no value", () => {
    expect(encodeControl(control("play"))).toBe('{"type":"control","op":"play"}\n');
  });
});
