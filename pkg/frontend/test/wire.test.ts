import { describe, expect, it } from "vitest";
import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";

import {
  Frame,
  FrameKind,
  HEAD,
  WireError,
  decodeFrame,
  decodeVarint,
  encodeFrame,
  encodeVarint,
} from "../src/wire.js";

function varintBytes(n: number): number[] {
  const out: number[] = [];
  encodeVarint(n, out);
  return out;
}

describe("varint", () => {
  it("encodes reference values", () => {
    expect(varintBytes(0)).toEqual([0x00]);
    expect(varintBytes(127)).toEqual([0x7f]);
    expect(varintBytes(128)).toEqual([0x80, 0x01]);
    expect(varintBytes(300)).toEqual([0xac, 0x02]);
  });

  it("roundtrips across the safe range", () => {
    for (const n of [0, 1, 255, 2 ** 20, 2 ** 31, Number.MAX_SAFE_INTEGER]) {
      const bytes = Uint8Array.from(varintBytes(n));
      expect(decodeVarint(bytes)).toEqual([n, bytes.length]);
    }
  });

  it("rejects truncated input", () => {
    expect(() => decodeVarint(Uint8Array.from([0x80]))).toThrow(WireError);
  });

  it("rejects values beyond the exact double range", () => {
    // 2**64 - 1 as LEB128: ten bytes. Doubles cannot hold it exactly.
    const bytes = Uint8Array.from([...Array(9).fill(0xff), 0x01]);
    expect(() => decodeVarint(bytes)).toThrow(WireError);
  });
});

describe("frame vectors", () => {
  it("keepalive with empty id", () => {
    const frame: Frame = { kind: FrameKind.Keepalive, doclet: "" };
    expect([...encodeFrame(frame)]).toEqual([0x06, 0x00]);
    expect(decodeFrame(Uint8Array.from([0x06, 0x00]))).toEqual(frame);
  });

  it("subscribe d1", () => {
    const frame: Frame = { kind: FrameKind.Subscribe, doclet: "d1" };
    expect([...encodeFrame(frame)]).toEqual([0x01, 0x02, 0x64, 0x31]);
  });

  it("rejects unknown kinds, trailing bytes, truncation", () => {
    expect(() => decodeFrame(Uint8Array.from([0xff, 0x00]))).toThrow(WireError);
    expect(() => decodeFrame(Uint8Array.from([0x06, 0x00, 0x00]))).toThrow(/trailing/);
    expect(() => decodeFrame(Uint8Array.from([0x01, 0x02, 0x64]))).toThrow(WireError);
  });
});

describe("roundtrip", () => {
  const frames: Frame[] = [
    { kind: FrameKind.Subscribe, doclet: "notes" },
    { kind: FrameKind.SyncReq, doclet: "d", entries: [[1048576, 3], [2097152, 9]] },
    {
      kind: FrameKind.Update,
      doclet: "d",
      ops: [
        { type: "insert", id: { replica: 1048576, seq: 1 }, lamport: 1, origin: HEAD, ch: "x" },
        {
          type: "insert",
          id: { replica: 1048576, seq: 2 },
          lamport: 2,
          origin: { replica: 1048576, seq: 1 },
          ch: "é",
        },
        {
          type: "delete",
          id: { replica: 2097152, seq: 1 },
          target: { replica: 1048576, seq: 1 },
        },
      ],
    },
    { kind: FrameKind.Awareness, doclet: "d", user: 9, anchor: null },
    { kind: FrameKind.Awareness, doclet: "d", user: 9, anchor: HEAD },
    { kind: FrameKind.Awareness, doclet: "d", user: 9, anchor: { replica: 5, seq: 6 } },
  ];

  it.each(frames.map((f, i) => [i, f] as const))("frame %i", (_i, frame) => {
    expect(decodeFrame(encodeFrame(frame))).toEqual(frame);
  });

  it("handles astral-plane characters", () => {
    const frame: Frame = {
      kind: FrameKind.Update,
      doclet: "d",
      ops: [
        { type: "insert", id: { replica: 1, seq: 1 }, lamport: 1, origin: HEAD, ch: "😀" },
      ],
    };
    expect(decodeFrame(encodeFrame(frame))).toEqual(frame);
  });
});

describe("cross-implementation fixtures", () => {
  const path = fileURLToPath(new URL("./fixtures/frames.json", import.meta.url));
  const fixtures: Array<{ hex: string; kind: number; doclet: string }> = JSON.parse(
    readFileSync(path, "utf-8")
  );

  it.each(fixtures.map((f, i) => [i, f] as const))(
    "fixture %i decodes and re-encodes byte-identically",
    (_i, fixture) => {
      const bytes = Uint8Array.from(Buffer.from(fixture.hex, "hex"));
      const frame = decodeFrame(bytes);
      expect(frame.kind).toBe(fixture.kind);
      expect(frame.doclet).toBe(fixture.doclet);
      expect(Buffer.from(encodeFrame(frame)).toString("hex")).toBe(fixture.hex);
    }
  );
});
