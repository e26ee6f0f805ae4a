import { describe, expect, it } from "vitest";

import { DocletClient } from "../src/client.js";
import { Frame, FrameKind, decodeFrame, encodeFrame } from "../src/wire.js";

function makeClient(opts: { user?: number; doclets?: string[]; now?: () => number } = {}) {
  const sent: Frame[] = [];
  let clock = 0;
  const now = opts.now ?? (() => clock);
  const client = new DocletClient({
    user: opts.user ?? 7,
    doclets: opts.doclets ?? ["d1", "d2", "d3", "d4"],
    send: (data) => sent.push(decodeFrame(data)),
    nowMs: now,
    keepaliveMs: 1000,
  });
  return { client, sent, advance: (ms: number) => (clock += ms) };
}

/** Wire two clients through an in-memory hub that mimics relay fan-out. */
function pair(user1 = 7, user2 = 8, doclets = ["d1", "d2"]) {
  const inbox1: Uint8Array[] = [];
  const inbox2: Uint8Array[] = [];
  const c1 = new DocletClient({ user: user1, doclets, send: (d) => inbox2.push(d) });
  const c2 = new DocletClient({ user: user2, doclets, send: (d) => inbox1.push(d) });
  const pump = () => {
    while (inbox1.length || inbox2.length) {
      for (const data of inbox1.splice(0)) {
        const frame = decodeFrame(data);
        if (frame.kind === FrameKind.Update || frame.kind === FrameKind.Awareness) {
          c1.onMessage(data);
        }
      }
      for (const data of inbox2.splice(0)) {
        const frame = decodeFrame(data);
        if (frame.kind === FrameKind.Update || frame.kind === FrameKind.Awareness) {
          c2.onMessage(data);
        }
      }
    }
  };
  pump(); // drop the subscribe/sync handshakes
  return { c1, c2, pump };
}

describe("activation", () => {
  it("starts with exactly one active view", () => {
    const { client } = makeClient();
    expect(client.activeViewCount()).toBe(1);
    expect(client.view("d1").mode).toBe("active");
  });

  it("clicking keeps the single-active invariant across any sequence", () => {
    const { client } = makeClient();
    for (const id of ["d3", "d3", "d2", "d4", "d1", "d4"]) {
      client.activate(id);
      expect(client.activeViewCount()).toBe(1);
      expect(client.activeDoclet).toBe(id);
      expect(client.view(id).mode).toBe("active");
    }
  });

  it("re-clicking the active view at the same caret sends nothing", () => {
    const { client } = makeClient();
    expect(client.activate("d1", 0)).toBe(1); // first placement
    expect(client.activate("d1", 0)).toBe(0); // dedup
  });

  it("switching doclets sends even at the same numeric index", () => {
    const { client, sent } = makeClient();
    client.activate("d1", 0);
    const n = sent.length;
    expect(client.activate("d2", 0)).toBe(1);
    const frame = sent[n]!;
    expect(frame.kind).toBe(FrameKind.Awareness);
    expect(frame.doclet).toBe("d2");
  });

  it("rapid A->B->A sends two frames", () => {
    const { client, sent } = makeClient();
    client.activate("d1", 0);
    const n = sent.length;
    client.activate("d2", 0);
    client.activate("d1", 0);
    expect(sent.length - n).toBe(2);
  });
});

describe("keystrokes", () => {
  it("each keystroke sends exactly one update frame", () => {
    const { client, sent } = makeClient();
    client.activate("d1", 0);
    const n = sent.length;
    client.keystroke("d1", "h");
    client.keystroke("d1", "i");
    const frames = sent.slice(n);
    expect(frames.map((f) => f.kind)).toEqual([FrameKind.Update, FrameKind.Update]);
    expect(client.view("d1").text()).toBe("hi");
  });

  it("backspace in an empty doclet sends nothing", () => {
    const { client, sent } = makeClient();
    client.activate("d1", 0);
    const n = sent.length;
    expect(client.keystroke("d1", "Backspace")).toBe(0);
    expect(sent.length).toBe(n);
  });

  it("edits on static views are ignored", () => {
    const { client, sent } = makeClient();
    const n = sent.length;
    expect(client.keystroke("d2", "x")).toBe(0);
    expect(client.view("d2").text()).toBe("");
    expect(sent.length).toBe(n);
  });

  it("typing never emits awareness frames", () => {
    const { client, sent } = makeClient();
    client.activate("d1", 0);
    const n = sent.length;
    for (const ch of "silent cursors") client.keystroke("d1", ch);
    expect(sent.slice(n).every((f) => f.kind === FrameKind.Update)).toBe(true);
  });
});

describe("inbound routing", () => {
  it("two clients converge through fan-out", () => {
    const { c1, c2, pump } = pair();
    c1.activate("d1", 0);
    c2.activate("d1", 0);
    for (const ch of "abc") c1.keystroke("d1", ch);
    for (const ch of "xyz") c2.keystroke("d1", ch);
    pump();
    expect(c1.view("d1").text()).toBe(c2.view("d1").text());
    expect(c1.view("d1").text()).toHaveLength(6);
    expect(c1.view("d2").text()).toBe("");
  });

  it("unknown doclet ids count as routing errors", () => {
    const { client } = makeClient();
    client.onMessage(encodeFrame({ kind: FrameKind.Update, doclet: "zz", ops: [] }));
    expect(client.routingErrors).toBe(1);
  });

  it("undecodable bytes count as decode errors", () => {
    const { client } = makeClient();
    client.onMessage(Uint8Array.from([0xff, 0x00]));
    expect(client.decodeErrors).toBe(1);
  });
});

describe("remote cursors", () => {
  it("no remote users means no carets", () => {
    const { client } = makeClient();
    expect(client.remoteCursors("d1")).toEqual([]);
  });

  it("remote awareness at head renders at index 0", () => {
    const { client } = makeClient();
    client.onMessage(
      encodeFrame({ kind: FrameKind.Awareness, doclet: "d1", user: 9, anchor: "head" })
    );
    expect(client.remoteCursors("d1")).toEqual([{ user: 9, index: 0 }]);
  });

  it("typing advances the author cursor without awareness frames", () => {
    const { c1, c2, pump } = pair(7, 8, ["d1"]);
    c1.activate("d1", 0);
    for (const ch of "hey") c1.keystroke("d1", ch);
    pump();
    expect(c2.remoteCursors("d1")).toEqual([{ user: 7, index: 3 }]);
  });

  it("a cursor on a locally deleted character falls back to the nearest visible spot", () => {
    const { c1, c2, pump } = pair(7, 8, ["d1"]);
    c1.activate("d1", 0);
    for (const ch of "abc") c1.keystroke("d1", ch);
    pump();
    c2.activate("d1", 2); // caret after 'b', anchored on 'b'
    pump();
    c1.keystroke("d1", "Backspace"); // deletes 'c'
    c1.activate("d1", 1);
    c1.keystroke("d1", "Backspace"); // deletes 'a'
    pump();
    const cursors = c1.remoteCursors("d1");
    expect(cursors).toEqual([{ user: 8, index: 1 }]); // after 'b'
  });

  it("unresolvable anchors stay hidden until the insert arrives", () => {
    const { client } = makeClient();
    client.onMessage(
      encodeFrame({
        kind: FrameKind.Awareness,
        doclet: "d1",
        user: 9,
        anchor: { replica: 999 * 2 ** 20, seq: 1 },
      })
    );
    expect(client.remoteCursors("d1")).toEqual([]);
  });

  it("stale entries expire after the ttl", () => {
    const { client, advance } = makeClient();
    client.onMessage(
      encodeFrame({ kind: FrameKind.Awareness, doclet: "d1", user: 9, anchor: "head" })
    );
    expect(client.remoteCursors("d1")).toHaveLength(1);
    advance(30_001);
    expect(client.remoteCursors("d1")).toEqual([]);
  });
});

describe("keepalive", () => {
  it("quiet clients send one keepalive per interval, tagged with the active doclet", () => {
    const { client, sent, advance } = makeClient();
    const n = sent.length;
    expect(client.tick()).toBe(0);
    advance(1000);
    expect(client.tick()).toBe(1);
    expect(client.tick()).toBe(0);
    const frame = sent[n]!;
    expect(frame.kind).toBe(FrameKind.Keepalive);
    expect(frame.doclet).toBe("d1");
  });
});
