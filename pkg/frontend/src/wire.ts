/**
 * Binary frame codec, implemented from the published wire contract (the
 * server side keeps its own implementation; these bytes are the boundary).
 *
 *   frame     = kind:u8  id_len:varint  doclet_id:utf8  payload
 *   SYNC_REQ  = count (replica seq)*
 *   UPDATE    = count op*          op = 0x00 insert | 0x01 delete
 *   insert    = replica seq lamport anchor codepoint
 *   delete    = replica seq target_replica target_seq
 *   anchor    = 0x00 head | 0x01 replica seq
 *   AWARENESS = user (0x00 absent | 0x01 head | 0x02 replica seq)
 *
 * Varints are unsigned LEB128. One frame per WebSocket binary message.
 */

export interface OpId {
  replica: number;
  seq: number;
}

export const HEAD = "head" as const;
export type Anchor = typeof HEAD | OpId;

export interface InsertOp {
  type: "insert";
  id: OpId;
  lamport: number;
  origin: Anchor;
  ch: string;
}

export interface DeleteOp {
  type: "delete";
  id: OpId;
  target: OpId;
}

export type Op = InsertOp | DeleteOp;

export enum FrameKind {
  Subscribe = 0x01,
  SyncReq = 0x02,
  Update = 0x03,
  Awareness = 0x04,
  Unsubscribe = 0x05,
  Keepalive = 0x06,
}

export type Frame =
  | { kind: FrameKind.Subscribe | FrameKind.Unsubscribe | FrameKind.Keepalive; doclet: string }
  | { kind: FrameKind.SyncReq; doclet: string; entries: Array<[number, number]> }
  | { kind: FrameKind.Update; doclet: string; ops: Op[] }
  | { kind: FrameKind.Awareness; doclet: string; user: number; anchor: Anchor | null };

export class WireError extends Error {}

const MAX_DOCLET_ID_BYTES = 255;

export function sameId(a: OpId, b: OpId): boolean {
  return a.replica === b.replica && a.seq === b.seq;
}

export function idKey(id: OpId): string {
  return `${id.replica}:${id.seq}`;
}

// ------------------------------------------------------------------- varint

export function encodeVarint(value: number, out: number[]): void {
  if (!Number.isInteger(value) || value < 0 || value > Number.MAX_SAFE_INTEGER) {
    throw new WireError(`varint out of range: ${value}`);
  }
  // Bitwise operators truncate to 32 bits, so stay in arithmetic.
  for (;;) {
    const byte = value % 128;
    value = Math.floor(value / 128);
    if (value > 0) {
      out.push(byte | 0x80);
    } else {
      out.push(byte);
      return;
    }
  }
}

class Reader {
  pos = 0;

  constructor(private data: Uint8Array) {}

  u8(): number {
    const b = this.data[this.pos];
    if (b === undefined) throw new WireError("truncated frame");
    this.pos += 1;
    return b;
  }

  varint(): number {
    let value = 0;
    let scale = 1;
    for (let i = 0; ; i++) {
      if (i >= 10) throw new WireError("varint longer than 10 bytes");
      const byte = this.u8();
      value += (byte & 0x7f) * scale;
      if ((byte & 0x80) === 0) break;
      scale *= 128;
    }
    if (value > Number.MAX_SAFE_INTEGER) {
      throw new WireError("varint exceeds the safe integer range");
    }
    return value;
  }

  raw(n: number): Uint8Array {
    if (this.pos + n > this.data.length) throw new WireError("truncated frame");
    const chunk = this.data.subarray(this.pos, this.pos + n);
    this.pos += n;
    return chunk;
  }

  expectEnd(): void {
    if (this.pos !== this.data.length) {
      throw new WireError(`${this.data.length - this.pos} trailing bytes after frame`);
    }
  }
}

export function decodeVarint(data: Uint8Array): [number, number] {
  const reader = new Reader(data);
  const value = reader.varint();
  return [value, reader.pos];
}

// -------------------------------------------------------------------- frame

function encodeId(id: OpId, out: number[]): void {
  encodeVarint(id.replica, out);
  encodeVarint(id.seq, out);
}

function encodeOp(op: Op, out: number[]): void {
  if (op.type === "insert") {
    out.push(0x00);
    encodeId(op.id, out);
    encodeVarint(op.lamport, out);
    if (op.origin === HEAD) {
      out.push(0x00);
    } else {
      out.push(0x01);
      encodeId(op.origin, out);
    }
    const cp = op.ch.codePointAt(0);
    if (cp === undefined || String.fromCodePoint(cp) !== op.ch) {
      throw new WireError("insert must carry exactly one code point");
    }
    encodeVarint(cp, out);
  } else {
    out.push(0x01);
    encodeId(op.id, out);
    encodeId(op.target, out);
  }
}

export function encodeFrame(frame: Frame): Uint8Array {
  const idBytes = new TextEncoder().encode(frame.doclet);
  if (idBytes.length > MAX_DOCLET_ID_BYTES) {
    throw new WireError("doclet id exceeds 255 UTF-8 bytes");
  }
  const out: number[] = [frame.kind];
  encodeVarint(idBytes.length, out);
  out.push(...idBytes);
  switch (frame.kind) {
    case FrameKind.SyncReq:
      encodeVarint(frame.entries.length, out);
      for (const [replica, seq] of frame.entries) {
        encodeVarint(replica, out);
        encodeVarint(seq, out);
      }
      break;
    case FrameKind.Update:
      encodeVarint(frame.ops.length, out);
      for (const op of frame.ops) encodeOp(op, out);
      break;
    case FrameKind.Awareness:
      encodeVarint(frame.user, out);
      if (frame.anchor === null) {
        out.push(0x00);
      } else if (frame.anchor === HEAD) {
        out.push(0x01);
      } else {
        out.push(0x02);
        encodeId(frame.anchor, out);
      }
      break;
    default:
      break; // subscribe / unsubscribe / keepalive carry no payload
  }
  return Uint8Array.from(out);
}

function decodeOp(r: Reader): Op {
  const opKind = r.u8();
  if (opKind === 0x00) {
    const id = { replica: r.varint(), seq: r.varint() };
    const lamport = r.varint();
    const anchorTag = r.u8();
    let origin: Anchor;
    if (anchorTag === 0x00) origin = HEAD;
    else if (anchorTag === 0x01) origin = { replica: r.varint(), seq: r.varint() };
    else throw new WireError(`unknown anchor tag 0x${anchorTag.toString(16)}`);
    const cp = r.varint();
    if (cp > 0x10ffff || (cp >= 0xd800 && cp <= 0xdfff)) {
      throw new WireError(`invalid codepoint ${cp}`);
    }
    return { type: "insert", id, lamport, origin, ch: String.fromCodePoint(cp) };
  }
  if (opKind === 0x01) {
    return {
      type: "delete",
      id: { replica: r.varint(), seq: r.varint() },
      target: { replica: r.varint(), seq: r.varint() },
    };
  }
  throw new WireError(`unknown op kind 0x${opKind.toString(16)}`);
}

export function decodeFrame(data: Uint8Array): Frame {
  const r = new Reader(data);
  const kind = r.u8();
  const idLen = r.varint();
  if (idLen > MAX_DOCLET_ID_BYTES) throw new WireError("doclet id exceeds 255 bytes");
  let doclet: string;
  try {
    doclet = new TextDecoder("utf-8", { fatal: true }).decode(r.raw(idLen));
  } catch {
    throw new WireError("doclet id is not valid UTF-8");
  }

  let frame: Frame;
  switch (kind) {
    case FrameKind.Subscribe:
    case FrameKind.Unsubscribe:
    case FrameKind.Keepalive:
      frame = { kind, doclet };
      break;
    case FrameKind.SyncReq: {
      const count = r.varint();
      const entries: Array<[number, number]> = [];
      for (let i = 0; i < count; i++) entries.push([r.varint(), r.varint()]);
      frame = { kind, doclet, entries };
      break;
    }
    case FrameKind.Update: {
      const count = r.varint();
      const ops: Op[] = [];
      for (let i = 0; i < count; i++) ops.push(decodeOp(r));
      frame = { kind, doclet, ops };
      break;
    }
    case FrameKind.Awareness: {
      const user = r.varint();
      const tag = r.u8();
      let anchor: Anchor | null;
      if (tag === 0x00) anchor = null;
      else if (tag === 0x01) anchor = HEAD;
      else if (tag === 0x02) anchor = { replica: r.varint(), seq: r.varint() };
      else throw new WireError(`unknown awareness anchor tag 0x${tag.toString(16)}`);
      frame = { kind, doclet, user, anchor };
      break;
    }
    default:
      throw new WireError(`unknown frame kind 0x${kind.toString(16)}`);
  }
  r.expectEnd();
  return frame;
}
