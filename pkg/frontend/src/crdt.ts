/**
 * Client-side sequence replica.
 *
 * Elements are single characters identified by (replica, seq); an insert
 * names the element to its left at creation time (or HEAD). Concurrent
 * inserts after the same origin order by descending (lamport, replica), so
 * every replica converges on the same sequence regardless of delivery order.
 * Deletes tombstone; tombstones keep cursor anchors resolvable. Ops that are
 * not yet causally ready (per-replica seq gap, unknown origin/target) wait in
 * a pending buffer.
 */

import { Anchor, DeleteOp, HEAD, InsertOp, Op, OpId, idKey, sameId } from "./wire.js";

interface Element {
  op: InsertOp;
  deleted: boolean;
}

export type Integration = "applied" | "buffered" | "duplicate";

export class Doc {
  private elements: Element[] = [];
  private byId = new Map<string, Element>();
  private opLog = new Map<string, Op>();
  private vv = new Map<number, number>();
  private lamport = 0;
  private pendingOps: Op[] = [];

  constructor(readonly replica: number) {}

  // ---------------------------------------------------------------- locals

  insert(index: number, ch: string): InsertOp {
    if (index < 0 || index > this.length()) {
      throw new RangeError(`insert index ${index} out of range`);
    }
    const op: InsertOp = {
      type: "insert",
      id: { replica: this.replica, seq: (this.vv.get(this.replica) ?? 0) + 1 },
      lamport: this.lamport + 1,
      origin: this.anchorAt(index),
      ch,
    };
    if (this.integrate(op) !== "applied") throw new Error("local insert must apply");
    return op;
  }

  delete(index: number): DeleteOp {
    if (index < 0 || index >= this.length()) {
      throw new RangeError(`delete index ${index} out of range`);
    }
    const target = this.visibleElement(index).op.id;
    const op: DeleteOp = {
      type: "delete",
      id: { replica: this.replica, seq: (this.vv.get(this.replica) ?? 0) + 1 },
      target,
    };
    if (this.integrate(op) !== "applied") throw new Error("local delete must apply");
    return op;
  }

  // ---------------------------------------------------------------- remote

  integrate(op: Op): Integration {
    const result = this.tryIntegrate(op, false);
    if (result === "applied") this.drainPending();
    return result;
  }

  private tryIntegrate(op: Op, fromBuffer: boolean): Integration {
    if (op.id.seq <= (this.vv.get(op.id.replica) ?? 0)) return "duplicate";
    if (!this.ready(op)) {
      if (!fromBuffer) this.pendingOps.push(op);
      return "buffered";
    }
    if (op.type === "insert") this.applyInsert(op);
    else this.applyDelete(op);
    this.opLog.set(idKey(op.id), op);
    this.vv.set(op.id.replica, op.id.seq);
    return "applied";
  }

  private ready(op: Op): boolean {
    if (op.id.seq !== (this.vv.get(op.id.replica) ?? 0) + 1) return false;
    if (op.type === "insert") {
      return op.origin === HEAD || this.byId.has(idKey(op.origin));
    }
    return this.byId.has(idKey(op.target));
  }

  private applyInsert(op: InsertOp): void {
    let i = 0;
    if (op.origin !== HEAD) {
      const originEl = this.byId.get(idKey(op.origin))!;
      i = this.elements.indexOf(originEl) + 1;
    }
    // Skip concurrent ops (and, by lamport monotonicity, their subtrees)
    // whose key beats ours; stop before the first smaller key.
    while (i < this.elements.length) {
      const el = this.elements[i]!.op;
      if (
        el.lamport < op.lamport ||
        (el.lamport === op.lamport && el.id.replica < op.id.replica)
      ) {
        break;
      }
      i += 1;
    }
    const element: Element = { op, deleted: false };
    this.elements.splice(i, 0, element);
    this.byId.set(idKey(op.id), element);
    this.lamport = Math.max(this.lamport, op.lamport);
  }

  private applyDelete(op: DeleteOp): void {
    this.byId.get(idKey(op.target))!.deleted = true;
  }

  private drainPending(): void {
    let progressed = true;
    while (progressed && this.pendingOps.length > 0) {
      progressed = false;
      const still: Op[] = [];
      for (const op of this.pendingOps) {
        if (this.tryIntegrate(op, true) === "buffered") still.push(op);
        else progressed = true;
      }
      this.pendingOps = still;
    }
  }

  // ----------------------------------------------------------------- reads

  text(): string {
    let out = "";
    for (const el of this.elements) if (!el.deleted) out += el.op.ch;
    return out;
  }

  length(): number {
    let n = 0;
    for (const el of this.elements) if (!el.deleted) n++;
    return n;
  }

  version(): Array<[number, number]> {
    return [...this.vv.entries()].sort((a, b) => a[0] - b[0]);
  }

  pendingCount(): number {
    return this.pendingOps.length;
  }

  knowsInsert(id: OpId): boolean {
    return this.byId.has(idKey(id));
  }

  // --------------------------------------------------------------- cursors

  anchorAt(index: number): Anchor {
    if (index < 0 || index > this.length()) {
      throw new RangeError(`anchor index ${index} out of range`);
    }
    if (index === 0) return HEAD;
    return this.visibleElement(index - 1).op.id;
  }

  /** Tombstoned anchors resolve after the nearest preceding visible element. */
  indexOf(anchor: Anchor): number {
    if (anchor === HEAD) return 0;
    if (!this.byId.has(idKey(anchor))) throw new RangeError(`unknown anchor ${idKey(anchor)}`);
    let n = 0;
    for (const el of this.elements) {
      if (!el.deleted) n++;
      if (sameId(el.op.id, anchor)) return n;
    }
    throw new Error("indexed element missing from sequence");
  }

  private visibleElement(index: number): Element {
    let n = -1;
    for (const el of this.elements) {
      if (!el.deleted) {
        n += 1;
        if (n === index) return el;
      }
    }
    throw new RangeError(`visible index ${index} out of range`);
  }
}
