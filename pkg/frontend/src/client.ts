/**
 * Page controller: several doclets, one connection.
 *
 * Exactly one doclet view is ACTIVE (editable) at a time; the rest are
 * rendered statically. Clicking a view activates it; a cursor frame is sent
 * only when the active doclet or the caret anchor actually changed. Each
 * keystroke maps to exactly one update frame — receivers move the author's
 * cursor from the update itself, so typing never emits awareness frames.
 *
 * Transport-agnostic: the host supplies `send` and feeds inbound binary
 * messages to `onMessage`, so the same class runs under a browser WebSocket
 * or a test harness.
 */

import { Doc } from "./crdt.js";
import {
  Anchor,
  Frame,
  FrameKind,
  HEAD,
  Op,
  WireError,
  decodeFrame,
  encodeFrame,
} from "./wire.js";

// Replica ids are user * 2**20 + doclet index; user ids stay below 2**31 so
// every replica fits exactly in a double. The author of an op is recovered
// by the inverse division.
export const REPLICA_STRIDE = 2 ** 20;

export type ViewMode = "active" | "static";

export interface RemoteCursor {
  user: number;
  index: number;
}

interface AwarenessState {
  anchor: Anchor | null;
  lastSeenMs: number;
}

export class DocletView {
  readonly doc: Doc;
  mode: ViewMode = "static";
  caret: Anchor = HEAD;
  awareness = new Map<number, AwarenessState>();

  constructor(readonly id: string, replica: number) {
    this.doc = new Doc(replica);
  }

  text(): string {
    return this.doc.text();
  }

  caretIndex(): number {
    try {
      return this.doc.indexOf(this.caret);
    } catch {
      return 0; // anchor vanished with a reset; fall back to the start
    }
  }
}

export interface ClientOptions {
  user: number;
  doclets: string[];
  send: (data: Uint8Array) => void;
  nowMs?: () => number;
  keepaliveMs?: number;
  awarenessTtlMs?: number;
}

export class DocletClient {
  readonly views = new Map<string, DocletView>();
  activeDoclet: string;
  framesSent = 0;
  framesReceived = 0;
  routingErrors = 0;
  decodeErrors = 0;

  private readonly user: number;
  private readonly send: (data: Uint8Array) => void;
  private readonly nowMs: () => number;
  private readonly keepaliveMs: number;
  private readonly awarenessTtlMs: number;
  private lastSendMs: number;
  private lastSentCursor: { doclet: string; anchor: Anchor } | null = null;
  private listeners = new Set<(doclet: string) => void>();

  constructor(opts: ClientOptions) {
    if (opts.doclets.length === 0) throw new Error("need at least one doclet");
    if (opts.user < 1 || opts.user >= 2 ** 31) throw new Error("user id out of range");
    this.user = opts.user;
    this.send = opts.send;
    this.nowMs = opts.nowMs ?? (() => Date.now());
    this.keepaliveMs = opts.keepaliveMs ?? 1000;
    this.awarenessTtlMs = opts.awarenessTtlMs ?? 30_000;
    this.lastSendMs = this.nowMs();
    opts.doclets.forEach((id, index) => {
      if (this.views.has(id)) throw new Error(`duplicate doclet ${id}`);
      this.views.set(id, new DocletView(id, opts.user * REPLICA_STRIDE + index));
    });
    this.activeDoclet = opts.doclets[0]!;
    this.view(this.activeDoclet).mode = "active";
    for (const [id, view] of this.views) {
      this.sendFrame({ kind: FrameKind.Subscribe, doclet: id });
      this.sendFrame({ kind: FrameKind.SyncReq, doclet: id, entries: view.doc.version() });
    }
  }

  view(id: string): DocletView {
    const view = this.views.get(id);
    if (!view) throw new Error(`unknown doclet ${id}`);
    return view;
  }

  /** Re-render hook: fires whenever a doclet's content or cursors change. */
  onChange(listener: (doclet: string) => void): void {
    this.listeners.add(listener);
  }

  private changed(doclet: string): void {
    for (const listener of this.listeners) listener(doclet);
  }

  private sendFrame(frame: Frame): void {
    this.send(encodeFrame(frame));
    this.framesSent += 1;
    this.lastSendMs = this.nowMs();
  }

  // ------------------------------------------------------------ interaction

  /**
   * Click handler: the clicked view becomes the single ACTIVE one.
   * Returns the number of frames sent (0 when the cursor gate dedups).
   */
  activate(doclet: string, index?: number): number {
    const view = this.view(doclet);
    const wasActive = this.activeDoclet === doclet;
    if (!wasActive) {
      this.view(this.activeDoclet).mode = "static";
      view.mode = "active";
      this.activeDoclet = doclet;
      this.changed(doclet);
    }
    const caretIndex = Math.min(index ?? view.caretIndex(), view.doc.length());
    const anchor = view.doc.anchorAt(caretIndex);
    view.caret = anchor;
    if (
      wasActive &&
      this.lastSentCursor !== null &&
      this.lastSentCursor.doclet === doclet &&
      anchorsEqual(this.lastSentCursor.anchor, anchor)
    ) {
      return 0;
    }
    this.lastSentCursor = { doclet, anchor };
    this.sendFrame({ kind: FrameKind.Awareness, doclet, user: this.user, anchor });
    return 1;
  }

  /**
   * Keystroke on the active view: a printable character inserts at the
   * caret, Backspace deletes before it. Returns frames sent; edits on
   * anything but the active view are ignored.
   */
  keystroke(doclet: string, key: string): number {
    const view = this.view(doclet);
    if (view.mode !== "active") return 0;
    const caretIndex = view.caretIndex();
    let op: Op;
    if (key === "Backspace") {
      if (caretIndex === 0) return 0;
      op = view.doc.delete(caretIndex - 1);
      view.caret = view.doc.anchorAt(caretIndex - 1);
    } else {
      if ([...key].length !== 1) return 0;
      op = view.doc.insert(caretIndex, key);
      view.caret = op.id;
    }
    this.sendFrame({ kind: FrameKind.Update, doclet, ops: [op] });
    this.changed(doclet);
    return 1;
  }

  // --------------------------------------------------------------- inbound

  onMessage(data: Uint8Array): void {
    this.framesReceived += 1;
    let frame: Frame;
    try {
      frame = decodeFrame(data);
    } catch (err) {
      if (err instanceof WireError) {
        this.decodeErrors += 1;
        return;
      }
      throw err;
    }
    const view = this.views.get(frame.doclet);
    if (!view) {
      this.routingErrors += 1;
      return;
    }
    if (frame.kind === FrameKind.Update) {
      for (const op of frame.ops) {
        if (view.doc.integrate(op) === "applied") this.followAuthor(view, op);
      }
      this.changed(frame.doclet);
    } else if (frame.kind === FrameKind.Awareness) {
      if (frame.user !== this.user) {
        view.awareness.set(frame.user, { anchor: frame.anchor, lastSeenMs: this.nowMs() });
        this.changed(frame.doclet);
      }
    }
  }

  private followAuthor(view: DocletView, op: Op): void {
    const author = Math.floor(op.id.replica / REPLICA_STRIDE);
    if (author < 1 || author === this.user) return;
    const anchor: Anchor = op.type === "insert" ? op.id : op.target;
    view.awareness.set(author, { anchor, lastSeenMs: this.nowMs() });
  }

  // ---------------------------------------------------------------- render

  /** Resolved, TTL-filtered remote cursors; unresolvable anchors are hidden. */
  remoteCursors(doclet: string): RemoteCursor[] {
    const view = this.view(doclet);
    const now = this.nowMs();
    const out: RemoteCursor[] = [];
    for (const [user, state] of [...view.awareness]) {
      if (now - state.lastSeenMs > this.awarenessTtlMs) {
        view.awareness.delete(user);
        continue;
      }
      if (state.anchor === null) continue;
      try {
        out.push({ user, index: view.doc.indexOf(state.anchor) });
      } catch {
        continue; // anchor not integrated here yet
      }
    }
    return out.sort((a, b) => a.user - b.user);
  }

  /** Periodic housekeeping: one keepalive per quiet keepalive interval. */
  tick(): number {
    const now = this.nowMs();
    if (now - this.lastSendMs < this.keepaliveMs) return 0;
    this.sendFrame({ kind: FrameKind.Keepalive, doclet: this.activeDoclet });
    return 1;
  }

  activeViewCount(): number {
    let n = 0;
    for (const view of this.views.values()) if (view.mode === "active") n++;
    return n;
  }
}

function anchorsEqual(a: Anchor, b: Anchor): boolean {
  if (a === HEAD || b === HEAD) return a === b;
  return a.replica === b.replica && a.seq === b.seq;
}
