/**
 * Browser entry point. Doclets come from the query string
 * (?doclets=d1,d2,d3,d4), the user id is random per tab, and the whole page
 * shares one WebSocket to ws://<host>/collab.
 *
 * The active doclet renders as a textarea; the others render as plain
 * read-only blocks that re-render on every applied remote update. Remote
 * cursors show as per-user badges at their resolved positions.
 */

import { DocletClient } from "./client.js";

const PALETTE = ["#e06c75", "#61afef", "#98c379", "#c678dd", "#d19a66", "#56b6c2"];

function userColor(user: number): string {
  return PALETTE[user % PALETTE.length]!;
}

function docletsFromQuery(): string[] {
  const raw = new URLSearchParams(window.location.search).get("doclets") ?? "d1,d2,d3,d4";
  const ids = raw.split(",").map((s) => s.trim()).filter(Boolean);
  return ids.length > 0 ? ids : ["d1"];
}

function relayUrl(user: number): string {
  const params = new URLSearchParams(window.location.search);
  const override = params.get("relay");
  const scheme = window.location.protocol === "https:" ? "wss" : "ws";
  const host = override ?? `${scheme}://${window.location.hostname}:8765`;
  return `${host}/collab?user=${user}`;
}

function markCursors(text: string, cursors: { user: number; index: number }[]): string {
  // Render as text with inline badges; escape first, then splice markers.
  const escape = (s: string) =>
    s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
  const byIndex = [...cursors].sort((a, b) => b.index - a.index);
  let out = escape(text);
  for (const cursor of byIndex) {
    const chars = [...text];
    const before = escape(chars.slice(0, cursor.index).join(""));
    const after = escape(chars.slice(cursor.index).join(""));
    out =
      before +
      `<span class="remote-caret" style="border-color:${userColor(cursor.user)}"` +
      ` title="user ${cursor.user}"></span>` +
      after;
  }
  return out;
}

function main(): void {
  const doclets = docletsFromQuery();
  const user = 1 + Math.floor(Math.random() * (2 ** 31 - 2));
  const socket = new WebSocket(relayUrl(user));
  socket.binaryType = "arraybuffer";

  const root = document.getElementById("doclets")!;
  const status = document.getElementById("status")!;
  status.textContent = `user ${user}, connecting...`;

  socket.addEventListener("open", () => {
    status.textContent = `user ${user}, connected (1 socket, ${doclets.length} doclets)`;
    const client = new DocletClient({
      user,
      doclets,
      send: (data) => socket.send(data),
    });
    socket.addEventListener("message", (event) => {
      client.onMessage(new Uint8Array(event.data as ArrayBuffer));
    });

    const editors = new Map<string, HTMLTextAreaElement>();
    const statics = new Map<string, HTMLElement>();

    const render = (doclet: string) => {
      const view = client.view(doclet);
      const editor = editors.get(doclet)!;
      const staticBlock = statics.get(doclet)!;
      const isActive = view.mode === "active";
      editor.hidden = !isActive;
      staticBlock.hidden = isActive;
      if (isActive) {
        const caret = view.caretIndex();
        if (editor.value !== view.text()) editor.value = view.text();
        if (document.activeElement === editor) {
          editor.setSelectionRange(caret, caret);
        }
      } else {
        staticBlock.innerHTML = markCursors(view.text(), client.remoteCursors(doclet));
      }
      const badges = client
        .remoteCursors(doclet)
        .map(
          (c) =>
            `<span class="badge" style="background:${userColor(c.user)}">` +
            `${c.user}@${c.index}</span>`
        )
        .join(" ");
      document.getElementById(`cursors-${doclet}`)!.innerHTML = badges;
    };

    for (const doclet of doclets) {
      const section = document.createElement("section");
      section.className = "doclet";
      section.innerHTML =
        `<header><strong>${doclet}</strong> <span id="cursors-${doclet}"></span></header>`;
      const editor = document.createElement("textarea");
      editor.rows = 4;
      const staticBlock = document.createElement("div");
      staticBlock.className = "static-text";
      section.append(editor, staticBlock);
      root.append(section);
      editors.set(doclet, editor);
      statics.set(doclet, staticBlock);

      const activateHere = () => {
        client.activate(doclet, editor.hidden ? undefined : editor.selectionStart);
        doclets.forEach(render);
        if (!editor.hidden) editor.focus();
      };
      section.addEventListener("click", activateHere);
      editor.addEventListener("click", () => {
        client.activate(doclet, editor.selectionStart);
      });
      editor.addEventListener("keydown", (event) => {
        if (event.key === "Backspace" || [...event.key].length === 1) {
          event.preventDefault();
          client.activate(doclet, editor.selectionStart);
          client.keystroke(doclet, event.key);
          render(doclet);
        }
      });
    }

    client.onChange(render);
    doclets.forEach(render);
    setInterval(() => client.tick(), 250);
    setInterval(() => doclets.forEach(render), 1000); // TTL sweep for cursors
  });

  socket.addEventListener("close", () => {
    status.textContent = `user ${user}, disconnected`;
  });
}

main();
