/** DOM layer: renders a ViewState and wires the correction form. */

import { openDemoSession, SessionClient } from "./client.js";
import { ensureWakeWord, type ViewState } from "./viewmodel.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function escapeHtml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;");
}

function render(state: ViewState): void {
  const status = el<HTMLSpanElement>("status");
  status.textContent = state.connection;
  status.className = `status status-${state.connection}`;

  const inWindow = new Set(state.summary?.segmentIds ?? []);
  el<HTMLTableSectionElement>("rows").innerHTML = state.rows
    .map((row) => {
      const classes = [
        row.revised ? "revised" : "",
        inWindow.has(row.segmentId) ? "in-window" : "",
      ]
        .filter(Boolean)
        .join(" ");
      const badge = row.revised ? ' <span class="badge">revised</span>' : "";
      const parent = row.parentId ? ` <span class="parent">&larr; ${escapeHtml(row.parentId)}</span>` : "";
      return (
        `<tr class="${classes}" data-id="${escapeHtml(row.segmentId)}">` +
        `<td class="speaker">${escapeHtml(row.speaker ?? "?")}</td>` +
        `<td>${escapeHtml(row.text)}${badge}${parent}</td>` +
        `<td class="time">${row.tStart.toFixed(1)}&ndash;${row.tEnd.toFixed(1)}</td></tr>`
      );
    })
    .join("");

  const summary = el<HTMLDivElement>("summary");
  if (state.summary) {
    summary.innerHTML =
      `<div class="summary-head">${escapeHtml(state.summary.mode)}` +
      ` &middot; ${state.summary.wordCount} words` +
      (state.summary.degraded ? " &middot; degraded" : "") +
      `</div><pre>${escapeHtml(state.summary.text)}</pre>`;
  } else {
    summary.innerHTML = '<div class="summary-head">no summary yet</div>';
  }

  el<HTMLSpanElement>("corrections").textContent =
    `${state.correctionsUsed} / ${state.correctionLimit}` +
    (state.limitReached ? " (limit reached)" : "");
  el<HTMLDivElement>("enrollments").textContent = Object.entries(state.enrollments)
    .map(([spk, n]) => `${spk}: ${n}`)
    .join("   ");
  el<HTMLDivElement>("notice").textContent = state.notice
    ? state.notice.text
    : "";

  const scroller = el<HTMLDivElement>("transcript");
  scroller.scrollTop = scroller.scrollHeight;
}

let client: SessionClient | null = null;

async function connectClicked(): Promise<void> {
  const baseUrl = el<HTMLInputElement>("base-url").value.replace(/\/$/, "");
  let sessionId = el<HTMLInputElement>("session-id").value.trim();
  if (!sessionId) {
    sessionId = await openDemoSession(baseUrl);
    el<HTMLInputElement>("session-id").value = sessionId;
  }
  client?.close();
  client = new SessionClient(baseUrl, sessionId, { onChange: render });
  await client.connect();
}

function wireForm(): void {
  const input = el<HTMLInputElement>("correction-input");
  const send = el<HTMLButtonElement>("send");
  const preview = el<HTMLDivElement>("wake-preview");
  const sync = () => {
    send.disabled = input.value.trim().length === 0 || client === null;
    preview.textContent = input.value.trim()
      ? ensureWakeWord(input.value)
      : "";
  };
  input.addEventListener("input", sync);
  send.addEventListener("click", () => {
    if (client && input.value.trim()) {
      client.submitCorrection(input.value);
      input.value = "";
      sync();
    }
  });
  input.addEventListener("keydown", (ev) => {
    if (ev.key === "Enter" && !send.disabled) {
      send.click();
    }
  });
  el<HTMLButtonElement>("connect").addEventListener("click", () => {
    connectClicked().catch((err) => {
      el<HTMLDivElement>("notice").textContent = String(err);
    });
  });
  sync();
}

wireForm();
