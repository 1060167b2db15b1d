/**
 * Session client: snapshot load, live event subscription, corrections.
 *
 * The WebSocket implementation and fetch are injectable so the client
 * runs both in the browser and under Node tests. On disconnect the
 * client re-syncs from a fresh snapshot and resubscribes from the next
 * unseen logical index, so rows are never duplicated or dropped.
 */

import type { EventFrame, Snapshot } from "./types.js";
import {
  applyEvent,
  ensureWakeWord,
  fromSnapshot,
  initialState,
  type ViewState,
} from "./viewmodel.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export interface ClientOptions {
  socketFactory?: (url: string) => SocketLike;
  fetchImpl?: typeof fetch;
  reconnectDelayMs?: number;
  onChange?: (state: ViewState) => void;
}

export class SessionClient {
  state: ViewState = initialState();

  private socket: SocketLike | null = null;
  private closed = false;
  private readonly socketFactory: (url: string) => SocketLike;
  private readonly fetchImpl: typeof fetch;
  private readonly reconnectDelayMs: number;
  private readonly onChange: (state: ViewState) => void;

  constructor(
    readonly baseUrl: string,
    readonly sessionId: string,
    opts: ClientOptions = {},
  ) {
    this.socketFactory =
      opts.socketFactory ?? ((url) => new WebSocket(url) as unknown as SocketLike);
    this.fetchImpl = opts.fetchImpl ?? fetch.bind(globalThis);
    this.reconnectDelayMs = opts.reconnectDelayMs ?? 500;
    this.onChange = opts.onChange ?? (() => {});
  }

  private update(state: ViewState): void {
    this.state = state;
    this.onChange(state);
  }

  private wsUrl(fromIndex: number): string {
    const ws = this.baseUrl.replace(/^http/, "ws");
    return `${ws}/sessions/${this.sessionId}/events?from_index=${fromIndex}`;
  }

  async connect(): Promise<void> {
    this.closed = false;
    this.update({ ...this.state, connection: "connecting" });
    const resp = await this.fetchImpl(
      `${this.baseUrl}/sessions/${this.sessionId}/snapshot`,
    );
    if (!resp.ok) {
      throw new Error(`snapshot failed: HTTP ${resp.status}`);
    }
    const snap = (await resp.json()) as Snapshot;
    this.update(fromSnapshot(snap, "live"));
    await this.subscribe(snap.last_logical_index + 1);
  }

  private subscribe(fromIndex: number): Promise<void> {
    const socket = this.socketFactory(this.wsUrl(fromIndex));
    this.socket = socket;
    socket.onmessage = (ev) => {
      const frame = JSON.parse(String(ev.data)) as EventFrame;
      this.update(applyEvent(this.state, frame));
    };
    socket.onclose = () => {
      if (this.closed) {
        return;
      }
      this.update({ ...this.state, connection: "reconnecting" });
      setTimeout(() => {
        if (!this.closed) {
          this.connect().catch(() => this.scheduleRetry());
        }
      }, this.reconnectDelayMs);
    };
    return new Promise((resolve, reject) => {
      socket.onopen = () => resolve();
      socket.onerror = (err) => reject(err ?? new Error("socket error"));
    });
  }

  private scheduleRetry(): void {
    if (this.closed) {
      return;
    }
    setTimeout(() => {
      if (!this.closed) {
        this.connect().catch(() => this.scheduleRetry());
      }
    }, this.reconnectDelayMs);
  }

  /** Send a correction; the wake word is prefixed when absent. */
  submitCorrection(text: string): string {
    if (!this.socket) {
      throw new Error("not connected");
    }
    const message = ensureWakeWord(text);
    this.socket.send(JSON.stringify({ type: "correction", text: message }));
    return message;
  }

  close(): void {
    this.closed = true;
    this.update({ ...this.state, connection: "closed" });
    this.socket?.close();
    this.socket = null;
  }
}

export async function openDemoSession(
  baseUrl: string,
  fetchImpl: typeof fetch = fetch.bind(globalThis),
): Promise<string> {
  const resp = await fetchImpl(`${baseUrl}/sessions`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({
      config: { summary_interval: 4, display_mode: "summary" },
      seeds: [
        { speaker: "A", embedding: [1, 0] },
        { speaker: "B", embedding: [0, 1] },
      ],
      gateway: { kind: "rule" },
      toggles: { swm: false, oe: true, corrections: true },
    }),
  });
  if (!resp.ok) {
    throw new Error(`session create failed: HTTP ${resp.status}`);
  }
  const body = (await resp.json()) as { session_id: string };
  return body.session_id;
}
