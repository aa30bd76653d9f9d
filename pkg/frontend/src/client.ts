/** Reconnecting gateway client.
 *
 * Connection lifecycle: open -> subscribe (data/#, notif/#) -> retained
 * snapshot streams in -> live envelopes follow. On any disconnect the
 * client backs off exponentially and, before re-subscribing, asks the
 * consumer to clear its state so stale and fresh envelopes can never
 * interleave: resync is always clear, then retained, then live.
 */

import { CommandPayload, Envelope, commandFrame, parseEnvelope, subscribeFrame } from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  onclose: (() => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ClientEvents {
  onEnvelope: (env: Envelope) => void;
  onResync: () => void;            // clear displays before retained arrives
  onStatus?: (status: string) => void;
  onError?: (text: string) => void;
}

const BACKOFF_START_MS = 500;
const BACKOFF_CAP_MS = 30_000;

export class ConsoleClient {
  private socket: SocketLike | null = null;
  private backoff = BACKOFF_START_MS;
  private closed = false;
  private timer: ReturnType<typeof setTimeout> | null = null;
  readonly filters: string[];

  constructor(
    private url: string,
    private events: ClientEvents,
    private factory: SocketFactory,
    filters: string[] = ["data/#", "notif/#"],
  ) {
    this.filters = filters;
  }

  connect(): void {
    if (this.closed) return;
    this.events.onStatus?.("connecting");
    const sock = this.factory(this.url);
    this.socket = sock;
    sock.onopen = () => {
      this.backoff = BACKOFF_START_MS;
      // wipe first: everything on screen will be rebuilt from retained state
      this.events.onResync();
      for (const f of this.filters) sock.send(subscribeFrame(f));
      this.events.onStatus?.("live");
    };
    sock.onmessage = (ev) => {
      if (this.socket !== sock) return; // zombie socket: stale frames must not interleave
      const env = parseEnvelope(ev.data);
      if (env === null) {
        try {
          const doc = JSON.parse(ev.data);
          if (doc && doc.error) this.events.onError?.(String(doc.error));
        } catch {
          /* not json at all: drop */
        }
        return;
      }
      this.events.onEnvelope(env);
    };
    sock.onclose = () => {
      if (this.socket !== sock) return;
      this.socket = null;
      if (this.closed) return;
      this.events.onStatus?.(`reconnecting in ${this.backoff} ms`);
      this.timer = setTimeout(() => this.connect(), this.backoff);
      this.backoff = Math.min(this.backoff * 2, BACKOFF_CAP_MS);
    };
  }

  /** Publish one operator command; the display is only allowed to change
   *  when the engine's next data envelopes come back. */
  issueCommand(payload: CommandPayload): boolean {
    if (!this.socket) return false;
    this.socket.send(commandFrame(payload));
    return true;
  }

  sendRaw(frame: object): boolean {
    if (!this.socket) return false;
    this.socket.send(JSON.stringify(frame));
    return true;
  }

  disconnect(): void {
    this.closed = true;
    if (this.timer) clearTimeout(this.timer);
    this.socket?.close();
    this.socket = null;
  }

  /** Drop the transport without marking the client closed (tests, chaos). */
  dropConnection(): void {
    this.socket?.close();
  }

  get connected(): boolean {
    return this.socket !== null;
  }
}
