import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { ConsoleClient, SocketLike } from "../src/client.js";
import { Envelope } from "../src/protocol.js";

class FakeSocket implements SocketLike {
  sent: string[] = [];
  onopen: (() => void) | null = null;
  onmessage: ((ev: { data: string }) => void) | null = null;
  onclose: (() => void) | null = null;
  closed = false;

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.closed = true;
    this.onclose?.();
  }

  // test helpers
  open(): void {
    this.onopen?.();
  }

  deliver(env: Partial<Envelope>): void {
    this.onmessage?.({ data: JSON.stringify({ seq: 1, wall_ts: 0, sim_ts: 0,
                                              retain: false, payload: {}, ...env }) });
  }

  dropFromServer(): void {
    this.onclose?.();
  }
}

function harness(filters = ["data/#", "notif/#"]) {
  const sockets: FakeSocket[] = [];
  const log: string[] = [];
  const envelopes: Envelope[] = [];
  const client = new ConsoleClient(
    "ws://test/ws?token=x",
    {
      onResync: () => log.push("resync"),
      onEnvelope: (env) => {
        log.push(`env:${env.topic}`);
        envelopes.push(env);
      },
      onStatus: (s) => log.push(`status:${s.split(" ")[0]}`),
      onError: (text) => log.push(`error:${text}`),
    },
    () => {
      const s = new FakeSocket();
      sockets.push(s);
      return s;
    },
    filters,
  );
  return { client, sockets, log, envelopes };
}

describe("ConsoleClient", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("subscribes to its filters as soon as the socket opens", () => {
    const { client, sockets } = harness();
    client.connect();
    sockets[0].open();
    expect(sockets[0].sent.map((t) => JSON.parse(t))).toEqual([
      { op: "sub", filter: "data/#" },
      { op: "sub", filter: "notif/#" },
    ]);
  });

  it("clears the display before any retained envelope arrives", () => {
    const { client, sockets, log } = harness();
    client.connect();
    sockets[0].open();
    sockets[0].deliver({ topic: "data/bus/all", retain: true });
    const resyncAt = log.indexOf("resync");
    const firstEnv = log.findIndex((l) => l.startsWith("env:"));
    expect(resyncAt).toBeGreaterThanOrEqual(0);
    expect(resyncAt).toBeLessThan(firstEnv);
  });

  it("reconnects with exponential backoff and resyncs", () => {
    const { client, sockets, log } = harness();
    client.connect();
    sockets[0].open();
    sockets[0].dropFromServer();
    expect(sockets.length).toBe(1);
    vi.advanceTimersByTime(500);
    expect(sockets.length).toBe(2);
    sockets[1].dropFromServer();
    vi.advanceTimersByTime(500);
    expect(sockets.length).toBe(2); // backoff doubled, not due yet
    vi.advanceTimersByTime(500);
    expect(sockets.length).toBe(3);
    sockets[2].open();
    // resync fires per successful open: sockets[0] and sockets[2]
    expect(log.filter((l) => l === "resync").length).toBe(2);
    // a successful connection resets the backoff
    sockets[2].dropFromServer();
    vi.advanceTimersByTime(500);
    expect(sockets.length).toBe(4);
  });

  it("never mixes stale envelopes from a dead socket with the fresh stream", () => {
    const { client, sockets, envelopes } = harness();
    client.connect();
    sockets[0].open();
    sockets[0].dropFromServer();
    vi.advanceTimersByTime(500);
    sockets[1].open();
    sockets[1].deliver({ topic: "data/fresh", retain: true });
    // the zombie socket flushes an old frame after the replacement is live:
    // it must be dropped, not interleaved
    sockets[0].deliver({ topic: "data/stale", retain: true });
    expect(envelopes.map((e) => e.topic)).toEqual(["data/fresh"]);
  });

  it("routes error frames to onError, not onEnvelope", () => {
    const { client, sockets, log, envelopes } = harness();
    client.connect();
    sockets[0].open();
    sockets[0].onmessage?.({ data: JSON.stringify({ error: "bad filter" }) });
    expect(envelopes).toEqual([]);
    expect(log).toContain("error:bad filter");
  });

  it("sends commands as command-topic envelopes", () => {
    const { client, sockets } = harness();
    client.connect();
    sockets[0].open();
    client.issueCommand({ kind: "SetGenMW", target: 3, value: 42 });
    const last = JSON.parse(sockets[0].sent.at(-1)!);
    expect(last).toEqual({
      topic: "command/action",
      payload: { kind: "SetGenMW", target: 3, value: 42 },
    });
  });

  it("stops reconnecting after an explicit disconnect", () => {
    const { client, sockets } = harness();
    client.connect();
    sockets[0].open();
    client.disconnect();
    vi.advanceTimersByTime(60_000);
    expect(sockets.length).toBe(1);
  });
});
