import { describe, expect, it, vi } from "vitest";

import { feedSseBuffer, openEventStream } from "../src/sse.js";
import type { StreamEvent, StreamStatus } from "../src/types.js";

describe("feedSseBuffer", () => {
  it("emits one payload per double-newline frame", () => {
    const seen: string[] = [];
    const rest = feedSseBuffer("", 'data: {"a":1}\n\ndata: {"b":2}\n\n', (d) =>
      seen.push(d),
    );
    expect(seen).toEqual(['{"a":1}', '{"b":2}']);
    expect(rest).toBe("");
  });

  it("carries a partial frame across chunks", () => {
    const seen: string[] = [];
    let buffer = feedSseBuffer("", 'data: {"a"', (d) => seen.push(d));
    expect(seen).toEqual([]);
    buffer = feedSseBuffer(buffer, ":1}\n\n", (d) => seen.push(d));
    expect(seen).toEqual(['{"a":1}']);
    expect(buffer).toBe("");
  });

  it("ignores comment keep-alives", () => {
    const seen: string[] = [];
    feedSseBuffer("", ": stream open\n\n: keep-alive\n\ndata: {}\n\n", (d) =>
      seen.push(d),
    );
    expect(seen).toEqual(["{}"]);
  });

  it("joins multiple data lines in one frame", () => {
    const seen: string[] = [];
    feedSseBuffer("", "data: line1\ndata: line2\n\n", (d) => seen.push(d));
    expect(seen).toEqual(["line1\nline2"]);
  });

  it("normalizes CRLF framing", () => {
    const seen: string[] = [];
    feedSseBuffer("", 'data: {"x":9}\r\n\r\n', (d) => seen.push(d));
    expect(seen).toEqual(['{"x":9}']);
  });
});

function streamResponse(frames: string[]): Response {
  const encoder = new TextEncoder();
  const body = new ReadableStream<Uint8Array>({
    start(controller) {
      for (const frame of frames) controller.enqueue(encoder.encode(frame));
      controller.close();
    },
  });
  return new Response(body, { status: 200 });
}

describe("openEventStream", () => {
  it("parses events and reconnects when the stream ends", async () => {
    vi.useFakeTimers();
    const calls: string[] = [];
    const fetchFn = vi
      .fn()
      .mockImplementationOnce(async () => {
        calls.push("first");
        return streamResponse(['data: {"type":"queue_changed"}\n\n']);
      })
      .mockImplementationOnce(async () => {
        calls.push("second");
        return streamResponse([]);
      })
      .mockImplementation(async () => new Response(null, { status: 503 }));

    const events: StreamEvent[] = [];
    const statuses: StreamStatus[] = [];
    const close = openEventStream(
      "http://example.test/events",
      { onEvent: (e) => events.push(e), onStatus: (s) => statuses.push(s) },
      { retryMs: 10, fetchFn: fetchFn as unknown as typeof fetch },
    );

    await vi.waitFor(() => expect(events).toHaveLength(1));
    expect(events[0]).toEqual({ type: "queue_changed" });
    expect(statuses).toContain("live");

    // First stream has ended; the client schedules a retry.
    await vi.waitFor(() => expect(statuses).toContain("down"));
    await vi.advanceTimersByTimeAsync(10);
    expect(calls).toEqual(["first", "second"]);

    close();
    vi.useRealTimers();
  });

  it("stops all callbacks after close", async () => {
    vi.useFakeTimers();
    const statuses: StreamStatus[] = [];
    const fetchFn = vi.fn(async () => new Response(null, { status: 503 }));
    const close = openEventStream(
      "http://example.test/events",
      { onEvent: () => {}, onStatus: (s) => statuses.push(s) },
      { retryMs: 10, fetchFn: fetchFn as unknown as typeof fetch },
    );
    await vi.waitFor(() => expect(statuses).toContain("down"));
    close();
    // waitFor may have advanced through retries already; what matters is
    // that close freezes everything from this point on.
    const statusesAtClose = statuses.length;
    const fetchesAtClose = fetchFn.mock.calls.length;
    await vi.advanceTimersByTimeAsync(1000);
    expect(statuses.length).toBe(statusesAtClose);
    expect(fetchFn.mock.calls.length).toBe(fetchesAtClose);
    vi.useRealTimers();
  });
});
