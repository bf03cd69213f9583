import type { StreamEvent, StreamStatus } from "./types.js";

export interface StreamHandlers {
  onEvent: (event: StreamEvent) => void;
  onStatus: (status: StreamStatus) => void;
}

export interface StreamOptions {
  /** First reconnect delay; doubles per failure up to maxRetryMs. */
  retryMs?: number;
  maxRetryMs?: number;
  fetchFn?: typeof fetch;
}

/**
 * Parses one chunk of a server-sent-event byte stream.
 *
 * Carries partial frames between calls in `buffer`; returns the leftover
 * to feed back in. Comment lines (keep-alives) are dropped, multi `data:`
 * lines within a frame are joined per the SSE framing rules.
 */
export function feedSseBuffer(
  buffer: string,
  chunk: string,
  emit: (data: string) => void,
): string {
  let pending = buffer + chunk.replace(/\r\n/g, "\n");
  let cut: number;
  while ((cut = pending.indexOf("\n\n")) >= 0) {
    const frame = pending.slice(0, cut);
    pending = pending.slice(cut + 2);
    const dataLines: string[] = [];
    for (const line of frame.split("\n")) {
      if (line.startsWith("data:")) {
        dataLines.push(line.slice(5).replace(/^ /, ""));
      }
    }
    if (dataLines.length > 0) {
      emit(dataLines.join("\n"));
    }
  }
  return pending;
}

/**
 * Live event subscription over a streaming fetch, with reconnect.
 *
 * Implemented on fetch rather than EventSource so the same code runs in the
 * browser and under node-driven tests. Returns a close function; after close
 * no further callbacks fire.
 */
export function openEventStream(
  url: string,
  handlers: StreamHandlers,
  options: StreamOptions = {},
): () => void {
  const fetchFn = options.fetchFn ?? fetch;
  const baseRetryMs = options.retryMs ?? 1000;
  const maxRetryMs = options.maxRetryMs ?? 15000;
  let retryMs = baseRetryMs;
  let closed = false;
  let timer: ReturnType<typeof setTimeout> | undefined;
  let controller: AbortController | undefined;

  const scheduleReconnect = () => {
    if (closed) return;
    handlers.onStatus("down");
    timer = setTimeout(connect, retryMs);
    retryMs = Math.min(retryMs * 2, maxRetryMs);
  };

  const connect = async () => {
    if (closed) return;
    handlers.onStatus("connecting");
    controller = new AbortController();
    try {
      const response = await fetchFn(url, {
        signal: controller.signal,
        headers: { Accept: "text/event-stream" },
      });
      if (response.status !== 200 || response.body === null) {
        scheduleReconnect();
        return;
      }
      handlers.onStatus("live");
      retryMs = baseRetryMs;
      const reader = response.body.getReader();
      const decoder = new TextDecoder();
      let buffer = "";
      for (;;) {
        const { done, value } = await reader.read();
        if (closed) return;
        if (done) break;
        buffer = feedSseBuffer(buffer, decoder.decode(value, { stream: true }), (data) => {
          try {
            handlers.onEvent(JSON.parse(data) as StreamEvent);
          } catch {
            // Malformed frame: drop it, the stream itself is still healthy.
          }
        });
      }
    } catch {
      // Aborts land here too; closed guards the callback below.
    }
    scheduleReconnect();
  };

  void connect();
  return () => {
    closed = true;
    if (timer !== undefined) clearTimeout(timer);
    controller?.abort();
  };
}
