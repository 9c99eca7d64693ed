/** Thin client for the /v1 contract.
 *
 * Only two calls mutate server state: POST /v1/query and
 * POST /v1/scene/randomize. Everything else is reads plus the SSE stream.
 * The stream wrapper owns reconnection: on error it closes the source and
 * reopens with `last_event_id`, so no event is lost and duplicates are
 * handled downstream by seq dedup.
 */

import { EVENT_KINDS, QueryResponse, SceneResponse, SessionEvent } from "./types.js";

export class HttpError extends Error {
  constructor(
    public status: number,
    public body: unknown,
  ) {
    super(`HTTP ${status}`);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function request<T>(fetchFn: FetchLike, url: string, init?: RequestInit): Promise<T> {
  const response = await fetchFn(url, init);
  const body = await response.json().catch(() => null);
  if (!response.ok) throw new HttpError(response.status, body);
  return body as T;
}

export class Api {
  constructor(
    public readonly base: string,
    private readonly session: string = "default",
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  scene(): Promise<SceneResponse> {
    return request(this.fetchFn, `${this.base}/v1/scene?session=${this.session}`);
  }

  randomizeScene(options: { seed?: number; n?: number } = {}): Promise<SceneResponse> {
    return request(this.fetchFn, `${this.base}/v1/scene/randomize?session=${this.session}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(options),
    });
  }

  query(text: string): Promise<QueryResponse> {
    return request(this.fetchFn, `${this.base}/v1/query?session=${this.session}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ text }),
    });
  }
}

export type StreamStatus = "connecting" | "live" | "degraded";

/** Structural subset of EventSource so tests can inject a fake. */
export interface EventSourceLike {
  addEventListener(type: string, listener: (event: { data?: string }) => void): void;
  close(): void;
}

export type EventSourceFactory = (url: string) => EventSourceLike;

export interface StreamHandlers {
  onEvent(event: SessionEvent): void;
  onStatus(status: StreamStatus): void;
}

export class EventStream {
  lastEventId = 0;
  private source: EventSourceLike | null = null;
  private stopped = false;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly base: string,
    private readonly session: string,
    private readonly handlers: StreamHandlers,
    private readonly factory: EventSourceFactory,
    private readonly retryMs: number = 1000,
  ) {}

  start(): void {
    this.stopped = false;
    this.connect();
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = null;
    this.source?.close();
    this.source = null;
  }

  private connect(): void {
    this.handlers.onStatus("connecting");
    const url =
      `${this.base}/v1/events?session=${this.session}` +
      `&last_event_id=${this.lastEventId}`;
    const source = this.factory(url);
    this.source = source;

    source.addEventListener("open", () => this.handlers.onStatus("live"));
    source.addEventListener("error", () => {
      if (this.stopped) return;
      this.handlers.onStatus("degraded");
      source.close();
      if (this.source === source) this.source = null;
      this.timer = setTimeout(() => {
        if (!this.stopped) this.connect();
      }, this.retryMs);
    });
    for (const kind of EVENT_KINDS) {
      source.addEventListener(kind, (event) => {
        if (typeof event.data !== "string") return;
        const envelope = JSON.parse(event.data) as SessionEvent;
        if (envelope.seq > this.lastEventId) this.lastEventId = envelope.seq;
        this.handlers.onEvent(envelope);
      });
    }
  }
}
