/** Shared test scaffolding: envelope builders, a scriptable EventSource,
 * and a canned fetch. */

import {
  OutcomeJson,
  SceneJson,
  SessionEvent,
} from "../src/types.js";
import { EventSourceLike } from "../src/client.js";

let counter = 0;

export function resetSeq(): void {
  counter = 0;
}

type Payload<K extends SessionEvent["kind"]> = Extract<SessionEvent, { kind: K }>["payload"];

export function envelope<K extends SessionEvent["kind"]>(
  kind: K,
  payload: Payload<K>,
  seq?: number,
): SessionEvent {
  counter = seq ?? counter + 1;
  return {
    session: "default",
    seq: counter,
    kind,
    ts: 1700000000 + counter,
    payload,
    digest: `d${counter}`,
  } as SessionEvent;
}

export function sampleScene(seed = 3): SceneJson {
  return {
    objects: [
      {
        id: "obj-1",
        class: "banana",
        center: [-120, -80],
        radius: 35,
        color: [220, 200, 60],
        hardness: 63.0,
      },
      {
        id: "obj-2",
        class: "lemon",
        center: [140, 60],
        radius: 28,
        color: [230, 220, 80],
        hardness: 66.0,
      },
    ],
    workspace: [
      [-300, 300],
      [-200, 200],
    ],
    seed,
  };
}

export function outcome(overrides: Partial<OutcomeJson> = {}): OutcomeJson {
  return {
    object_id: "obj-1",
    label: "banana",
    grounded: true,
    localized: true,
    measured: true,
    communicated: true,
    centroid_error_mm: 2.1,
    hardness_true: 63.0,
    hardness_pred: 62.4,
    position: [-120, -80],
    succeeded: true,
    ...overrides,
  };
}

/** A full successful single-object run: accepted, six stages, explanation,
 * one object result, finished. */
export function sampleRun(runId = "run-0001", query = "how hard is the banana?"): SessionEvent[] {
  const stages = [
    "parse",
    "detect",
    "centroid",
    "tactile-collection",
    "inference",
    "explanation",
  ];
  const events: SessionEvent[] = [envelope("run-accepted", { run_id: runId, text: query })];
  let t = 0;
  for (const stage of stages) {
    events.push(envelope("stage-started", { stage, t_ms: t }));
    t += 10;
    events.push(envelope("stage-finished", { stage, duration_ms: 10, t_ms: t }));
  }
  events.push(envelope("explanation", { text: "The banana at front-left measures 62.4 HA, so it is ripe.", t_ms: t }));
  events.push(envelope("object-result", { object: outcome(), t_ms: t }));
  events.push(envelope("run-finished", { run_id: runId, digest: "abc" }));
  return events;
}

type Listener = (event: { data?: string }) => void;

export class FakeEventSource implements EventSourceLike {
  static instances: FakeEventSource[] = [];
  listeners = new Map<string, Listener[]>();
  closed = false;

  constructor(public url: string) {
    FakeEventSource.instances.push(this);
  }

  static reset(): void {
    FakeEventSource.instances = [];
  }

  static latest(): FakeEventSource {
    const source = FakeEventSource.instances[FakeEventSource.instances.length - 1];
    if (!source) throw new Error("no EventSource created yet");
    return source;
  }

  addEventListener(type: string, listener: Listener): void {
    const existing = this.listeners.get(type) ?? [];
    existing.push(listener);
    this.listeners.set(type, existing);
  }

  close(): void {
    this.closed = true;
  }

  fire(type: string, data?: string): void {
    for (const listener of this.listeners.get(type) ?? []) listener({ data });
  }

  open(): void {
    this.fire("open");
  }

  error(): void {
    this.fire("error");
  }

  deliver(event: SessionEvent): void {
    this.fire(event.kind, JSON.stringify(event));
  }
}

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}
