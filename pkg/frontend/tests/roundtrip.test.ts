/** Round-trip against a captured service session.
 *
 * fixtures/session.json is a real event log recorded from the HTTP service
 * running a trained checkpoint (scripts/export_ui_fixture.py in the parent
 * repo). The example prompt must render result cards, a complete six-stage
 * timeline, and the final explanation; replaying the log after a forced
 * disconnect must reconstruct the identical view.
 */

import { readFileSync } from "node:fs";
import { resolve } from "node:path";
import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { App } from "../src/app.js";
import { Api, EventStream } from "../src/client.js";
import { projectState } from "../src/reducer.js";
import { SessionEvent, STAGES } from "../src/types.js";
import { renderView } from "../src/view.js";
import { FakeEventSource, jsonResponse } from "./helpers.js";

interface Fixture {
  seed: number;
  scene_response: { scene: unknown; image_png_base64: string };
  sse_events: { id: string; event: string; data: SessionEvent }[];
}

const fixture: Fixture = JSON.parse(
  readFileSync(resolve(process.cwd(), "fixtures/session.json"), "utf8"),
);
const events: SessionEvent[] = fixture.sse_events.map((e) => e.data);

const EXAMPLE_PROMPT = "How ripe are the banana and the lemon?";

function makeApp(): { app: App; root: HTMLElement } {
  const root = document.createElement("div");
  document.body.appendChild(root);
  const fetchFn = async (url: string): Promise<Response> => {
    if (url.includes("/v1/scene")) {
      return jsonResponse({
        session: "default",
        scene: fixture.scene_response.scene,
        image_png_base64: fixture.scene_response.image_png_base64,
      });
    }
    throw new Error(`unexpected fetch ${url}`);
  };
  const app = new App(root, new Api("http://api", "default", fetchFn));
  return { app, root };
}

function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}

beforeEach(() => {
  FakeEventSource.reset();
});

afterEach(() => {
  document.body.innerHTML = "";
  vi.useRealTimers();
});

describe("captured session", () => {
  it("is a real log: strictly increasing seqs, example prompt, both runs finish", () => {
    const seqs = events.map((e) => e.seq);
    for (let i = 1; i < seqs.length; i++) expect(seqs[i]).toBeGreaterThan(seqs[i - 1] ?? 0);
    const accepted = events.filter((e) => e.kind === "run-accepted");
    expect(accepted[0]?.payload).toMatchObject({ text: EXAMPLE_PROMPT });
    expect(events.filter((e) => e.kind === "run-finished")).toHaveLength(accepted.length);
  });

  it("renders at least one result card, a complete timeline, and the explanation", async () => {
    const { app, root } = makeApp();
    for (const event of events) app.handleEvent(event);
    await flush();

    const firstTurn = root.querySelector(".turn");
    expect(firstTurn?.querySelector(".query")?.textContent).toBe(EXAMPLE_PROMPT);

    const cards = firstTurn?.querySelectorAll(".card") ?? [];
    expect(cards.length).toBeGreaterThanOrEqual(1);

    const stages = [...(firstTurn?.querySelectorAll(".timeline .stage") ?? [])];
    expect(stages.map((s) => s.getAttribute("data-stage"))).toEqual([...STAGES]);
    expect(stages.every((s) => s.classList.contains("done"))).toBe(true);

    expect(firstTurn?.querySelector(".explanation")?.textContent).toContain("banana");
    expect(firstTurn?.querySelector(".explanation")?.textContent).toContain("lemon");

    // ripeness words on the cards agree with the explanation sentences
    for (const card of cards) {
      const label = card.querySelector(".label")?.textContent ?? "";
      const ripe = card.querySelector(".ripeness")?.textContent ?? "";
      if (ripe) {
        expect(firstTurn?.querySelector(".explanation")?.textContent).toContain(
          `The ${label} at ${card.querySelector(".location")?.textContent} measures`,
        );
      }
    }
  });

  it("absent-class query yields an explanation and zero cards", async () => {
    const { app, root } = makeApp();
    for (const event of events) app.handleEvent(event);
    await flush();

    const turns = root.querySelectorAll(".turn");
    expect(turns).toHaveLength(2);
    const second = turns[1];
    expect(second?.querySelector(".explanation")?.textContent).toContain("No tomato was found");
    expect(second?.querySelectorAll(".card")).toHaveLength(0);
  });

  it("reconstructs the identical view after a forced disconnect", async () => {
    vi.useFakeTimers();
    const { app, root } = makeApp();
    const stream = new EventStream(
      "http://api",
      "default",
      {
        onEvent: (e) => app.handleEvent(e),
        onStatus: (s) => app.setStatus(s),
      },
      (url) => new FakeEventSource(url),
      100,
    );
    stream.start();

    const first = FakeEventSource.latest();
    first.open();
    const cut = 15; // mid-run: explanation delivered, object results not yet
    for (const event of events.slice(0, cut)) first.deliver(event);

    // forced disconnect
    first.error();
    expect((root.querySelector(".banner") as HTMLElement).hidden).toBe(false);

    await vi.advanceTimersByTimeAsync(100);
    const second = FakeEventSource.latest();
    expect(second).not.toBe(first);
    expect(second.url).toContain(`last_event_id=${events[cut - 1]?.seq}`);

    second.open();
    expect((root.querySelector(".banner") as HTMLElement).hidden).toBe(true);
    // server replays a little overlap; dedup by seq must absorb it
    for (const event of events.slice(cut - 3)) second.deliver(event);
    vi.useRealTimers();
    await flush();
    const reconnectedHtml = (root.querySelector("#view") as HTMLElement).innerHTML;

    // single uninterrupted pass over the same log
    const { app: reference, root: referenceRoot } = makeApp();
    for (const event of events) reference.handleEvent(event);
    await flush();
    const referenceHtml = (referenceRoot.querySelector("#view") as HTMLElement).innerHTML;

    expect(reconnectedHtml).toBe(referenceHtml);
    expect(app.renderSnapshot()).toBe(reference.renderSnapshot());
  });

  it("projected state is invariant to any disconnect point", () => {
    const full = projectState(events);
    for (let cut = 1; cut < events.length; cut++) {
      const overlap = Math.max(0, cut - 2);
      const replayed = projectState([...events.slice(0, cut), ...events.slice(overlap)]);
      expect(replayed).toEqual(full);
    }
    expect(renderView(projectState([...events].reverse()), null)).toBe(
      renderView(full, null),
    );
  });
});
