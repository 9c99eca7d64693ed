import { beforeEach, describe, expect, it } from "vitest";

import { projectState, sortLog } from "../src/reducer.js";
import { STAGES } from "../src/types.js";
import { envelope, outcome, resetSeq, sampleRun, sampleScene } from "./helpers.js";

beforeEach(resetSeq);

describe("scene events", () => {
  it("sets the scene and seed", () => {
    const state = projectState([envelope("scene", { scene: sampleScene(), seed: 3 })]);
    expect(state.scene?.objects).toHaveLength(2);
    expect(state.sceneSeed).toBe(3);
    expect(state.sceneVersion).toBe(1);
  });

  it("later scene events replace earlier ones and bump the version", () => {
    const state = projectState([
      envelope("scene", { scene: sampleScene(3), seed: 3 }),
      envelope("scene", { scene: sampleScene(9), seed: 9 }),
    ]);
    expect(state.sceneSeed).toBe(9);
    expect(state.sceneVersion).toBe(2);
  });
});

describe("run lifecycle", () => {
  it("tracks stage progress through a full run", () => {
    const events = sampleRun();
    const midway = projectState(events.slice(0, 4));
    expect(midway.busy).toBe(true);
    expect(midway.turns[0]?.stages.find((s) => s.stage === "parse")?.status).toBe("done");
    expect(midway.turns[0]?.stages.find((s) => s.stage === "detect")?.status).toBe("running");
    expect(midway.turns[0]?.stages.find((s) => s.stage === "inference")?.status).toBe("pending");

    const done = projectState(events);
    expect(done.busy).toBe(false);
    expect(done.turns[0]?.finished).toBe(true);
    expect(done.turns[0]?.stages.every((s) => s.status === "done")).toBe(true);
    expect(done.turns[0]?.stages.map((s) => s.stage)).toEqual([...STAGES]);
    expect(done.turns[0]?.explanation).toContain("banana");
    expect(done.turns[0]?.cards).toHaveLength(1);
  });

  it("keeps busy until every accepted run has finished", () => {
    const events = [
      ...sampleRun("run-0001"),
      envelope("run-accepted", { run_id: "run-0002", text: "and the lemon?" }),
    ];
    expect(projectState(events).busy).toBe(true);
  });

  it("records durations from stage-finished payloads", () => {
    const state = projectState(sampleRun());
    for (const stage of state.turns[0]?.stages ?? []) {
      expect(stage.durationMs).toBe(10);
    }
  });

  it("handles a parse-failure turn: explanation, no cards", () => {
    const events = [
      envelope("run-accepted", { run_id: "run-0001", text: "gibberish" }),
      envelope("stage-started", { stage: "parse", t_ms: 0 }),
      envelope("stage-finished", { stage: "parse", duration_ms: 4, t_ms: 4 }),
      envelope("explanation", { text: 'I could not interpret the request "gibberish".', t_ms: 4 }),
      envelope("run-finished", { run_id: "run-0001", digest: "x" }),
    ];
    const state = projectState(events);
    expect(state.turns[0]?.cards).toHaveLength(0);
    expect(state.turns[0]?.explanation).toContain("could not interpret");
    expect(state.busy).toBe(false);
  });
});

describe("event-log discipline", () => {
  it("out-of-order delivery projects the same state as in-order", () => {
    const events = [envelope("scene", { scene: sampleScene(), seed: 3 }), ...sampleRun()];
    const shuffled = [...events].reverse();
    expect(projectState(shuffled)).toEqual(projectState(events));
  });

  it("duplicate seqs are dropped", () => {
    const events = sampleRun();
    const withDupes = [...events, ...events.slice(3, 8)];
    expect(projectState(withDupes)).toEqual(projectState(events));
  });

  it("sortLog keeps the first occurrence of a seq", () => {
    const a = envelope("run-accepted", { run_id: "run-0001", text: "first" }, 5);
    const b = envelope("run-accepted", { run_id: "run-0001", text: "second" }, 5);
    const log = sortLog([a, b]);
    expect(log).toHaveLength(1);
    expect(log[0]).toBe(a);
  });

  it("replaying any prefix then the rest matches a single pass", () => {
    const events = [envelope("scene", { scene: sampleScene(), seed: 3 }), ...sampleRun()];
    const full = projectState(events);
    for (let cut = 1; cut < events.length; cut++) {
      const replayed = projectState([...events.slice(0, cut), ...events]);
      expect(replayed).toEqual(full);
    }
  });
});

describe("result-card invariant", () => {
  it("cards appear only after the explanation event", () => {
    const before = [
      envelope("run-accepted", { run_id: "run-0001", text: "q" }),
      envelope("object-result", { object: outcome(), t_ms: 0 }),
    ];
    expect(projectState(before).turns[0]?.cards).toHaveLength(0);

    const after = [...before, envelope("explanation", { text: "done", t_ms: 1 })];
    const state = projectState(after);
    expect(state.turns[0]?.cards).toHaveLength(1);
  });

  it("results attach to the most recent turn", () => {
    const events = [
      ...sampleRun("run-0001"),
      envelope("run-accepted", { run_id: "run-0002", text: "next" }),
      envelope("explanation", { text: "second answer", t_ms: 0 }),
      envelope("object-result", { object: outcome({ object_id: "obj-2", label: "lemon" }), t_ms: 0 }),
    ];
    const state = projectState(events);
    expect(state.turns[0]?.cards.map((c) => c.object_id)).toEqual(["obj-1"]);
    expect(state.turns[1]?.cards.map((c) => c.object_id)).toEqual(["obj-2"]);
  });
});
