/** Pure projection of the event log into the view model.
 *
 * The whole UI state is a function of the received events: `projectState`
 * sorts by seq, drops duplicates, and folds. Replaying the same log always
 * reproduces the same state, which is what makes reconnect-and-replay safe.
 */

import {
  OutcomeJson,
  SceneJson,
  SessionEvent,
  STAGES,
  StageName,
} from "./types.js";

export type StageStatus = "pending" | "running" | "done";

export interface StageView {
  stage: StageName;
  status: StageStatus;
  durationMs: number | null;
}

export interface TurnView {
  runId: string;
  query: string;
  stages: StageView[];
  explanation: string | null;
  /** Outcomes shown as result cards. Stays empty until the explanation
   * event lands, even if object results somehow arrive first. */
  cards: OutcomeJson[];
  finished: boolean;
}

export interface SessionView {
  scene: SceneJson | null;
  sceneSeed: number | null;
  /** Number of scene events seen; the image cache keys off this. */
  sceneVersion: number;
  turns: TurnView[];
  busy: boolean;
  lastSeq: number;
}

interface TurnAccum {
  view: TurnView;
  buffered: OutcomeJson[];
}

export function initialState(): SessionView {
  return {
    scene: null,
    sceneSeed: null,
    sceneVersion: 0,
    turns: [],
    busy: false,
    lastSeq: 0,
  };
}

function freshStages(): StageView[] {
  return STAGES.map((stage) => ({ stage, status: "pending", durationMs: null }));
}

/** Seq-sorted copy with duplicates removed (first occurrence wins). */
export function sortLog(events: SessionEvent[]): SessionEvent[] {
  const seen = new Set<number>();
  const out: SessionEvent[] = [];
  for (const e of events) {
    if (!seen.has(e.seq)) {
      seen.add(e.seq);
      out.push(e);
    }
  }
  out.sort((a, b) => a.seq - b.seq);
  return out;
}

export function projectState(events: SessionEvent[]): SessionView {
  const state = initialState();
  const accums: TurnAccum[] = [];
  const stage = (name: string): StageView | undefined => {
    const current = accums[accums.length - 1];
    return current?.view.stages.find((s) => s.stage === name);
  };

  for (const e of sortLog(events)) {
    state.lastSeq = e.seq;
    switch (e.kind) {
      case "scene": {
        state.scene = e.payload.scene;
        state.sceneSeed = e.payload.seed;
        state.sceneVersion += 1;
        break;
      }
      case "run-accepted": {
        const view: TurnView = {
          runId: e.payload.run_id,
          query: e.payload.text,
          stages: freshStages(),
          explanation: null,
          cards: [],
          finished: false,
        };
        accums.push({ view, buffered: [] });
        state.turns.push(view);
        break;
      }
      case "stage-started": {
        const s = stage(e.payload.stage);
        if (s && s.status === "pending") s.status = "running";
        break;
      }
      case "stage-finished": {
        const s = stage(e.payload.stage);
        if (s) {
          s.status = "done";
          s.durationMs = e.payload.duration_ms;
        }
        break;
      }
      case "object-result": {
        const current = accums[accums.length - 1];
        if (!current) break;
        if (current.view.explanation === null) {
          current.buffered.push(e.payload.object);
        } else {
          current.view.cards.push(e.payload.object);
        }
        break;
      }
      case "explanation": {
        const current = accums[accums.length - 1];
        if (!current) break;
        current.view.explanation = e.payload.text;
        current.view.cards.push(...current.buffered);
        current.buffered.length = 0;
        break;
      }
      case "run-finished": {
        const match = accums.find((a) => a.view.runId === e.payload.run_id);
        if (match) match.view.finished = true;
        break;
      }
    }
  }

  state.busy = state.turns.some((t) => !t.finished);
  return state;
}
