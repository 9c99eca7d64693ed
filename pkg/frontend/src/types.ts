/** Wire types for the /v1 HTTP + SSE contract.
 *
 * Every event is an envelope with a per-session strictly increasing `seq`;
 * the stream may be re-entered at any point with `last_event_id`, so the
 * client must dedup by seq and treat the log as the single source of truth.
 */

export interface SceneObjectJson {
  id: string;
  class: string;
  center: [number, number];
  radius: number;
  color: number[];
  hardness: number;
}

export interface SceneJson {
  objects: SceneObjectJson[];
  workspace: [number[], number[]];
  seed: number;
}

export interface OutcomeJson {
  object_id: string;
  label: string;
  grounded: boolean;
  localized: boolean;
  measured: boolean;
  communicated: boolean;
  centroid_error_mm: number | null;
  hardness_true: number | null;
  hardness_pred: number | null;
  position: number[] | null;
  succeeded: boolean;
}

export const STAGES = [
  "parse",
  "detect",
  "centroid",
  "tactile-collection",
  "inference",
  "explanation",
] as const;

export type StageName = (typeof STAGES)[number];

export interface ScenePayload {
  scene: SceneJson;
  seed: number;
}

export interface RunAcceptedPayload {
  run_id: string;
  text: string;
}

export interface StageStartedPayload {
  stage: string;
  t_ms: number;
}

export interface StageFinishedPayload {
  stage: string;
  duration_ms: number;
  t_ms: number;
}

export interface ObjectResultPayload {
  object: OutcomeJson;
  t_ms: number;
}

export interface ExplanationPayload {
  text: string;
  t_ms: number;
}

export interface RunFinishedPayload {
  run_id: string;
  digest: string;
}

interface EnvelopeBase {
  session: string;
  seq: number;
  ts: number;
  digest: string;
}

export type SessionEvent = EnvelopeBase &
  (
    | { kind: "scene"; payload: ScenePayload }
    | { kind: "run-accepted"; payload: RunAcceptedPayload }
    | { kind: "stage-started"; payload: StageStartedPayload }
    | { kind: "stage-finished"; payload: StageFinishedPayload }
    | { kind: "object-result"; payload: ObjectResultPayload }
    | { kind: "explanation"; payload: ExplanationPayload }
    | { kind: "run-finished"; payload: RunFinishedPayload }
  );

export type EventKind = SessionEvent["kind"];

export const EVENT_KINDS: readonly EventKind[] = [
  "scene",
  "run-accepted",
  "stage-started",
  "stage-finished",
  "object-result",
  "explanation",
  "run-finished",
];

export interface SceneResponse {
  session: string;
  scene: SceneJson;
  image_png_base64: string;
}

export interface QueryResponse {
  run_id: string;
  session: string;
}
