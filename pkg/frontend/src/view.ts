/** HTML renderer for the event-derived view.
 *
 * `renderView` is a pure function of (session state, scene image), so the
 * replayed log renders byte-identical markup to the live stream. Anything
 * transport-flavored (connection banner, toast, input gating) stays outside
 * this region and is handled by the app shell.
 */

import { describeLocation, failureReason, formatHardness, ripeness } from "./format.js";
import { SessionView, StageView, TurnView } from "./reducer.js";
import { OutcomeJson, SceneJson } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function renderStage(s: StageView): string {
  const duration =
    s.durationMs === null ? "" : `<span class="duration">${s.durationMs.toFixed(1)} ms</span>`;
  return (
    `<li class="stage ${s.status}" data-stage="${s.stage}">` +
    `<span class="name">${s.stage}</span>${duration}</li>`
  );
}

function renderCard(outcome: OutcomeJson, scene: SceneJson | null): string {
  const workspace = scene ? scene.workspace : undefined;
  if (outcome.measured && outcome.hardness_pred !== null && outcome.position !== null) {
    const place = describeLocation(
      [outcome.position[0] ?? 0, outcome.position[1] ?? 0],
      workspace,
    );
    const ripe = ripeness(outcome.label, outcome.hardness_pred);
    const ripeLine = ripe === null ? "" : `<div class="ripeness">${ripe}</div>`;
    return (
      `<div class="card measured" data-object="${escapeHtml(outcome.object_id)}">` +
      `<div class="label">${escapeHtml(outcome.label)}</div>` +
      `<div class="location">${place}</div>` +
      `<div class="hardness">${formatHardness(outcome.hardness_pred)}</div>` +
      ripeLine +
      `</div>`
    );
  }
  return (
    `<div class="card missing" data-object="${escapeHtml(outcome.object_id)}">` +
    `<div class="label">${escapeHtml(outcome.label)}</div>` +
    `<div class="status">${failureReason(outcome)}</div>` +
    `</div>`
  );
}

function renderTurn(turn: TurnView, scene: SceneJson | null): string {
  const stages = turn.stages.map(renderStage).join("");
  const explanation =
    turn.explanation === null
      ? ""
      : `<div class="explanation">${escapeHtml(turn.explanation)}</div>`;
  const cards =
    turn.cards.length === 0
      ? ""
      : `<div class="cards">${turn.cards.map((c) => renderCard(c, scene)).join("")}</div>`;
  return (
    `<article class="turn${turn.finished ? " finished" : ""}" data-run="${turn.runId}">` +
    `<div class="query">${escapeHtml(turn.query)}</div>` +
    `<ol class="timeline">${stages}</ol>` +
    explanation +
    cards +
    `</article>`
  );
}

function renderScene(state: SessionView, sceneImage: string | null): string {
  if (state.scene === null) return `<section class="scene-panel empty">no scene yet</section>`;
  const img =
    sceneImage === null
      ? `<div class="scene placeholder">scene image loading</div>`
      : `<img class="scene" alt="tabletop scene" src="${sceneImage}">`;
  const classes = state.scene.objects.map((o) => escapeHtml(o.class)).join(", ");
  return (
    `<section class="scene-panel">` +
    img +
    `<div class="scene-meta">seed ${state.sceneSeed}, ${state.scene.objects.length} objects: ${classes}</div>` +
    `<div class="scene-actions">` +
    `<button type="button" class="refresh">refresh view</button>` +
    `<button type="button" class="randomize">randomize scene</button>` +
    `</div>` +
    `</section>`
  );
}

export function renderView(state: SessionView, sceneImage: string | null): string {
  const turns = state.turns.map((t) => renderTurn(t, state.scene)).join("");
  return renderScene(state, sceneImage) + `<section class="turns">${turns}</section>`;
}
