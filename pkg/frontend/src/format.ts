/** Presentation helpers mirroring the service's wording.
 *
 * The card text must agree with the explanation sentences, so the location
 * phrase uses the same thirds rule over the workspace (lower band wins on a
 * boundary, lower-y edge is "front") and ripeness uses the same per-fruit
 * hardness thresholds.
 */

export type Bounds = [number[], number[]];

export const DEFAULT_WORKSPACE: Bounds = [
  [-300, 300],
  [-200, 200],
];

const RIPE_BELOW: Record<string, number> = {
  banana: 65.0,
  lime: 64.0,
  lemon: 64.0,
};

function band(v: number, lo: number, hi: number, names: [string, string, string]): string {
  const frac = (v - lo) / (hi - lo);
  if (frac <= 1 / 3) return names[0];
  if (frac <= 2 / 3) return names[1];
  return names[2];
}

export function describeLocation(
  position: [number, number],
  bounds: Bounds = DEFAULT_WORKSPACE,
): string {
  const [xRange, yRange] = bounds;
  const xmin = xRange[0] ?? -300;
  const xmax = xRange[1] ?? 300;
  const ymin = yRange[0] ?? -200;
  const ymax = yRange[1] ?? 200;
  const x = Math.min(Math.max(position[0], xmin), xmax);
  const y = Math.min(Math.max(position[1], ymin), ymax);
  const row = band(y, ymin, ymax, ["front", "center", "back"]);
  const col = band(x, xmin, xmax, ["left", "center", "right"]);
  return row === "center" && col === "center" ? "center" : `${row}-${col}`;
}

/** Ripeness word for a fruit at a predicted hardness; null when the fruit
 * has no calibrated threshold. */
export function ripeness(fruit: string, hardness: number): string | null {
  const threshold = RIPE_BELOW[fruit];
  if (threshold === undefined) return null;
  return hardness <= threshold ? "ripe" : "unripe";
}

export function formatHardness(value: number): string {
  return `${value.toFixed(1)} HA`;
}

/** Short phrase for why a target produced no measurement. */
export function failureReason(outcome: {
  grounded: boolean;
  localized: boolean;
  measured: boolean;
}): string {
  if (!outcome.grounded) return "not detected";
  if (!outcome.localized) return "localization off target";
  if (!outcome.measured) return "no tactile measurement";
  return "not communicated";
}
