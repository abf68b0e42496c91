/** Pure widget state: what the rater has entered, independent of the DOM.
 *
 * The DOM layer dispatches user interactions into these functions and the
 * export path serializes the state to the Rating wire format. Keeping this
 * logic DOM-free makes every interaction scenario scriptable in tests.
 */

import { Rating, StackMeta, Orientation, ORIENTATIONS } from "./schema";

export interface WidgetState {
  quality: number | null;
  orientation: Orientation;
  artifacts: Record<string, number>;
  raterId: string;
  priorSeconds: number;
  openedAtMs: number;
}

export function createState(meta: StackMeta, nowMs: number): WidgetState {
  const artifacts: Record<string, number> = {};
  for (const name of meta.rating_schema.artifacts) {
    artifacts[name] = 0;
  }
  return {
    quality: null,
    orientation: "unknown",
    artifacts,
    raterId: "",
    priorSeconds: 0,
    openedAtMs: nowMs,
  };
}

/** Clamp to the scale and snap to the slider granularity. */
export function snapQuality(value: number, meta: StackMeta): number {
  const [lo, hi] = meta.rating_schema.quality_range;
  const step = meta.rating_schema.step;
  const clamped = Math.min(hi, Math.max(lo, value));
  return Math.round(clamped / step) * step;
}

export function setQuality(state: WidgetState, value: number,
                           meta: StackMeta): WidgetState {
  return { ...state, quality: snapQuality(value, meta) };
}

export function setOrientation(state: WidgetState, value: string): WidgetState {
  if (!(ORIENTATIONS as readonly string[]).includes(value)) {
    throw new Error(`unknown orientation ${value}`);
  }
  return { ...state, orientation: value as Orientation };
}

export function setArtifact(state: WidgetState, name: string,
                            grade: number): WidgetState {
  if (!(name in state.artifacts)) {
    throw new Error(`unknown artifact flag ${name}`);
  }
  if (!Number.isInteger(grade) || grade < 0 || grade > 3) {
    throw new Error(`artifact grade must be an integer in 0..3, got ${grade}`);
  }
  return { ...state, artifacts: { ...state.artifacts, [name]: grade } };
}

export function setRater(state: WidgetState, raterId: string): WidgetState {
  return { ...state, raterId };
}

/** Repopulate from a previously exported rating; fields restore exactly. */
export function loadRating(state: WidgetState, rating: Rating,
                           meta: StackMeta): WidgetState {
  let next: WidgetState = { ...state };
  next.quality = rating.quality;
  next.orientation = rating.orientation;
  next.artifacts = { ...state.artifacts };
  for (const [name, grade] of Object.entries(rating.artifacts)) {
    if (name in next.artifacts) {
      next.artifacts[name] = grade;
    }
  }
  next.raterId = rating.rater_id;
  next.priorSeconds = rating.seconds_spent;
  return next;
}

/** null when exportable, else the validation message to show inline. */
export function validationError(state: WidgetState): string | null {
  if (state.quality === null) {
    return "set the quality score before exporting";
  }
  return null;
}

export function buildRating(state: WidgetState, meta: StackMeta, nowMs: number,
                            timestamp: string): Rating {
  if (state.quality === null) {
    throw new Error("cannot build a rating without a quality score");
  }
  return {
    subject_id: meta.subject_id,
    run_id: meta.run_id,
    quality: state.quality,
    orientation: state.orientation,
    artifacts: { ...state.artifacts },
    rater_id: state.raterId || "anonymous",
    seconds_spent: state.priorSeconds + (nowMs - state.openedAtMs) / 1000,
    timestamp,
  };
}

export function exportFilename(meta: StackMeta): string {
  return `${meta.subject_id}_${meta.run_id}_rating.json`;
}

export function serializeRating(rating: Rating): string {
  return JSON.stringify(rating, null, 1);
}

/** Parse the report's embedded JSON island. */
export function readStackMeta(doc: Document): StackMeta {
  const island = doc.getElementById("stack-meta");
  if (!island || !island.textContent) {
    throw new Error("report has no #stack-meta JSON island");
  }
  return JSON.parse(island.textContent) as StackMeta;
}
