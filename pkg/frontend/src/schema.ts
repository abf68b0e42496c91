/** Rating JSON wire format, exactly as the toolkit's data layer reads it. */

export const ORIENTATIONS = ["axial", "coronal", "sagittal", "unknown"] as const;
export type Orientation = (typeof ORIENTATIONS)[number];

/** Ratings at or below this quality mean the stack is excluded. */
export const EXCLUDE_THRESHOLD = 1.0;

export interface Rating {
  subject_id: string;
  run_id: string;
  quality: number;
  orientation: Orientation;
  artifacts: Record<string, number>;
  rater_id: string;
  seconds_spent: number;
  timestamp: string;
}

export interface RatingSchemaInfo {
  quality_range: [number, number];
  step: number;
  exclude_threshold: number;
  orientations: string[];
  artifacts: string[];
  grades: [number, number];
}

/** The report's JSON island payload. */
export interface StackMeta {
  subject_id: string;
  run_id: string;
  toolkit_version: string;
  rating_schema: RatingSchemaInfo;
}

const TIMESTAMP = /^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}/;

/** First problem found in a parsed rating document, or null when valid. */
export function ratingProblem(value: unknown): string | null {
  if (typeof value !== "object" || value === null || Array.isArray(value)) {
    return "rating must be a JSON object";
  }
  const doc = value as Record<string, unknown>;
  for (const key of ["subject_id", "run_id", "rater_id", "timestamp"]) {
    if (typeof doc[key] !== "string" || (doc[key] as string).length === 0) {
      return `${key} must be a non-empty string`;
    }
  }
  if (typeof doc.quality !== "number" || doc.quality < 0 || doc.quality > 4) {
    return "quality must be a number in [0, 4]";
  }
  if (!(ORIENTATIONS as readonly string[]).includes(doc.orientation as string)) {
    return `orientation must be one of ${ORIENTATIONS.join(", ")}`;
  }
  if (typeof doc.artifacts !== "object" || doc.artifacts === null
      || Array.isArray(doc.artifacts)) {
    return "artifacts must be an object of flag -> grade";
  }
  for (const [name, grade] of Object.entries(doc.artifacts as object)) {
    if (!Number.isInteger(grade) || (grade as number) < 0 || (grade as number) > 3) {
      return `artifact grade for ${name} must be an integer in 0..3`;
    }
  }
  if (typeof doc.seconds_spent !== "number" || doc.seconds_spent < 0) {
    return "seconds_spent must be a non-negative number";
  }
  if (!TIMESTAMP.test(doc.timestamp as string)) {
    return "timestamp must be ISO-8601";
  }
  return null;
}

export function deriveLabel(quality: number,
                            threshold = EXCLUDE_THRESHOLD): "include" | "exclude" {
  return quality <= threshold ? "exclude" : "include";
}

export function qualityBand(quality: number, threshold = EXCLUDE_THRESHOLD):
    "exclude" | "poor" | "acceptable" | "excellent" {
  if (quality <= threshold) return "exclude";
  if (quality <= 2) return "poor";
  if (quality <= 3) return "acceptable";
  return "excellent";
}
