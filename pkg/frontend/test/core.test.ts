/** Scripted interaction scenarios on the pure widget core: every exported
 * rating validates against the wire schema and repopulation is exact. */

import { describe, expect, it } from "vitest";

import {
  buildRating,
  createState,
  exportFilename,
  loadRating,
  serializeRating,
  setArtifact,
  setOrientation,
  setQuality,
  setRater,
  snapQuality,
  validationError,
  WidgetState,
} from "../src/core";
import { deriveLabel, qualityBand, Rating, StackMeta } from "../src/schema";
import { RatingSchema } from "./zodschema";

const META: StackMeta = {
  subject_id: "sub-042",
  run_id: "run-2",
  toolkit_version: "0.1.0",
  rating_schema: {
    quality_range: [0, 4],
    step: 0.05,
    exclude_threshold: 1.0,
    orientations: ["axial", "coronal", "sagittal", "unknown"],
    artifacts: ["inter_slice_motion", "signal_drop", "bias_field",
                "incomplete_fov", "noise", "other"],
    grades: [0, 3],
  },
};

type Action =
  | { kind: "quality"; value: number }
  | { kind: "orientation"; value: string }
  | { kind: "artifact"; name: string; grade: number }
  | { kind: "rater"; value: string };

interface Scenario {
  name: string;
  actions: Action[];
  expectQuality: number;
  expectLabel: "include" | "exclude";
  expectBand?: string;
  expectOrientation?: string;
  expectArtifacts?: Record<string, number>;
  expectRater?: string;
}

// 20 scripted rater sessions covering the scale, every orientation, every
// artifact flag and grade, and rater identity handling
const SCENARIOS: Scenario[] = [
  { name: "excellent axial, no artifacts",
    actions: [{ kind: "quality", value: 3.5 },
              { kind: "orientation", value: "axial" }],
    expectQuality: 3.5, expectLabel: "include", expectBand: "excellent",
    expectOrientation: "axial" },
  { name: "exclude-range score",
    actions: [{ kind: "quality", value: 0.5 }],
    expectQuality: 0.5, expectLabel: "exclude", expectBand: "exclude" },
  { name: "exact threshold is excluded",
    actions: [{ kind: "quality", value: 1.0 }],
    expectQuality: 1.0, expectLabel: "exclude", expectBand: "exclude" },
  { name: "just above threshold included",
    actions: [{ kind: "quality", value: 1.05 }],
    expectQuality: 1.05, expectLabel: "include", expectBand: "poor" },
  { name: "bottom of scale",
    actions: [{ kind: "quality", value: 0.0 }],
    expectQuality: 0.0, expectLabel: "exclude" },
  { name: "top of scale",
    actions: [{ kind: "quality", value: 4.0 }],
    expectQuality: 4.0, expectLabel: "include", expectBand: "excellent" },
  { name: "slider snaps to 0.05 grid",
    actions: [{ kind: "quality", value: 2.513 }],
    expectQuality: 2.5, expectLabel: "include", expectBand: "acceptable" },
  { name: "values above the scale clamp",
    actions: [{ kind: "quality", value: 7.3 }],
    expectQuality: 4.0, expectLabel: "include" },
  { name: "values below the scale clamp",
    actions: [{ kind: "quality", value: -2.0 }],
    expectQuality: 0.0, expectLabel: "exclude" },
  { name: "coronal orientation",
    actions: [{ kind: "quality", value: 2.0 },
              { kind: "orientation", value: "coronal" }],
    expectQuality: 2.0, expectLabel: "include", expectOrientation: "coronal" },
  { name: "sagittal orientation",
    actions: [{ kind: "quality", value: 2.2 },
              { kind: "orientation", value: "sagittal" }],
    expectQuality: 2.2, expectLabel: "include", expectOrientation: "sagittal" },
  { name: "motion artifact grade 3",
    actions: [{ kind: "quality", value: 0.8 },
              { kind: "artifact", name: "inter_slice_motion", grade: 3 }],
    expectQuality: 0.8, expectLabel: "exclude",
    expectArtifacts: { inter_slice_motion: 3 } },
  { name: "multiple artifacts",
    actions: [{ kind: "quality", value: 1.5 },
              { kind: "artifact", name: "signal_drop", grade: 2 },
              { kind: "artifact", name: "noise", grade: 1 },
              { kind: "artifact", name: "bias_field", grade: 1 }],
    expectQuality: 1.5, expectLabel: "include",
    expectArtifacts: { signal_drop: 2, noise: 1, bias_field: 1 } },
  { name: "artifact set then cleared",
    actions: [{ kind: "quality", value: 3.0 },
              { kind: "artifact", name: "other", grade: 2 },
              { kind: "artifact", name: "other", grade: 0 }],
    expectQuality: 3.0, expectLabel: "include",
    expectArtifacts: { other: 0 } },
  { name: "incomplete field of view flagged",
    actions: [{ kind: "quality", value: 1.9 },
              { kind: "artifact", name: "incomplete_fov", grade: 2 }],
    expectQuality: 1.9, expectLabel: "include",
    expectArtifacts: { incomplete_fov: 2 } },
  { name: "named rater",
    actions: [{ kind: "quality", value: 2.8 },
              { kind: "rater", value: "rater-07" }],
    expectQuality: 2.8, expectLabel: "include", expectRater: "rater-07" },
  { name: "empty rater falls back to anonymous",
    actions: [{ kind: "quality", value: 2.0 },
              { kind: "rater", value: "" }],
    expectQuality: 2.0, expectLabel: "include", expectRater: "anonymous" },
  { name: "score revised downwards",
    actions: [{ kind: "quality", value: 3.0 },
              { kind: "quality", value: 0.6 }],
    expectQuality: 0.6, expectLabel: "exclude" },
  { name: "poor band boundary",
    actions: [{ kind: "quality", value: 2.0 }],
    expectQuality: 2.0, expectLabel: "include", expectBand: "poor" },
  { name: "everything at once",
    actions: [{ kind: "quality", value: 0.35 },
              { kind: "orientation", value: "axial" },
              { kind: "artifact", name: "inter_slice_motion", grade: 2 },
              { kind: "artifact", name: "signal_drop", grade: 3 },
              { kind: "rater", value: "rater-01" }],
    expectQuality: 0.35, expectLabel: "exclude", expectBand: "exclude",
    expectOrientation: "axial",
    expectArtifacts: { inter_slice_motion: 2, signal_drop: 3 },
    expectRater: "rater-01" },
];

function runScenario(scenario: Scenario): Rating {
  let state: WidgetState = createState(META, 1_000_000);
  for (const action of scenario.actions) {
    switch (action.kind) {
      case "quality":
        state = setQuality(state, action.value, META);
        break;
      case "orientation":
        state = setOrientation(state, action.value);
        break;
      case "artifact":
        state = setArtifact(state, action.name, action.grade);
        break;
      case "rater":
        state = setRater(state, action.value);
        break;
    }
  }
  return buildRating(state, META, 1_037_000, "2024-06-01T10:00:00.000Z");
}

describe("scripted rating scenarios", () => {
  it("covers 20 scenarios", () => {
    expect(SCENARIOS.length).toBe(20);
  });

  for (const scenario of SCENARIOS) {
    it(scenario.name, () => {
      const rating = runScenario(scenario);

      const checked = RatingSchema.safeParse(rating);
      expect(checked.success, JSON.stringify(checked)).toBe(true);

      expect(rating.subject_id).toBe("sub-042");
      expect(rating.run_id).toBe("run-2");
      expect(rating.quality).toBeCloseTo(scenario.expectQuality, 10);
      expect(deriveLabel(rating.quality)).toBe(scenario.expectLabel);
      if (scenario.expectBand) {
        expect(qualityBand(rating.quality)).toBe(scenario.expectBand);
      }
      if (scenario.expectOrientation) {
        expect(rating.orientation).toBe(scenario.expectOrientation);
      }
      for (const [name, grade] of Object.entries(scenario.expectArtifacts ?? {})) {
        expect(rating.artifacts[name]).toBe(grade);
      }
      if (scenario.expectRater) {
        expect(rating.rater_id).toBe(scenario.expectRater);
      }
      expect(rating.seconds_spent).toBeCloseTo(37.0, 6);
      // the full artifact map is always present
      expect(Object.keys(rating.artifacts).sort()).toEqual(
        [...META.rating_schema.artifacts].sort());
    });
  }
});

describe("round-trip repopulation", () => {
  for (const scenario of SCENARIOS.slice(0, 10)) {
    it(`repopulates exactly: ${scenario.name}`, () => {
      const exported = runScenario(scenario);
      let fresh = createState(META, 5_000_000);
      fresh = loadRating(fresh, exported, META);

      expect(fresh.quality).toBe(exported.quality);
      expect(fresh.orientation).toBe(exported.orientation);
      expect(fresh.artifacts).toEqual(exported.artifacts);
      expect(fresh.raterId).toBe(exported.rater_id);
      expect(fresh.priorSeconds).toBe(exported.seconds_spent);

      // re-export after 10 more seconds: time accumulates, fields identical
      const again = buildRating(fresh, META, 5_010_000,
                                "2024-06-01T11:00:00.000Z");
      expect(again.quality).toBe(exported.quality);
      expect(again.orientation).toBe(exported.orientation);
      expect(again.artifacts).toEqual(exported.artifacts);
      expect(again.seconds_spent).toBeCloseTo(exported.seconds_spent + 10, 6);
    });
  }
});

describe("validation and helpers", () => {
  it("refuses to export without a score", () => {
    const state = createState(META, 0);
    expect(validationError(state)).toMatch(/quality score/);
    expect(() => buildRating(state, META, 1000, "2024-01-01T00:00:00Z"))
      .toThrow();
  });

  it("export filename follows subject and run", () => {
    expect(exportFilename(META)).toBe("sub-042_run-2_rating.json");
  });

  it("serialization is valid JSON and schema-complete", () => {
    const state = setQuality(createState(META, 0), 2.5, META);
    const rating = buildRating(state, META, 61_000, "2024-06-01T10:00:00Z");
    const parsed = JSON.parse(serializeRating(rating));
    expect(RatingSchema.safeParse(parsed).success).toBe(true);
    expect(parsed.seconds_spent).toBeCloseTo(61.0, 6);
  });

  it("rejects out-of-range artifact grades", () => {
    const state = createState(META, 0);
    expect(() => setArtifact(state, "noise", 4)).toThrow();
    expect(() => setArtifact(state, "noise", -1)).toThrow();
    expect(() => setArtifact(state, "not_a_flag", 1)).toThrow();
  });

  it("rejects unknown orientations", () => {
    const state = createState(META, 0);
    expect(() => setOrientation(state, "oblique")).toThrow();
  });

  it("snaps to the configured step", () => {
    expect(snapQuality(1.23, META)).toBeCloseTo(1.25, 10);
    expect(snapQuality(1.22, META)).toBeCloseTo(1.2, 10);
  });
});
