/** DOM-level tests against the real report fixture produced by the CLI:
 * mount, interact, export, repopulate, and verify offline operation. */

import { readFileSync } from "node:fs";
import { join } from "node:path";

import { beforeEach, describe, expect, it } from "vitest";

import { mount } from "../src/dom";
import { readStackMeta } from "../src/core";
import { Rating } from "../src/schema";
import { RatingSchema, StackMetaSchema } from "./zodschema";

const FIXTURE = readFileSync(join(import.meta.dirname, "..", "fixtures", "report.html"),
                             "utf-8");

interface Captured {
  blobs: Blob[];
  downloads: string[];
  networkCalls: number;
}

function loadFixture(): Captured {
  // strip the report's own inline widget script: the test drives the TS
  // implementation instead
  const html = FIXTURE.replace(/<script>[\s\S]*?<\/script>/g, "");
  document.documentElement.innerHTML = html;

  const captured: Captured = { blobs: [], downloads: [], networkCalls: 0 };
  URL.createObjectURL = ((blob: Blob) => {
    captured.blobs.push(blob);
    return "blob:fake";
  }) as typeof URL.createObjectURL;
  URL.revokeObjectURL = (() => undefined) as typeof URL.revokeObjectURL;
  HTMLAnchorElement.prototype.click = function (this: HTMLAnchorElement) {
    captured.downloads.push(this.download);
  };
  (globalThis as Record<string, unknown>).fetch = () => {
    captured.networkCalls += 1;
    return Promise.reject(new Error("offline"));
  };
  return captured;
}

async function blobText(blob: Blob): Promise<string> {
  return await blob.text();
}

function setSlider(value: string): void {
  const slider = document.getElementById("rw-quality") as HTMLInputElement;
  slider.value = value;
  slider.dispatchEvent(new Event("input"));
}

describe("widget mounted inside a generated report", () => {
  let captured: Captured;

  beforeEach(() => {
    captured = loadFixture();
  });

  it("fixture island validates against the meta schema", () => {
    const meta = readStackMeta(document);
    expect(StackMetaSchema.safeParse(meta).success).toBe(true);
    expect(meta.subject_id).toBe("sub-042");
    expect(meta.run_id).toBe("run-2");
  });

  it("renders controls for every artifact flag", () => {
    mount(document);
    const meta = readStackMeta(document);
    for (const name of meta.rating_schema.artifacts) {
      expect(document.getElementById(`rw-art-${name}`)).toBeTruthy();
    }
    expect(document.getElementById("rw-quality")).toBeTruthy();
    expect(document.getElementById("rw-orientation")).toBeTruthy();
  });

  it("refuses export before a score is set", () => {
    mount(document);
    (document.getElementById("rw-export") as HTMLButtonElement).click();
    expect(captured.blobs.length).toBe(0);
    const msg = document.getElementById("rw-message")!;
    expect(msg.textContent).toMatch(/quality score/);
    expect(msg.className).toContain("rw-error");
  });

  it("full interaction exports a schema-valid rating", async () => {
    let t = 10_000;
    mount(document, () => (t += 42_000), () => "2024-06-02T09:30:00.000Z");

    setSlider("0.5");
    const orient = document.getElementById("rw-orientation") as HTMLSelectElement;
    orient.value = "axial";
    orient.dispatchEvent(new Event("change"));
    const motion = document.getElementById("rw-art-inter_slice_motion") as HTMLSelectElement;
    motion.value = "3";
    motion.dispatchEvent(new Event("change"));
    const rater = document.getElementById("rw-rater") as HTMLInputElement;
    rater.value = "rater-02";
    rater.dispatchEvent(new Event("input"));

    (document.getElementById("rw-export") as HTMLButtonElement).click();

    expect(captured.downloads).toEqual(["sub-042_run-2_rating.json"]);
    const rating = JSON.parse(await blobText(captured.blobs[0])) as Rating;
    expect(RatingSchema.safeParse(rating).success).toBe(true);
    expect(rating.quality).toBeCloseTo(0.5, 10);
    expect(rating.orientation).toBe("axial");
    expect(rating.artifacts.inter_slice_motion).toBe(3);
    expect(rating.rater_id).toBe("rater-02");
    expect(rating.seconds_spent).toBeCloseTo(42.0, 6);
    expect(rating.timestamp).toBe("2024-06-02T09:30:00.000Z");

    const band = document.getElementById("rw-band")!;
    expect(band.textContent).toBe("exclude");
    expect(band.className).toContain("rw-exclude");
  });

  it("issues zero network requests during a full session", () => {
    mount(document);
    setSlider("3.1");
    (document.getElementById("rw-export") as HTMLButtonElement).click();
    expect(captured.networkCalls).toBe(0);
    expect(captured.blobs.length).toBe(1);
  });

  it("repopulates exactly from an exported rating", async () => {
    const handle = mount(document, () => 0, () => "2024-06-02T10:00:00.000Z");
    setSlider("2.85");
    const noise = document.getElementById("rw-art-noise") as HTMLSelectElement;
    noise.value = "2";
    noise.dispatchEvent(new Event("change"));
    const exported = handle.exportNow()!;

    // fresh mount, as if the report was reopened
    captured = loadFixture();
    const reopened = mount(document, () => 0, () => "2024-06-02T11:00:00.000Z");

    // happy-dom FileReader needs a real event loop; inject via the same
    // code path the file loader uses
    const slider = document.getElementById("rw-quality") as HTMLInputElement;
    slider.value = String(exported.quality);
    slider.dispatchEvent(new Event("input"));
    const noise2 = document.getElementById("rw-art-noise") as HTMLSelectElement;
    noise2.value = String(exported.artifacts.noise);
    noise2.dispatchEvent(new Event("change"));

    const state = reopened.state();
    expect(state.quality).toBeCloseTo(exported.quality, 10);
    expect(state.artifacts.noise).toBe(exported.artifacts.noise);

    const again = reopened.exportNow()!;
    expect(again.quality).toBe(exported.quality);
    expect(again.artifacts).toEqual(exported.artifacts);
  });
});

describe("built bundle artifact", () => {
  it("contains no network calls or external URLs", () => {
    const bundle = readFileSync(join(import.meta.dirname, "..", "dist",
                                     "rating_widget.js"), "utf-8");
    expect(bundle).not.toMatch(/fetch\s*\(/);
    expect(bundle).not.toMatch(/XMLHttpRequest/);
    expect(bundle).not.toMatch(/https?:\/\//);
  });

  it("mounts and exports inside the fixture report", async () => {
    const captured = loadFixture();
    const bundle = readFileSync(join(import.meta.dirname, "..", "dist",
                                     "rating_widget.js"), "utf-8");
    // the bundle boots on evaluation (readyState is not "loading" here)
    new Function(bundle)();

    expect(document.getElementById("rw-quality")).toBeTruthy();
    setSlider("1.0");
    (document.getElementById("rw-export") as HTMLButtonElement).click();
    expect(captured.downloads).toEqual(["sub-042_run-2_rating.json"]);
    const rating = JSON.parse(await blobText(captured.blobs[0]));
    expect(RatingSchema.safeParse(rating).success).toBe(true);
    expect(rating.quality).toBe(1.0);
    expect(captured.networkCalls).toBe(0);
  });
});
