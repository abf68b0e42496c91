/** DOM binding: renders the rating surface into #rating-widget and wires
 * user events to the pure state functions. Works from file:// with no
 * network access; export downloads a Blob. */

import {
  WidgetState,
  buildRating,
  createState,
  exportFilename,
  loadRating,
  readStackMeta,
  serializeRating,
  setArtifact,
  setOrientation,
  setQuality,
  setRater,
  validationError,
} from "./core";
import { Rating, StackMeta, qualityBand, ratingProblem } from "./schema";

export interface WidgetHandle {
  state: () => WidgetState;
  exportNow: () => Rating | null;
}

export function mount(doc: Document, nowMs: () => number = Date.now,
                      isoNow: () => string = () => new Date().toISOString()
                      ): WidgetHandle {
  const meta: StackMeta = readStackMeta(doc);
  const root = doc.getElementById("rating-widget");
  if (!root) {
    throw new Error("report has no #rating-widget container");
  }
  let state = createState(meta, nowMs());

  const el = <K extends keyof HTMLElementTagNameMap>(
    tag: K, attrs: Record<string, string>, parent: Element,
  ): HTMLElementTagNameMap[K] => {
    const node = doc.createElement(tag);
    for (const [key, value] of Object.entries(attrs)) {
      if (key === "text") {
        node.textContent = value;
      } else {
        node.setAttribute(key, value);
      }
    }
    parent.appendChild(node);
    return node;
  };

  el("h2", { text: "Rate this stack" }, root);

  const sliderRow = el("div", { class: "rw-row" }, root);
  el("label", { text: "Overall quality", for: "rw-quality" }, sliderRow);
  const slider = el("input", {
    id: "rw-quality", type: "range",
    min: String(meta.rating_schema.quality_range[0]),
    max: String(meta.rating_schema.quality_range[1]),
    step: String(meta.rating_schema.step), value: "2",
  }, sliderRow);
  const qualityOut = el("span", { id: "rw-quality-value", text: "not set" }, sliderRow);
  const bandOut = el("span", { id: "rw-band", class: "rw-band" }, sliderRow);

  const refreshQuality = () => {
    if (state.quality === null) return;
    qualityOut.textContent = state.quality.toFixed(2);
    const band = qualityBand(state.quality,
                             meta.rating_schema.exclude_threshold);
    bandOut.textContent = band;
    bandOut.className = `rw-band rw-${band}`;
  };
  slider.addEventListener("input", () => {
    state = setQuality(state, parseFloat(slider.value), meta);
    refreshQuality();
  });

  const orientRow = el("div", { class: "rw-row" }, root);
  el("label", { text: "In-plane orientation", for: "rw-orientation" }, orientRow);
  const orient = el("select", { id: "rw-orientation" }, orientRow);
  for (const o of meta.rating_schema.orientations) {
    el("option", { value: o, text: o }, orient);
  }
  orient.value = "unknown";
  orient.addEventListener("change", () => {
    state = setOrientation(state, orient.value);
  });

  el("h3", { text: "Artifacts (0 = absent, 3 = severe)" }, root);
  const artifactInputs: Record<string, HTMLSelectElement> = {};
  for (const name of meta.rating_schema.artifacts) {
    const row = el("div", { class: "rw-row" }, root);
    el("label", { text: name.replace(/_/g, " "), for: `rw-art-${name}` }, row);
    const sel = el("select", { id: `rw-art-${name}` }, row);
    for (const grade of [0, 1, 2, 3]) {
      el("option", { value: String(grade), text: String(grade) }, sel);
    }
    sel.addEventListener("change", () => {
      state = setArtifact(state, name, parseInt(sel.value, 10));
    });
    artifactInputs[name] = sel;
  }

  const raterRow = el("div", { class: "rw-row" }, root);
  el("label", { text: "Rater id", for: "rw-rater" }, raterRow);
  const rater = el("input", { id: "rw-rater", type: "text",
                              placeholder: "anonymous" }, raterRow);
  rater.addEventListener("input", () => {
    state = setRater(state, rater.value);
  });

  const loadRow = el("div", { class: "rw-row" }, root);
  el("label", { text: "Load existing rating", for: "rw-load" }, loadRow);
  const loader = el("input", { id: "rw-load", type: "file",
                               accept: ".json" }, loadRow);

  const message = (text: string, isError: boolean) => {
    msg.textContent = text;
    msg.className = "rw-message" + (isError ? " rw-error" : "");
  };

  const populate = (parsed: unknown) => {
    const problem = ratingProblem(parsed);
    if (problem) {
      message(`invalid rating file: ${problem}`, true);
      return;
    }
    const rating = parsed as Rating;
    state = loadRating(state, rating, meta);
    slider.value = String(rating.quality);
    refreshQuality();
    orient.value = rating.orientation;
    for (const [name, grade] of Object.entries(rating.artifacts)) {
      if (name in artifactInputs) {
        artifactInputs[name].value = String(grade);
      }
    }
    rater.value = rating.rater_id;
    message(`loaded rating for ${rating.subject_id}/${rating.run_id}`, false);
  };

  loader.addEventListener("change", () => {
    const file = loader.files && loader.files[0];
    if (!file) return;
    const reader = new FileReader();
    reader.onload = () => {
      try {
        populate(JSON.parse(String(reader.result)));
      } catch (err) {
        message(`could not parse rating file: ${(err as Error).message}`, true);
      }
    };
    reader.readAsText(file);
  });

  const exportBtn = el("button", { id: "rw-export",
                                   text: "Export rating JSON" }, root);
  const msg = el("div", { id: "rw-message", class: "rw-message" }, root);

  const exportNow = (): Rating | null => {
    const problem = validationError(state);
    if (problem) {
      message(problem, true);
      return null;
    }
    const rating = buildRating(state, meta, nowMs(), isoNow());
    const blob = new Blob([serializeRating(rating)],
                          { type: "application/json" });
    const anchor = doc.createElement("a");
    anchor.href = URL.createObjectURL(blob);
    anchor.download = exportFilename(meta);
    doc.body.appendChild(anchor);
    anchor.click();
    doc.body.removeChild(anchor);
    URL.revokeObjectURL(anchor.href);
    message(`exported ${anchor.download} `
            + `(${qualityBand(rating.quality, meta.rating_schema.exclude_threshold)})`,
            false);
    return rating;
  };
  exportBtn.addEventListener("click", () => { exportNow(); });

  return { state: () => state, exportNow };
}
