/* Rating widget embedded in each stack report.
 *
 * Reads the report's JSON island (#stack-meta), renders the rating surface
 * into #rating-widget and exports one rating JSON file per stack. Fully
 * offline: no network requests, export via Blob download. */
(function () {
  "use strict";

  var meta = JSON.parse(document.getElementById("stack-meta").textContent);
  var schema = meta.rating_schema;
  var root = document.getElementById("rating-widget");
  if (!root) { return; }

  var state = {
    quality: null,
    orientation: "unknown",
    artifacts: {},
    rater_id: "",
    prior_seconds: 0,
    opened_at: Date.now()
  };
  schema.artifacts.forEach(function (name) { state.artifacts[name] = 0; });

  function rangeName(q) {
    if (q <= schema.exclude_threshold) { return "exclude"; }
    if (q <= 2) { return "poor"; }
    if (q <= 3) { return "acceptable"; }
    return "excellent";
  }

  function el(tag, attrs, parent) {
    var node = document.createElement(tag);
    Object.keys(attrs || {}).forEach(function (k) {
      if (k === "text") { node.textContent = attrs[k]; }
      else { node.setAttribute(k, attrs[k]); }
    });
    if (parent) { parent.appendChild(node); }
    return node;
  }

  el("h2", { text: "Rate this stack" }, root);

  var sliderRow = el("div", { "class": "rw-row" }, root);
  el("label", { text: "Overall quality", "for": "rw-quality" }, sliderRow);
  var slider = el("input", {
    id: "rw-quality", type: "range",
    min: "0", max: String(schema.quality_range[1]), step: String(schema.step),
    value: "2"
  }, sliderRow);
  var qualityOut = el("span", { id: "rw-quality-value", text: "not set" }, sliderRow);
  var bandOut = el("span", { id: "rw-band", "class": "rw-band" }, sliderRow);

  slider.addEventListener("input", function () {
    state.quality = parseFloat(slider.value);
    qualityOut.textContent = state.quality.toFixed(2);
    bandOut.textContent = rangeName(state.quality);
    bandOut.className = "rw-band rw-" + rangeName(state.quality);
  });

  var orientRow = el("div", { "class": "rw-row" }, root);
  el("label", { text: "In-plane orientation", "for": "rw-orientation" }, orientRow);
  var orient = el("select", { id: "rw-orientation" }, orientRow);
  schema.orientations.forEach(function (o) {
    el("option", { value: o, text: o }, orient);
  });
  orient.value = "unknown";
  orient.addEventListener("change", function () { state.orientation = orient.value; });

  el("h3", { text: "Artifacts (0 = absent, 3 = severe)" }, root);
  var artifactInputs = {};
  schema.artifacts.forEach(function (name) {
    var row = el("div", { "class": "rw-row" }, root);
    el("label", { text: name.replace(/_/g, " "), "for": "rw-art-" + name }, row);
    var sel = el("select", { id: "rw-art-" + name }, row);
    [0, 1, 2, 3].forEach(function (g) {
      el("option", { value: String(g), text: String(g) }, sel);
    });
    sel.addEventListener("change", function () {
      state.artifacts[name] = parseInt(sel.value, 10);
    });
    artifactInputs[name] = sel;
  });

  var raterRow = el("div", { "class": "rw-row" }, root);
  el("label", { text: "Rater id", "for": "rw-rater" }, raterRow);
  var rater = el("input", { id: "rw-rater", type: "text", placeholder: "anonymous" }, raterRow);
  rater.addEventListener("input", function () { state.rater_id = rater.value; });

  var loadRow = el("div", { "class": "rw-row" }, root);
  el("label", { text: "Load existing rating", "for": "rw-load" }, loadRow);
  var loader = el("input", { id: "rw-load", type: "file", accept: ".json" }, loadRow);
  loader.addEventListener("change", function () {
    var file = loader.files[0];
    if (!file) { return; }
    var reader = new FileReader();
    reader.onload = function () {
      try { populate(JSON.parse(reader.result)); }
      catch (err) { message("could not parse rating file: " + err.message, true); }
    };
    reader.readAsText(file);
  });

  var exportBtn = el("button", { id: "rw-export", text: "Export rating JSON" }, root);
  var msg = el("div", { id: "rw-message", "class": "rw-message" }, root);

  function message(text, isError) {
    msg.textContent = text;
    msg.className = "rw-message" + (isError ? " rw-error" : "");
  }

  function populate(rating) {
    if (typeof rating.quality === "number") {
      slider.value = String(rating.quality);
      slider.dispatchEvent(new Event("input"));
    }
    if (rating.orientation) {
      orient.value = rating.orientation;
      state.orientation = rating.orientation;
    }
    Object.keys(rating.artifacts || {}).forEach(function (name) {
      if (name in artifactInputs) {
        artifactInputs[name].value = String(rating.artifacts[name]);
        state.artifacts[name] = rating.artifacts[name];
      }
    });
    if (rating.rater_id) {
      rater.value = rating.rater_id;
      state.rater_id = rating.rater_id;
    }
    state.prior_seconds = rating.seconds_spent || 0;
    message("loaded rating for " + rating.subject_id + "/" + rating.run_id, false);
  }

  function buildRating() {
    return {
      subject_id: meta.subject_id,
      run_id: meta.run_id,
      quality: state.quality,
      orientation: state.orientation,
      artifacts: state.artifacts,
      rater_id: state.rater_id || "anonymous",
      seconds_spent: state.prior_seconds + (Date.now() - state.opened_at) / 1000,
      timestamp: new Date().toISOString()
    };
  }

  exportBtn.addEventListener("click", function () {
    if (state.quality === null) {
      message("set the quality score before exporting", true);
      return;
    }
    var rating = buildRating();
    var blob = new Blob([JSON.stringify(rating, null, 1)],
                        { type: "application/json" });
    var a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = meta.subject_id + "_" + meta.run_id + "_rating.json";
    document.body.appendChild(a);
    a.click();
    document.body.removeChild(a);
    URL.revokeObjectURL(a.href);
    message("exported " + a.download + " (" + rangeName(rating.quality) + ")", false);
  });
})();
