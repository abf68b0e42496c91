"""Self-contained HTML QA reports.

Each per-stack report embeds every slice with brain content, both orthogonal
through-plane views, the stack's quality metrics and the rating widget. All
images are losslessly PNG-encoded and inlined as base64; the widget script
and styles are inlined too, so a report works offline from file://.
"""

from __future__ import annotations

import base64
import importlib.resources
import io
import json
from pathlib import Path

import numpy as np
from jinja2 import Template
from PIL import Image

from . import __version__
from .errors import EmptyRegion, IoError
from .types import ARTIFACT_FLAGS, EXCLUDE_THRESHOLD, ORIENTATIONS, BrainMask, IQMVector, Stack

_PAGE = Template("""<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>QA report {{ subject_id }} {{ run_id }}</title>
<style>
body { font-family: sans-serif; margin: 1.5em; background: #fafafa; color: #222; }
h1 { font-size: 1.4em; } h2 { font-size: 1.1em; margin-top: 1.4em; }
table.meta, table.iqms { border-collapse: collapse; }
table.meta td, table.iqms td, table.iqms th { border: 1px solid #ccc; padding: 2px 8px; }
table.iqms th { background: #eee; text-align: left; }
.mosaic img, .views img { image-rendering: pixelated; border: 1px solid #888;
  margin: 2px; background: #000; }
.mosaic figure, .views figure { display: inline-block; margin: 2px; text-align: center; }
.mosaic figcaption, .views figcaption { font-size: 0.7em; color: #555; }
#rating-widget { border: 1px solid #aaa; background: #fff; padding: 1em;
  max-width: 34em; margin-top: 1em; }
.rw-row { margin: 0.4em 0; display: flex; gap: 0.6em; align-items: center; }
.rw-row label { min-width: 11em; }
.rw-band { font-weight: bold; }
.rw-exclude { color: #b00020; } .rw-poor { color: #c06000; }
.rw-acceptable { color: #707000; } .rw-excellent { color: #107010; }
.rw-message { margin-top: 0.6em; font-size: 0.9em; }
.rw-error { color: #b00020; }
details.iqm-block { margin-top: 0.6em; }
</style>
</head>
<body>
<h1>Stack QA report: {{ subject_id }} / {{ run_id }}</h1>
<table class="meta">
<tr><td>subject</td><td>{{ subject_id }}</td></tr>
<tr><td>run</td><td>{{ run_id }}</td></tr>
<tr><td>shape</td><td>{{ shape }}</td></tr>
<tr><td>spacing [mm]</td><td>{{ spacing }}</td></tr>
<tr><td>through-plane axis</td><td>{{ through_plane_axis }}</td></tr>
<tr><td>brain volume [mm&sup3;]</td><td>{{ mask_volume }}</td></tr>
<tr><td>toolkit</td><td>stackqc {{ version }}</td></tr>
{% if timestamp %}<tr><td>generated</td><td>{{ timestamp }}</td></tr>{% endif %}
</table>

<h2>Slices with brain content ({{ slices|length }})</h2>
<div class="mosaic">
{% for s in slices %}<figure><img src="data:image/png;base64,{{ s.png }}"
 width="{{ s.w }}" height="{{ s.h }}" alt="slice {{ s.index }}">
<figcaption>z={{ s.index }}</figcaption></figure>{% endfor %}
</div>

<h2>Through-plane views</h2>
<div class="views">
{% for v in views %}<figure><img src="data:image/png;base64,{{ v.png }}"
 width="{{ v.w }}" height="{{ v.h }}" alt="{{ v.name }}">
<figcaption>{{ v.name }}</figcaption></figure>{% endfor %}
</div>

<h2>Image quality metrics</h2>
<details class="iqm-block" open>
<summary>{{ iqm_rows|length }} metrics</summary>
<table class="iqms">
<tr><th>metric</th><th>value</th></tr>
{% for row in iqm_rows %}<tr><td>{{ row.name }}</td><td>{{ row.value }}</td></tr>
{% endfor %}
</table>
</details>

<div id="rating-widget"></div>

<script type="application/json" id="stack-meta">{{ stack_meta }}</script>
<script>{{ widget_js }}</script>
</body>
</html>
""")


def _window(stack: Stack, mask: BrainMask) -> tuple[float, float]:
    vals = stack.voxels[mask.voxels.astype(bool)]
    lo, hi = np.percentile(vals, [1, 99])
    if hi <= lo:
        hi = lo + 1.0
    return float(lo), float(hi)


def _to_png(plane: np.ndarray, lo: float, hi: float) -> str:
    scaled = np.clip((np.asarray(plane, dtype=np.float64) - lo) / (hi - lo), 0, 1)
    img = Image.fromarray((scaled * 255).round().astype(np.uint8), mode="L")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _widget_js() -> str:
    ref = importlib.resources.files("stackqc") / "assets" / "rating_widget.js"
    return ref.read_text(encoding="utf-8")


def rating_schema() -> dict:
    return {
        "quality_range": [0.0, 4.0],
        "step": 0.05,
        "exclude_threshold": EXCLUDE_THRESHOLD,
        "orientations": list(ORIENTATIONS),
        "artifacts": list(ARTIFACT_FLAGS),
        "grades": [0, 3],
    }


def render_report(stack: Stack, mask: BrainMask, iqms: IQMVector, out_path,
                  timestamp: str = "", pixels_per_mm: float = 3.0) -> Path:
    """Write one self-contained HTML report; returns the output path."""
    mask.require_nonempty()
    axis = stack.through_plane_axis
    in_plane = stack.in_plane_axes()
    lo, hi = _window(stack, mask)

    slices = []
    for k in range(stack.voxels.shape[axis]):
        mask_slice = np.take(mask.voxels, k, axis=axis)
        if not mask_slice.any():
            continue
        plane = np.take(stack.voxels, k, axis=axis)
        h_mm = plane.shape[0] * stack.spacing[in_plane[0]]
        w_mm = plane.shape[1] * stack.spacing[in_plane[1]]
        slices.append({
            "index": k,
            "png": _to_png(plane, lo, hi),
            "w": int(round(w_mm * pixels_per_mm)),
            "h": int(round(h_mm * pixels_per_mm)),
        })
    if not slices:
        raise EmptyRegion("no slices contain brain voxels")

    centroid = [float(c.mean()) for c in np.nonzero(mask.voxels)]
    views = []
    for ax in in_plane:
        section = np.take(stack.voxels, int(round(centroid[ax])), axis=ax)
        kept = [a for a in range(3) if a != ax]
        h_mm = section.shape[0] * stack.spacing[kept[0]]
        w_mm = section.shape[1] * stack.spacing[kept[1]]
        views.append({
            "name": f"through-plane view (axis {ax} section)",
            "png": _to_png(section, lo, hi),
            "w": int(round(w_mm * pixels_per_mm)),
            "h": int(round(h_mm * pixels_per_mm)),
        })

    iqm_rows = [{"name": name,
                 "value": "NA" if np.isnan(value) else f"{value:.6g}"}
                for name, value in zip(iqms.names, iqms.values)]

    stack_meta = json.dumps({
        "subject_id": stack.subject_id,
        "run_id": stack.run_id,
        "toolkit_version": __version__,
        "rating_schema": rating_schema(),
    }, sort_keys=True)

    dx, dy, dz = stack.spacing
    html = _PAGE.render(
        subject_id=stack.subject_id,
        run_id=stack.run_id,
        shape=f"{stack.voxels.shape[0]} x {stack.voxels.shape[1]} x {stack.voxels.shape[2]}",
        spacing=f"{dx:g} x {dy:g} x {dz:g}",
        through_plane_axis=axis,
        mask_volume=f"{mask.count() * dx * dy * dz:.0f}",
        version=__version__,
        timestamp=timestamp,
        slices=slices,
        views=views,
        iqm_rows=iqm_rows,
        stack_meta=stack_meta,
        widget_js=_widget_js(),
    )
    out_path = Path(out_path)
    try:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(html, encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write report {out_path}: {exc}") from None
    return out_path


_GROUP_PAGE = Template("""<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>Group QA report</title>
<style>
body { font-family: sans-serif; margin: 1.5em; }
table { border-collapse: collapse; }
td, th { border: 1px solid #ccc; padding: 3px 9px; }
th { background: #eee; cursor: pointer; }
tr:nth-child(even) { background: #f6f6f6; }
.exclude { color: #b00020; font-weight: bold; }
.include { color: #107010; }
</style>
</head>
<body>
<h1>Group QA report ({{ rows|length }} stacks)</h1>
{% if timestamp %}<p>generated {{ timestamp }}</p>{% endif %}
<table id="group">
<thead><tr>
<th>subject</th><th>run</th><th>predicted score</th><th>predicted label</th>
<th>rating</th>{% for c in iqm_columns %}<th>{{ c }}</th>{% endfor %}<th>report</th>
</tr></thead>
<tbody>
{% for row in rows %}<tr>
<td>{{ row.subject_id }}</td><td>{{ row.run_id }}</td>
<td data-value="{{ row.score_sort }}">{{ row.score }}</td>
<td class="{{ row.label }}">{{ row.label }}</td>
<td>{{ row.rating }}</td>
{% for v in row.iqms %}<td>{{ v }}</td>{% endfor %}
<td>{% if row.link %}<a href="{{ row.link }}">open</a>{% endif %}</td>
</tr>
{% endfor %}
</tbody>
</table>
<script>
(function () {
  var table = document.getElementById("group");
  table.querySelectorAll("th").forEach(function (th, col) {
    th.addEventListener("click", function () {
      var rows = Array.from(table.tBodies[0].rows);
      var asc = th.dataset.asc !== "true";
      th.dataset.asc = asc;
      rows.sort(function (a, b) {
        var x = a.cells[col].dataset.value || a.cells[col].textContent;
        var y = b.cells[col].dataset.value || b.cells[col].textContent;
        var nx = parseFloat(x), ny = parseFloat(y);
        if (!isNaN(nx) && !isNaN(ny)) { return asc ? nx - ny : ny - nx; }
        return asc ? x.localeCompare(y) : y.localeCompare(x);
      });
      rows.forEach(function (r) { table.tBodies[0].appendChild(r); });
    });
  });
})();
</script>
</body>
</html>
""")


def render_group_report(entries, out_path, predictions=None, ratings=None,
                        iqm_values=None, iqm_columns=(), report_links=None,
                        timestamp: str = "", task: str = "regression") -> Path:
    """Summary table over all stacks with optional predictions and ratings.

    ``predictions`` maps (subject, run) to a quality score in [0, 4]
    (regression) or an include probability (classification, labeled at 0.5);
    ``ratings`` maps to a human quality value.
    """
    predictions = predictions or {}
    ratings = ratings or {}
    iqm_values = iqm_values or {}
    report_links = report_links or {}
    boundary = EXCLUDE_THRESHOLD if task == "regression" else 0.5
    rows = []
    for key in entries:
        subject_id, run_id = key
        score = predictions.get(key)
        rating = ratings.get(key)
        if score is None:
            label, score_text, sort = "", "", "-1"
        else:
            label = "exclude" if score <= boundary else "include"
            score_text, sort = f"{score:.3f}", f"{score:.6f}"
        rows.append({
            "subject_id": subject_id,
            "run_id": run_id,
            "score": score_text,
            "score_sort": sort,
            "label": label,
            "rating": "" if rating is None else f"{rating:.2f}",
            "iqms": [f"{v:.4g}" for v in iqm_values.get(key, [])],
            "link": report_links.get(key, ""),
        })
    html = _GROUP_PAGE.render(rows=rows, iqm_columns=list(iqm_columns),
                              timestamp=timestamp)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(html, encoding="utf-8")
    return out_path
