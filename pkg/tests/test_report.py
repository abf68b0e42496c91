"""HTML report tests: self-containment, slice counting, determinism."""

import base64
import io
import json
import re

import numpy as np
import pytest
from PIL import Image

from stackqc.errors import EmptyRegion
from stackqc.iqm import default_catalog, extract_all_iqms
from stackqc.report import render_group_report, render_report

from conftest import make_mask, make_stack, textured_stack


@pytest.fixture(scope="module")
def rendered(tmp_path_factory):
    out = tmp_path_factory.mktemp("reports")
    rng = np.random.default_rng(0)
    vox = rng.uniform(5, 100, size=(16, 16, 10)).astype(np.float32)
    mask = np.zeros_like(vox, dtype=np.uint8)
    mask[4:12, 4:12, 3:8] = 1  # brain only in slices 3..7
    stack = make_stack(vox, subject="sub-07", run="run-2")
    brain = make_mask(mask)
    iqms = extract_all_iqms(stack, brain, default_catalog())
    path = render_report(stack, brain, iqms, out / "report.html",
                         timestamp="2024-06-01T00:00:00")
    return stack, brain, iqms, path


def test_mosaic_counts_only_brain_slices(rendered):
    _, _, _, path = rendered
    html = path.read_text()
    assert len(re.findall(r'alt="slice \d+"', html)) == 5
    for k in (3, 4, 5, 6, 7):
        assert f"z={k}" in html


def test_no_external_resources(rendered):
    _, _, _, path = rendered
    html = path.read_text()
    for attr in ("src", "href"):
        for match in re.findall(rf'{attr}="([^"]+)"', html):
            assert not match.startswith(("http://", "https://", "//")), match
            if attr == "src":
                assert match.startswith("data:image/png;base64,")


def test_two_through_plane_views(rendered):
    _, _, _, path = rendered
    html = path.read_text()
    assert len(re.findall(r'alt="through-plane view', html)) == 2


def test_iqm_table_and_json_island(rendered):
    _, _, iqms, path = rendered
    html = path.read_text()
    island = re.search(
        r'<script type="application/json" id="stack-meta">(.*?)</script>',
        html, re.S)
    meta = json.loads(island.group(1))
    assert meta["subject_id"] == "sub-07"
    assert meta["run_id"] == "run-2"
    schema = meta["rating_schema"]
    assert schema["quality_range"] == [0.0, 4.0]
    assert schema["exclude_threshold"] == 1.0
    assert len(schema["artifacts"]) == 6
    assert "slice_mae" in html and "rank_error" in html


def test_widget_inlined_and_no_network_calls(rendered):
    _, _, _, path = rendered
    html = path.read_text()
    assert 'id="rating-widget"' in html
    assert "Export rating JSON" in html
    for needle in ("fetch(", "XMLHttpRequest", "navigator.sendBeacon"):
        assert needle not in html


def test_rendering_deterministic(rendered, tmp_path):
    stack, brain, iqms, path = rendered
    again = render_report(stack, brain, iqms, tmp_path / "again.html",
                          timestamp="2024-06-01T00:00:00")
    assert path.read_bytes() == again.read_bytes()


def test_slice_pixels_match_windowing(rendered):
    stack, brain, _, path = rendered
    html = path.read_text()
    first_png = re.search(r'data:image/png;base64,([A-Za-z0-9+/=]+)', html).group(1)
    img = np.asarray(Image.open(io.BytesIO(base64.b64decode(first_png))))

    vals = stack.voxels[brain.voxels.astype(bool)]
    lo, hi = np.percentile(vals, [1, 99])
    plane = stack.voxels[:, :, 3].astype(np.float64)  # first brain slice
    expected = np.round(np.clip((plane - lo) / (hi - lo), 0, 1) * 255).astype(np.uint8)
    np.testing.assert_array_equal(img, expected)


def test_no_absolute_paths_leak(rendered, tmp_path):
    _, _, _, path = rendered
    html = path.read_text()
    assert "/tmp/" not in html and "/root/" not in html


def test_empty_mask_raises(tmp_path):
    stack, _ = textured_stack()
    empty = make_mask(np.zeros(stack.voxels.shape, dtype=np.uint8))
    from stackqc.iqm import extract_all_iqms as _e  # noqa: F401
    from stackqc.types import IQMVector

    iqms = IQMVector(("a",), np.array([1.0]))
    with pytest.raises(EmptyRegion):
        render_report(stack, empty, iqms, tmp_path / "x.html")


# --- group report ---


def test_group_report_rows_and_ratings(tmp_path):
    entries = [("sub-01", "run-1"), ("sub-01", "run-2"), ("sub-02", "run-1")]
    path = render_group_report(
        entries, tmp_path / "group.html",
        predictions={e: s for e, s in zip(entries, (3.2, 0.8, 2.0))},
        ratings={("sub-01", "run-1"): 3.0},
        timestamp="2024-06-01")
    html = path.read_text()
    assert html.count("<tr>") == 1 + 3  # header + three rows
    assert "3.00" in html  # the one populated rating
    assert html.count("exclude") >= 1


def test_group_report_empty_predictions(tmp_path):
    entries = [("sub-01", "run-1")]
    path = render_group_report(entries, tmp_path / "group.html")
    html = path.read_text()
    assert "sub-01" in html


def test_group_report_sortable_scores(tmp_path):
    entries = [("s1", "r1"), ("s2", "r1")]
    path = render_group_report(entries, tmp_path / "g.html",
                               predictions={("s1", "r1"): 1.5, ("s2", "r1"): 3.5})
    html = path.read_text()
    assert 'data-value="1.500000"' in html
    assert 'data-value="3.500000"' in html
