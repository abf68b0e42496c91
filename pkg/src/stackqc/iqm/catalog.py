"""The feature catalog: which IQMs exist, in which variations, in which order.

The canonical catalog is generated as a cross-product of the slice-difference
metrics with their region / window / aggregation / mask-combination
variations, plus the summary, entropy, bias, filter and mask-shape metrics.
Feature order is the catalog order and is stable for a given catalog id.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import SchemaError, StackQCError
from ..types import BrainMask, IQMVector, Stack
from . import intensity, shape

CATALOG_ID = "stackqc-default"
CATALOG_VERSION = 1

#: Mask-derived features previously used on their own for stack QC; serves
#: as the reduced baseline feature set in evaluations.
BASE_FEATURES = ("rank_error", "rank_error_full", "mask_volume",
                 "centroid", "centroid_full")

_SLICE_METRICS = ("mae", "nmae", "rmse", "nrmse", "ncc", "psnr", "ssim",
                  "mi", "nmi", "joint_entropy")


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    metric: str
    params: dict = field(default_factory=dict, hash=False, compare=False)


@dataclass
class FeatureCatalog:
    catalog_id: str
    version: int
    features: list[FeatureSpec]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    def __len__(self):
        return len(self.features)

    def to_json(self) -> str:
        doc = {
            "catalog_id": self.catalog_id,
            "version": self.version,
            "features": [
                {"name": f.name, "metric": f.metric, "params": f.params}
                for f in self.features
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def from_json(cls, text: str) -> "FeatureCatalog":
        doc = json.loads(text)
        for key in ("catalog_id", "version", "features"):
            if key not in doc:
                raise SchemaError(f"catalog is missing {key!r}")
        feats = [FeatureSpec(f["name"], f["metric"], f.get("params", {}))
                 for f in doc["features"]]
        names = [f.name for f in feats]
        if len(set(names)) != len(names):
            raise SchemaError("catalog feature names are not unique")
        return cls(doc["catalog_id"], doc["version"], feats)

    @classmethod
    def load(cls, path) -> "FeatureCatalog":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def default_catalog() -> FeatureCatalog:
    feats: list[FeatureSpec] = []

    def add(name, metric, **params):
        feats.append(FeatureSpec(name, metric, params))

    for metric in _SLICE_METRICS:
        combines = ("union", "intersection") if metric in intensity.INFO_METRICS \
            else ("union",)
        for combine in combines:
            for region in ("center", "full"):
                for mode in ("pairwise", "window"):
                    for aggregate in ("mean", "median"):
                        name = f"slice_{metric}"
                        if combine == "intersection":
                            name += "_inter"
                        if region == "full":
                            name += "_full"
                        if mode == "window":
                            name += "_window"
                        if aggregate == "median":
                            name += "_median"
                        add(name, "slice", pair_metric=metric, region=region,
                            mode=mode, aggregate=aggregate, combine=combine,
                            window=intensity.DEFAULT_WINDOW)

    for stat in ("mean", "median", "std", "p5", "p95", "cov", "kurtosis"):
        add(f"sstats_{stat}", "sstats", stat=stat)

    add("entropy", "entropy", region="mask", bins=intensity.ENTROPY_BINS)
    add("entropy_full", "entropy", region="whole_image", bins=intensity.ENTROPY_BINS)

    add("bias", "bias")

    for filt in ("laplace", "sobel"):
        add(f"{filt}_image", "filter_image", filter=filt, region="mask")
        add(f"{filt}_image_full", "filter_image", filter=filt, region="full")

    add("mask_volume", "mask_volume")
    add("centroid", "centroid", region="center", stat="mean")
    add("centroid_max", "centroid", region="center", stat="max")
    add("centroid_full", "centroid", region="full", stat="mean")
    add("centroid_full_max", "centroid", region="full", stat="max")
    add("closing_mask", "closing_mask", region="center",
        radius=shape.DEFAULT_CLOSING_RADIUS)
    add("closing_mask_full", "closing_mask", region="full",
        radius=shape.DEFAULT_CLOSING_RADIUS)
    add("laplace_mask", "filter_mask", filter="laplace")
    add("sobel_mask", "filter_mask", filter="sobel")
    add("rank_error", "rank_error", region="center",
        threshold=shape.DEFAULT_RANK_THRESHOLD)
    add("rank_error_full", "rank_error", region="full",
        threshold=shape.DEFAULT_RANK_THRESHOLD)

    return FeatureCatalog(CATALOG_ID, CATALOG_VERSION, feats)


class _Extractor:
    """Evaluates catalog entries with shared per-stack caches."""

    def __init__(self, stack: Stack, mask: BrainMask):
        self.stack = stack
        self.mask = mask
        self._pair_tables: dict[str, intensity.SlicePairTable] = {}
        self._sstats: dict[str, float] | None = None

    def _pairs(self, region: str) -> intensity.SlicePairTable:
        if region not in self._pair_tables:
            self._pair_tables[region] = intensity.SlicePairTable(
                self.stack, self.mask, region)
        return self._pair_tables[region]

    def evaluate(self, spec: FeatureSpec) -> float:
        p = spec.params
        if spec.metric == "slice":
            key = p["pair_metric"]
            if key in intensity.INFO_METRICS and p.get("combine") == "intersection":
                key += "_inter"
            return self._pairs(p["region"]).aggregate(
                key, p["mode"], p["aggregate"], p.get("window", intensity.DEFAULT_WINDOW))
        if spec.metric == "sstats":
            if self._sstats is None:
                self._sstats = intensity.summary_stats(self.stack, self.mask)
            return self._sstats[p["stat"]]
        if spec.metric == "entropy":
            return intensity.image_entropy(self.stack, self.mask,
                                           region=p["region"], bins=p["bins"])
        if spec.metric == "bias":
            return intensity.bias_level(self.stack, self.mask)
        if spec.metric == "filter_image":
            return intensity.sharpness_filters(self.stack, self.mask,
                                               filter=p["filter"], region=p["region"])
        if spec.metric == "mask_volume":
            return shape.mask_volume(self.mask)
        if spec.metric == "centroid":
            mean_d, max_d = shape.centroid_features(
                self.mask, self.stack.through_plane_axis, region=p["region"],
                spacing=self.stack.spacing)
            return mean_d if p["stat"] == "mean" else max_d
        if spec.metric == "closing_mask":
            return shape.closing_mask(self.mask, self.stack.through_plane_axis,
                                      region=p["region"], radius=p["radius"])
        if spec.metric == "filter_mask":
            return shape.mask_sharpness(self.mask, filter=p["filter"])
        if spec.metric == "rank_error":
            return shape.rank_error(self.stack, self.mask, region=p["region"],
                                    threshold=p["threshold"])
        raise SchemaError(f"unknown catalog metric {spec.metric!r}")


def extract_all_iqms(stack: Stack, mask: BrainMask,
                     catalog: FeatureCatalog | None = None) -> IQMVector:
    """Evaluate every catalog entry in order.

    Entries whose preconditions fail (e.g. slice-pair metrics on a
    single-slice stack) are recorded as missing rather than raising; any
    non-finite result is treated the same way so NaN never escapes silently.
    """
    if catalog is None:
        catalog = default_catalog()
    extractor = _Extractor(stack, mask)
    values = np.empty(len(catalog))
    missing: list[str] = []
    for i, spec in enumerate(catalog.features):
        try:
            value = extractor.evaluate(spec)
        except StackQCError:
            value = np.nan
        if not np.isfinite(value):
            value = np.nan
            missing.append(spec.name)
        values[i] = value
    return IQMVector(names=catalog.names, values=values, missing=tuple(missing))
