"""Binary serialization of fitted pipelines and predictors.

File layout: 4 magic bytes ``SQCB``, uint32 LE format version, uint64 LE
JSON length, a JSON metadata document (model spec, pipeline parameters,
array manifest), then one length-prefixed little-endian C-order block per
array in manifest order. Round-trips are bit-exact.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ParseError, SchemaError, Unsupported, VersionError
from ..pipeline import PCA, FeaturePipeline, PipelineConfig
from . import ModelSpec
from .ensembles import AdaBoost, ExtraTrees, GradientBoosting, RandomForest
from .linear import ConstantModel, LinearRegression, LogisticRegression
from .tree import DecisionTree

MAGIC = b"SQCB"
FORMAT_VERSION = 1


@dataclass
class ModelBundle:
    pipeline: FeaturePipeline
    model: object
    spec: ModelSpec
    catalog_id: str
    format_version: int = FORMAT_VERSION


# ---------------------------------------------------------------------------
# tree (de)serialization
# ---------------------------------------------------------------------------

def _pack_trees(trees: list[DecisionTree], prefix: str, arrays: dict) -> dict:
    arrays[f"{prefix}.feature"] = np.concatenate([t.feature_ for t in trees])
    arrays[f"{prefix}.threshold"] = np.concatenate([t.threshold_ for t in trees])
    arrays[f"{prefix}.left"] = np.concatenate([t.left_ for t in trees])
    arrays[f"{prefix}.right"] = np.concatenate([t.right_ for t in trees])
    arrays[f"{prefix}.value"] = np.concatenate([t.value_ for t in trees])
    arrays[f"{prefix}.importances"] = np.stack([t.importances_ for t in trees])
    arrays[f"{prefix}.node_counts"] = np.array([t.n_nodes for t in trees],
                                               dtype=np.int64)
    return arrays


def _unpack_trees(prefix: str, arrays: dict, criterion: str) -> list[DecisionTree]:
    counts = arrays[f"{prefix}.node_counts"]
    offsets = np.concatenate([[0], np.cumsum(counts)])
    trees = []
    for i, count in enumerate(counts):
        lo, hi = offsets[i], offsets[i] + count
        tree = DecisionTree(criterion=criterion)
        tree.feature_ = arrays[f"{prefix}.feature"][lo:hi]
        tree.threshold_ = arrays[f"{prefix}.threshold"][lo:hi]
        tree.left_ = arrays[f"{prefix}.left"][lo:hi]
        tree.right_ = arrays[f"{prefix}.right"][lo:hi]
        tree.value_ = arrays[f"{prefix}.value"][lo:hi]
        tree.importances_ = arrays[f"{prefix}.importances"][i]
        trees.append(tree)
    return trees


def _criterion(task: str) -> str:
    return "gini" if task == "classification" else "variance"


def _predictor_state(model) -> tuple[dict, dict]:
    arrays: dict[str, np.ndarray] = {}
    if isinstance(model, (LinearRegression, LogisticRegression)):
        kind = "linear" if isinstance(model, LinearRegression) else "logistic"
        meta = {"kind": kind, "intercept": model.intercept_, "l2": model.l2,
                "n_features": model.n_features_}
        if kind == "linear":
            meta["rank_deficient"] = bool(model.rank_deficient_)
        arrays["coef"] = model.coef_
        arrays["train_std"] = model.train_std_
        return meta, arrays
    if isinstance(model, ConstantModel):
        return {"kind": "constant", "value": model.value,
                "n_features": model.n_features_}, arrays
    if isinstance(model, GradientBoosting):
        meta = {"kind": "gradient_boosting", "task": model.task,
                "base_score": model.base_score_,
                "learning_rate": model.learning_rate,
                "n_features": model.n_features_}
        _pack_trees(model.trees_, "trees", arrays)
        return meta, arrays
    if isinstance(model, AdaBoost):
        meta = {"kind": "adaboost", "n_features": model.n_features_}
        _pack_trees(model.stumps_, "trees", arrays)
        arrays["alphas"] = np.array(model.alphas_)
        return meta, arrays
    if isinstance(model, RandomForest):  # covers ExtraTrees
        kind = "extra_trees" if isinstance(model, ExtraTrees) else "random_forest"
        meta = {"kind": kind, "task": model.task, "n_features": model.n_features_}
        _pack_trees(model.trees_, "trees", arrays)
        return meta, arrays
    raise Unsupported(f"cannot serialize {type(model).__name__}")


def _restore_predictor(meta: dict, arrays: dict):
    kind = meta["kind"]
    if kind in ("linear", "logistic"):
        model = LinearRegression(l2=meta["l2"]) if kind == "linear" \
            else LogisticRegression(l2=meta["l2"])
        model.intercept_ = meta["intercept"]
        model.coef_ = arrays["coef"]
        model.train_std_ = arrays["train_std"]
        model.n_features_ = meta["n_features"]
        if kind == "linear":
            model.rank_deficient_ = meta["rank_deficient"]
        return model
    if kind == "constant":
        model = ConstantModel(value=meta["value"])
        model.n_features_ = meta["n_features"]
        return model
    if kind == "gradient_boosting":
        model = GradientBoosting(task=meta["task"],
                                 learning_rate=meta["learning_rate"])
        model.base_score_ = meta["base_score"]
        model.trees_ = _unpack_trees("trees", arrays, "variance")
        model.n_features_ = meta["n_features"]
        return model
    if kind == "adaboost":
        model = AdaBoost()
        model.stumps_ = _unpack_trees("trees", arrays, "gini")
        model.alphas_ = arrays["alphas"].tolist()
        model.n_features_ = meta["n_features"]
        return model
    if kind in ("random_forest", "extra_trees"):
        cls = ExtraTrees if kind == "extra_trees" else RandomForest
        model = cls(task=meta["task"])
        model.trees_ = _unpack_trees("trees", arrays, _criterion(meta["task"]))
        model.n_features_ = meta["n_features"]
        return model
    raise SchemaError(f"unknown predictor kind {kind!r}")


# ---------------------------------------------------------------------------
# pipeline (de)serialization
# ---------------------------------------------------------------------------

def _pipeline_state(pipeline: FeaturePipeline) -> tuple[dict, dict]:
    meta = {
        "config": pipeline.config.to_dict(),
        "input_columns": list(pipeline.input_columns_),
        "selected_columns": list(pipeline.selected_columns_),
        "dropped_zero_variance": list(pipeline.dropped_zero_variance_),
        "dropped_correlated": list(pipeline.dropped_correlated_),
        "output_dim": pipeline.output_dim_,
        "has_pca": pipeline.pca_ is not None,
    }
    arrays = {
        "pipe.medians": pipeline.medians_,
        "pipe.global_mean": pipeline.global_mean_,
        "pipe.global_std": pipeline.global_std_,
        "pipe.zero_var_mask": pipeline.zero_var_mask_.astype(np.uint8),
    }
    if pipeline.pca_ is not None:
        arrays["pipe.pca_mean"] = pipeline.pca_.mean_
        arrays["pipe.pca_components"] = pipeline.pca_.components_
    return meta, arrays


def _restore_pipeline(meta: dict, arrays: dict) -> FeaturePipeline:
    pipeline = FeaturePipeline(PipelineConfig.from_dict(meta["config"]))
    pipeline.input_columns_ = tuple(meta["input_columns"])
    pipeline.selected_columns_ = tuple(meta["selected_columns"])
    pipeline.dropped_zero_variance_ = tuple(meta["dropped_zero_variance"])
    pipeline.dropped_correlated_ = tuple(meta["dropped_correlated"])
    pipeline.output_dim_ = meta["output_dim"]
    pipeline.medians_ = arrays["pipe.medians"]
    pipeline.global_mean_ = arrays["pipe.global_mean"]
    pipeline.global_std_ = arrays["pipe.global_std"]
    pipeline.zero_var_mask_ = arrays["pipe.zero_var_mask"].astype(bool)
    pipeline.pca_ = None
    if meta["has_pca"]:
        pca = PCA()
        pca.mean_ = arrays["pipe.pca_mean"]
        pca.components_ = arrays["pipe.pca_components"]
        pipeline.pca_ = pca
    return pipeline


# ---------------------------------------------------------------------------
# file format
# ---------------------------------------------------------------------------

def save_bundle(bundle: ModelBundle, path) -> None:
    predictor_meta, predictor_arrays = _predictor_state(bundle.model)
    pipeline_meta, pipeline_arrays = _pipeline_state(bundle.pipeline)
    arrays = {**{f"model.{k}": v for k, v in predictor_arrays.items()},
              **pipeline_arrays}
    manifest = [{"key": key,
                 "dtype": str(np.ascontiguousarray(val).dtype.str),
                 "shape": list(val.shape)}
                for key, val in arrays.items()]
    meta = {
        "format_version": bundle.format_version,
        "spec": bundle.spec.to_dict(),
        "catalog_id": bundle.catalog_id,
        "pipeline": pipeline_meta,
        "predictor": predictor_meta,
        "arrays": manifest,
    }
    blob = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", bundle.format_version))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for entry in manifest:
            data = np.ascontiguousarray(arrays[entry["key"]]).astype(
                entry["dtype"], copy=False).tobytes()
            fh.write(struct.pack("<Q", len(data)))
            fh.write(data)


def load_bundle(path) -> ModelBundle:
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:4] != MAGIC:
        raise ParseError(0, "not a model bundle (bad magic)")
    (version,) = struct.unpack("<I", raw[4:8])
    if version != FORMAT_VERSION:
        raise VersionError(f"bundle format {version}, expected {FORMAT_VERSION}")
    (json_len,) = struct.unpack("<Q", raw[8:16])
    if len(raw) < 16 + json_len:
        raise ParseError(len(raw), "truncated metadata block")
    try:
        meta = json.loads(raw[16:16 + json_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(16, f"corrupt metadata: {exc}") from None
    pos = 16 + json_len
    arrays = {}
    for entry in meta["arrays"]:
        if len(raw) < pos + 8:
            raise ParseError(pos, "truncated array header")
        (length,) = struct.unpack("<Q", raw[pos:pos + 8])
        pos += 8
        if len(raw) < pos + length:
            raise ParseError(pos, f"truncated array block {entry['key']}")
        arr = np.frombuffer(raw[pos:pos + length], dtype=np.dtype(entry["dtype"]))
        arrays[entry["key"]] = arr.reshape(entry["shape"]).copy()
        pos += length
    predictor_arrays = {k[len("model."):]: v for k, v in arrays.items()
                        if k.startswith("model.")}
    pipeline_arrays = {k: v for k, v in arrays.items() if k.startswith("pipe.")}
    model = _restore_predictor(meta["predictor"], predictor_arrays)
    pipeline = _restore_pipeline(meta["pipeline"], pipeline_arrays)
    spec = ModelSpec.from_dict(meta["spec"])
    return ModelBundle(pipeline=pipeline, model=model, spec=spec,
                       catalog_id=meta["catalog_id"],
                       format_version=meta["format_version"])
