"""Feature pipeline: raw IQM tables to model-ready matrices.

Stage order at fit time: median imputation, standard scaling (subject-wise
or global), exact zero-variance removal, greedy correlation pruning,
shadow-feature selection, optional PCA. Every stage fits on training rows
only; transforming held-out rows reuses the frozen parameters except for
subject-wise scaling, which is by definition recomputed within each new
subject (single-stack subjects fall back to the fitted global scaler).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateFeatures,
    DegenerateLabels,
    EmptyDataset,
    SchemaError,
)
from .models import ExtraTrees


@dataclass
class FeatureMatrix:
    """Per-stack feature rows with identity and grouping metadata."""

    values: np.ndarray
    row_keys: list[tuple[str, str]]
    column_names: tuple[str, ...]
    group_ids: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise SchemaError("feature matrix must be 2D")
        if self.values.shape[1] != len(self.column_names):
            raise SchemaError("column count does not match column names")
        if len(set(self.column_names)) != len(self.column_names):
            raise SchemaError("column names must be unique")
        if self.values.shape[0] != len(self.row_keys):
            raise SchemaError("row count does not match row keys")
        if not self.group_ids:
            self.group_ids = [subject for subject, _ in self.row_keys]

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    def select(self, names) -> "FeatureMatrix":
        index = {n: i for i, n in enumerate(self.column_names)}
        missing = [n for n in names if n not in index]
        if missing:
            raise SchemaError(f"unknown feature columns: {missing}")
        cols = [index[n] for n in names]
        return FeatureMatrix(self.values[:, cols], list(self.row_keys),
                             tuple(names), list(self.group_ids))

    def take_rows(self, rows) -> "FeatureMatrix":
        rows = np.asarray(rows)
        return FeatureMatrix(self.values[rows],
                             [self.row_keys[i] for i in rows],
                             self.column_names,
                             [self.group_ids[i] for i in rows])


@dataclass
class PipelineConfig:
    corr_threshold: float | None = None  # 0.8, 0.9 or disabled
    winnow: bool = False
    pca: bool = False
    scaling: str = "subject_wise"
    seed: int = 0

    def __post_init__(self):
        if self.corr_threshold is not None and not 0.0 < self.corr_threshold <= 1.0:
            raise ValueError("corr_threshold must be in (0, 1] or None")
        if self.scaling not in ("subject_wise", "global"):
            raise ValueError(f"unknown scaling mode {self.scaling!r}")

    def describe(self) -> str:
        corr = "off" if self.corr_threshold is None else self.corr_threshold
        return (f"corr={corr},winnow={'on' if self.winnow else 'off'},"
                f"pca={'on' if self.pca else 'off'},scaling={self.scaling}")

    def to_dict(self) -> dict:
        return {"corr_threshold": self.corr_threshold, "winnow": self.winnow,
                "pca": self.pca, "scaling": self.scaling, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        return cls(**d)


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------

def scale_columns(values: np.ndarray, group_ids, mode: str,
                  global_mean: np.ndarray, global_std: np.ndarray) -> np.ndarray:
    """Standard-scale columns globally or within each subject group.

    Columns with zero variance inside a group map to 0. Groups with a single
    row use the fitted global statistics so a lone prediction stack is still
    scalable.
    """
    if mode == "global":
        std = np.where(global_std > 0, global_std, 1.0)
        return (values - global_mean) / std
    out = np.empty_like(values)
    groups = np.asarray(group_ids)
    for group in np.unique(groups):
        rows = np.nonzero(groups == group)[0]
        block = values[rows]
        if len(rows) == 1:
            std = np.where(global_std > 0, global_std, 1.0)
            out[rows] = (block - global_mean) / std
            continue
        mean = block.mean(axis=0)
        std = block.std(axis=0)
        scaled = np.zeros_like(block)
        nz = std > 0
        scaled[:, nz] = (block[:, nz] - mean[nz]) / std[nz]
        out[rows] = scaled
    return out


def prune_correlated(values: np.ndarray, threshold: float | None) -> np.ndarray:
    """Boolean keep-mask: greedy first-kept-wins scan in column order.

    A column is dropped when its absolute Pearson correlation with any
    already-kept column exceeds the threshold.
    """
    p = values.shape[1]
    if threshold is None:
        return np.ones(p, dtype=bool)
    corr = np.corrcoef(values, rowvar=False)
    corr = np.nan_to_num(np.abs(corr), nan=0.0)
    keep = np.ones(p, dtype=bool)
    for j in range(p):
        if not keep[j]:
            continue
        later = np.arange(j + 1, p)
        drop = later[corr[j, later] > threshold]
        keep[drop] = False
    return keep


def winnow_select(values: np.ndarray, y: np.ndarray, task: str, seed: int,
                  n_trees: int = 100, rounds: int = 5,
                  min_samples_leaf: int = 5) -> np.ndarray:
    """Shadow-feature selection with extremely randomized trees.

    Each round augments the surviving features with row-permuted copies,
    fits an extra-trees model and keeps the real features whose mean
    impurity importance strictly exceeds the best shadow importance. The
    returned keep-mask is never empty: if a round eliminates everything the
    top-5 features of that round are kept instead.
    """
    values = np.asarray(values, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = values.shape
    if n < 10:
        raise EmptyDataset("winnow selection needs at least 10 rows")
    if task == "classification":
        if np.unique(y).size < 2:
            raise DegenerateLabels("single-class labels")
    elif y.std() == 0:
        raise DegenerateLabels("zero-variance labels")

    kept = np.arange(p)
    for round_no in range(rounds):
        rng = np.random.default_rng(np.random.SeedSequence((seed, round_no)))
        sub = values[:, kept]
        shadows = np.column_stack([sub[rng.permutation(n), j]
                                   for j in range(sub.shape[1])])
        augmented = np.hstack([sub, shadows])
        model = ExtraTrees(task=task, n_trees=n_trees,
                           min_samples_leaf=min_samples_leaf,
                           seed=int(rng.integers(0, 2 ** 31)))
        model.fit(augmented, y)
        imp = model.feature_importances()
        real = imp[: sub.shape[1]]
        shadow_max = imp[sub.shape[1]:].max()
        survivors = real > shadow_max
        if not survivors.any():
            top = np.argsort(-real, kind="stable")[: min(5, len(real))]
            kept = kept[np.sort(top)]
            break
        kept = kept[survivors]
    mask = np.zeros(p, dtype=bool)
    mask[kept] = True
    return mask


class PCA:
    """Mean-centered PCA keeping the smallest component count whose
    explained-variance ratio reaches ``variance_kept``."""

    def __init__(self, variance_kept: float = 0.95):
        self.variance_kept = float(variance_kept)

    def fit(self, values: np.ndarray) -> "PCA":
        values = np.asarray(values, dtype=np.float64)
        self.mean_ = values.mean(axis=0)
        centered = values - self.mean_
        scale = max(1.0, float(np.abs(values).max()))
        if not np.any(np.abs(centered) > 1e-12 * scale):
            raise DegenerateFeatures("matrix has rank 0 after centering")
        u, s, vt = np.linalg.svd(centered, full_matrices=False)
        explained = s * s
        total = explained.sum()
        ratios = np.cumsum(explained) / total
        k = int(np.searchsorted(ratios, self.variance_kept) + 1)
        k = min(k, len(s))
        # sign convention: largest-magnitude loading of each component positive
        for i in range(k):
            j = np.argmax(np.abs(vt[i]))
            if vt[i, j] < 0:
                vt[i] = -vt[i]
        self.components_ = vt[:k].copy()
        self.explained_variance_ = explained[:k] / max(len(values) - 1, 1)
        self.explained_ratio_ = explained[:k] / total
        return self

    def transform(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=np.float64) - self.mean_) @ self.components_.T


# ---------------------------------------------------------------------------
# the pipeline
# ---------------------------------------------------------------------------

class FeaturePipeline:
    """Fitted preprocessing chain, reusable on prediction data."""

    def __init__(self, config: PipelineConfig):
        self.config = config

    def fit(self, matrix: FeatureMatrix, y=None, task: str = "regression"
            ) -> "FeaturePipeline":
        if matrix.n_rows == 0:
            raise EmptyDataset("cannot fit a pipeline on an empty matrix")
        self.input_columns_ = matrix.column_names
        values = matrix.values.copy()

        # median imputation for missing entries; all-missing columns sit at 0
        with np.errstate(all="ignore"):
            medians = np.nanmedian(values, axis=0)
        self.medians_ = np.where(np.isfinite(medians), medians, 0.0)
        values = self._impute(values)

        self.global_mean_ = values.mean(axis=0)
        self.global_std_ = values.std(axis=0)
        scaled = scale_columns(values, matrix.group_ids, self.config.scaling,
                               self.global_mean_, self.global_std_)

        variances = scaled.var(axis=0)
        self.zero_var_mask_ = variances > 0.0
        self.dropped_zero_variance_ = tuple(
            n for n, keep in zip(matrix.column_names, self.zero_var_mask_) if not keep)
        if not self.zero_var_mask_.any():
            raise DegenerateFeatures("every column has zero variance")
        current = scaled[:, self.zero_var_mask_]
        names = [n for n, keep in zip(matrix.column_names, self.zero_var_mask_) if keep]

        corr_keep = prune_correlated(current, self.config.corr_threshold)
        self.dropped_correlated_ = tuple(
            n for n, keep in zip(names, corr_keep) if not keep)
        current = current[:, corr_keep]
        names = [n for n, keep in zip(names, corr_keep) if keep]

        if self.config.winnow:
            if y is None:
                raise DegenerateLabels("winnow selection needs labels")
            winnow_keep = winnow_select(current, np.asarray(y, dtype=np.float64),
                                        task, self.config.seed)
            current = current[:, winnow_keep]
            names = [n for n, keep in zip(names, winnow_keep) if keep]
        self.selected_columns_ = tuple(names)

        self.pca_ = None
        if self.config.pca:
            self.pca_ = PCA().fit(current)
            current = self.pca_.transform(current)
        self.output_dim_ = current.shape[1]
        return self

    def _impute(self, values: np.ndarray) -> np.ndarray:
        values = values.copy()
        missing = ~np.isfinite(values)
        if missing.any():
            values[missing] = np.broadcast_to(self.medians_, values.shape)[missing]
        return values

    def transform(self, matrix: FeatureMatrix) -> np.ndarray:
        if matrix.column_names != self.input_columns_:
            raise SchemaError("feature columns differ from the fitted pipeline")
        values = self._impute(matrix.values)
        scaled = scale_columns(values, matrix.group_ids, self.config.scaling,
                               self.global_mean_, self.global_std_)
        index = {n: i for i, n in enumerate(self.input_columns_)}
        keep = [index[n] for n in self.selected_columns_]
        current = scaled[:, keep]
        if self.pca_ is not None:
            current = self.pca_.transform(current)
        return current
