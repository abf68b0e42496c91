"""Grouped (nested) cross-validation and scoring metrics.

Splits always keep all rows of a subject on one side, and every generated
split is audited for group leakage before use. Regression is scored with
MAE and Spearman rank correlation, classification with F1 (include class,
0.5 threshold) and tie-corrected rank AUC.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    EvaluationError,
    InsufficientGroups,
    SingleClassError,
    StackQCError,
)
from .models import ModelSpec, build_model
from .pipeline import FeatureMatrix, FeaturePipeline, PipelineConfig

# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks; tied values share the average of their rank span."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def mean_absolute_error(y_true, y_pred) -> float:
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    return float(np.abs(y_true - y_pred).mean())


def spearman(y_true, y_pred) -> float:
    """Pearson correlation of average ranks; 0 when either side is constant."""
    ra = _average_ranks(y_true)
    rb = _average_ranks(y_pred)
    ra = ra - ra.mean()
    rb = rb - rb.mean()
    va, vb = float(np.dot(ra, ra)), float(np.dot(rb, rb))
    if va == 0.0 or vb == 0.0:
        return 0.0
    return float(np.clip(np.dot(ra, rb) / np.sqrt(va * vb), -1.0, 1.0))


def f1_score(y_true, scores, threshold: float = 0.5) -> float:
    """F1 on the positive (include) class; 0 when undefined."""
    y_true = np.asarray(y_true).astype(int)
    pred = (np.asarray(scores, dtype=np.float64) >= threshold).astype(int)
    tp = int(np.sum((pred == 1) & (y_true == 1)))
    fp = int(np.sum((pred == 1) & (y_true == 0)))
    fn = int(np.sum((pred == 0) & (y_true == 1)))
    denom = 2 * tp + fp + fn
    return 2.0 * tp / denom if denom > 0 else 0.0


def auc_roc(y_true, scores) -> float:
    """Mann-Whitney rank AUC with tie correction."""
    y_true = np.asarray(y_true).astype(int)
    scores = np.asarray(scores, dtype=np.float64)
    n_pos = int(y_true.sum())
    n_neg = len(y_true) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError("AUC needs both classes in y_true")
    ranks = _average_ranks(scores)
    u = ranks[y_true == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def score(task: str, y_true, y_pred) -> dict[str, float]:
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if len(y_true) != len(y_pred) or len(y_true) < 2:
        raise EvaluationError("scoring needs two equal-length vectors of >= 2 values")
    if task == "regression":
        return {"mae": mean_absolute_error(y_true, y_pred),
                "spearman": spearman(y_true, y_pred)}
    if task == "classification":
        return {"f1": f1_score(y_true, y_pred), "auc": auc_roc(y_true, y_pred)}
    raise EvaluationError(f"unknown task {task!r}")


PRIMARY_METRIC = {"regression": ("mae", False), "classification": ("f1", True)}


# ---------------------------------------------------------------------------
# splits
# ---------------------------------------------------------------------------


def grouped_kfold(groups, k: int, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """K folds that never split a group; group counts balanced within one.

    Returns (train_rows, test_rows) index pairs covering all rows exactly
    once on the test side.
    """
    groups = np.asarray(groups)
    unique = np.unique(groups)
    if len(unique) < k:
        raise InsufficientGroups(f"{len(unique)} groups cannot make {k} folds")
    rng = np.random.default_rng(seed)
    shuffled = unique[rng.permutation(len(unique))]
    base, extra = divmod(len(unique), k)
    folds = []
    start = 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        fold_groups = set(shuffled[start:start + size])
        start += size
        test = np.nonzero([g in fold_groups for g in groups])[0]
        train = np.nonzero([g not in fold_groups for g in groups])[0]
        folds.append((train, test))
    _audit_folds(groups, folds)
    return folds


def _audit_folds(groups, folds) -> None:
    groups = np.asarray(groups)
    seen_test = np.zeros(len(groups), dtype=int)
    for train, test in folds:
        overlap = set(groups[train]) & set(groups[test])
        if overlap:
            raise EvaluationError(f"group leakage across a split: {sorted(overlap)}")
        seen_test[test] += 1
    if not np.all(seen_test == 1):
        raise EvaluationError("test folds do not partition the rows")


# ---------------------------------------------------------------------------
# model fitting helpers
# ---------------------------------------------------------------------------


def fit_grid_point(config: PipelineConfig, spec: ModelSpec,
                   matrix: FeatureMatrix, y: np.ndarray):
    """Fit (pipeline, model) on a training matrix."""
    pipeline = FeaturePipeline(config).fit(matrix, y, task=spec.task)
    X = pipeline.transform(matrix)
    model = build_model(spec).fit(X, np.asarray(y, dtype=np.float64))
    return pipeline, model


def predict_grid_point(pipeline: FeaturePipeline, model, matrix: FeatureMatrix
                       ) -> np.ndarray:
    return np.asarray(model.predict(pipeline.transform(matrix)), dtype=np.float64)


def select_best(task: str, inner_scores: list[float | None]) -> int:
    """Grid index with the best mean inner score; ties -> first in grid order."""
    metric, maximize = PRIMARY_METRIC[task]
    best, best_value = None, None
    for i, value in enumerate(inner_scores):
        if value is None:
            continue
        better = (best_value is None
                  or (value > best_value if maximize else value < best_value))
        if better:
            best, best_value = i, value
    if best is None:
        raise EvaluationError("every grid point failed during inner CV")
    return best


def _primary_metric_value(task: str, y_true, y_pred) -> float:
    # only the selection metric; avoids AUC's both-classes requirement on
    # small inner folds
    if task == "regression":
        return mean_absolute_error(y_true, y_pred)
    return f1_score(y_true, y_pred)


def _inner_select(grid, matrix, y, groups, task, k_inner, seed):
    """Mean inner-fold primary metric per grid point + the selected index."""
    folds = grouped_kfold(groups, k_inner, seed)
    means: list[float | None] = []
    failures: dict[int, str] = {}
    for gi, (config, spec) in enumerate(grid):
        values = []
        try:
            for train, test in folds:
                pipeline, model = fit_grid_point(
                    config, spec, matrix.take_rows(train), y[train])
                pred = predict_grid_point(pipeline, model, matrix.take_rows(test))
                values.append(_primary_metric_value(task, y[test], pred))
            means.append(float(np.mean(values)))
        except StackQCError as exc:
            means.append(None)
            failures[gi] = f"{type(exc).__name__}: {exc}"
    return means, failures, folds


def nested_cv(grid, matrix: FeatureMatrix, y, task: str,
              k_outer: int = 5, k_inner: int = 5, seed: int = 0) -> dict:
    """Nested grouped cross-validation.

    The inner loop selects the best grid point for each outer-train set; the
    selected point is refit on the full outer-train and scored on the outer
    test. Returns per-fold results, the mean +/- std summary, per-stack test
    predictions and the audited splits.
    """
    if not grid:
        raise EvaluationError("empty grid")
    y = np.asarray(y, dtype=np.float64)
    groups = np.asarray(matrix.group_ids)
    outer = grouped_kfold(groups, k_outer, seed)

    folds_out = []
    predictions = []
    splits = {"outer": [], "inner": []}
    for fold_idx, (train, test) in enumerate(outer):
        inner_seed = int(np.random.default_rng(
            np.random.SeedSequence((seed, fold_idx))).integers(0, 2 ** 31))
        inner_matrix = matrix.take_rows(train)
        means, failures, inner_folds = _inner_select(
            grid, inner_matrix, y[train], groups[train], task, k_inner, inner_seed)
        best = select_best(task, means)
        config, spec = grid[best]
        pipeline, model = fit_grid_point(config, spec, inner_matrix, y[train])
        pred = predict_grid_point(pipeline, model, matrix.take_rows(test))
        metrics = score(task, y[test], pred)

        splits["outer"].append({"fold": fold_idx,
                                "train_rows": train.tolist(),
                                "test_rows": test.tolist()})
        splits["inner"].append({"fold": fold_idx,
                                "splits": [{"train_rows": tr.tolist(),
                                            "test_rows": te.tolist()}
                                           for tr, te in inner_folds]})
        for row, value in zip(test, pred):
            predictions.append({"subject_id": matrix.row_keys[row][0],
                                "run_id": matrix.row_keys[row][1],
                                "fold": fold_idx,
                                "y_true": float(y[row]),
                                "y_pred": float(value)})
        folds_out.append({
            "fold": fold_idx,
            "selected": {"grid_index": best,
                         "pipeline": config.describe(),
                         "model": spec.describe()},
            "inner_means": means,
            "inner_failures": failures,
            "metrics": metrics,
            "n_train": int(len(train)),
            "n_test": int(len(test)),
        })

    summary = {}
    for name in folds_out[0]["metrics"]:
        values = np.array([f["metrics"][name] for f in folds_out])
        summary[name] = {"mean": float(values.mean()), "std": float(values.std())}
    return {"task": task, "folds": folds_out, "summary": summary,
            "predictions": predictions, "splits": splits,
            "selection_metric": PRIMARY_METRIC[task][0]}


def select_and_fit(grid, matrix: FeatureMatrix, y, task: str,
                   k: int = 5, seed: int = 0):
    """Plain grouped k-fold selection over all data, then a final fit.

    Returns (config, spec, pipeline, model, inner_means).
    """
    y = np.asarray(y, dtype=np.float64)
    means, failures, _ = _inner_select(grid, matrix, y,
                                       np.asarray(matrix.group_ids), task, k, seed)
    best = select_best(task, means)
    config, spec = grid[best]
    pipeline, model = fit_grid_point(config, spec, matrix, y)
    return config, spec, pipeline, model, means


def cross_site_eval(grid, matrix_a: FeatureMatrix, y_a, matrix_b: FeatureMatrix,
                    y_b, task: str, k_inner: int = 5, seed: int = 0) -> dict:
    """Select on one site with grouped CV, refit on all of it, score on the
    other site; both directions."""
    results = {}
    for name, (src, ys, dst, yd) in {
        "a_to_b": (matrix_a, y_a, matrix_b, y_b),
        "b_to_a": (matrix_b, y_b, matrix_a, y_a),
    }.items():
        if src.n_rows == 0 or dst.n_rows == 0:
            raise EvaluationError("both sites need rows")
        ys = np.asarray(ys, dtype=np.float64)
        config, spec, pipeline, model, means = select_and_fit(
            grid, src, ys, task, k=k_inner, seed=seed)
        pred = predict_grid_point(pipeline, model, dst)
        results[name] = {
            "selected": {"pipeline": config.describe(), "model": spec.describe()},
            "metrics": score(task, np.asarray(yd, dtype=np.float64), pred),
            "n_train": src.n_rows,
            "n_test": dst.n_rows,
        }
    return results


def learning_curve(grid, matrix: FeatureMatrix, y, task: str, fractions,
                   seed: int = 0, test_fraction: float = 0.2,
                   repeats: int = 3) -> dict:
    """Metric as a function of the training-set fraction.

    Each repeat holds out a grouped test split; for each fraction the first
    ceil(f * n) shuffled training groups are used to select (grouped 3-fold)
    and fit a model, scored on that repeat's test rows. Metrics are averaged
    across repeats, which keeps the curve stable on modest datasets.
    """
    y = np.asarray(y, dtype=np.float64)
    groups = np.asarray(matrix.group_ids)
    unique = np.unique(groups)
    per_fraction: dict[float, list[dict]] = {float(f): [] for f in fractions}

    for rep in range(repeats):
        rng = np.random.default_rng(np.random.SeedSequence((seed, rep)))
        shuffled = unique[rng.permutation(len(unique))]
        n_test = max(1, int(round(test_fraction * len(unique))))
        test_groups = set(shuffled[:n_test])
        train_groups = [g for g in shuffled[n_test:]]
        test_rows = np.nonzero([g in test_groups for g in groups])[0]

        for fraction in fractions:
            take = max(3, int(np.ceil(fraction * len(train_groups))))
            chosen = set(train_groups[:take])
            rows = np.nonzero([g in chosen for g in groups])[0]
            sub = matrix.take_rows(rows)
            config, spec, pipeline, model, _ = select_and_fit(
                grid, sub, y[rows], task, k=3, seed=seed)
            pred = predict_grid_point(pipeline, model, matrix.take_rows(test_rows))
            per_fraction[float(fraction)].append(score(task, y[test_rows], pred))

    results = {}
    for fraction, values in per_fraction.items():
        results[fraction] = {name: float(np.mean([v[name] for v in values]))
                             for name in values[0]}
    return results
