"""Command-line interface: report, extract, rate merge, train, predict,
evaluate, synth.

Exit codes: 0 success, 2 partial failure (some reports failed, manifest
written), 64 usage error, 65 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .bids import index_bids, load_pair
from .errors import StackQCError
from .evaluation import (
    cross_site_eval,
    learning_curve,
    nested_cv,
    select_and_fit,
)
from .iqm import BASE_FEATURES, FeatureCatalog, default_catalog, extract_all_iqms
from .models import ModelSpec, predict_labels
from .models.bundle import ModelBundle, load_bundle, save_bundle
from .pipeline import FeatureMatrix, PipelineConfig
from .report import render_group_report, render_report
from .synth import generate_dataset
from .tables import (
    merge_ratings,
    read_iqm_table,
    read_ratings_table,
    training_labels,
    write_iqm_table,
    write_ratings_table,
)
from .types import EXCLUDE_THRESHOLD

USAGE_ERROR = 64
DATA_ERROR = 65
PARTIAL_FAILURE = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(USAGE_ERROR)


def _apply_config(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset options from a key=value config file; flags win."""
    path = getattr(args, "config", None)
    if not path:
        return args
    for line_no, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise StackQCError(f"{path}:{line_no}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if hasattr(args, key) and getattr(args, key) is None:
            setattr(args, key, value)
    return args


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

REGRESSION_FAMILIES_GRID = ("linear", "gradient_boosting", "random_forest")
CLASSIFICATION_FAMILIES_GRID = ("logistic", "random_forest",
                                "gradient_boosting", "adaboost")


def full_grid(task: str, seed: int) -> list[tuple[PipelineConfig, ModelSpec]]:
    """The default search space: correlation threshold x winnow x PCA x
    model family, every model at its documented defaults."""
    families = REGRESSION_FAMILIES_GRID if task == "regression" \
        else CLASSIFICATION_FAMILIES_GRID
    grid = []
    for corr in (0.8, 0.9, None):
        for winnow in (True, False):
            for pca in (True, False):
                for family in families:
                    grid.append((
                        PipelineConfig(corr_threshold=corr, winnow=winnow,
                                       pca=pca, seed=seed),
                        ModelSpec(task, family, {"seed": seed}),
                    ))
    return grid


def fast_grid(task: str, seed: int) -> list[tuple[PipelineConfig, ModelSpec]]:
    """Small search space for quick runs and the acceptance suite."""
    grid = []
    for scaling in ("global", "subject_wise"):
        grid.append((PipelineConfig(scaling=scaling, seed=seed),
                     ModelSpec(task, "gradient_boosting", {"seed": seed})))
    grid.append((PipelineConfig(scaling="global", corr_threshold=0.9, seed=seed),
                 ModelSpec(task, "random_forest",
                           {"n_trees": 60, "max_depth": 12, "seed": seed})))
    return grid


def load_grid(spec: str, task: str, seed: int):
    if spec == "full":
        return full_grid(task, seed)
    if spec == "fast":
        return fast_grid(task, seed)
    doc = json.loads(Path(spec).read_text())
    grid = []
    for entry in doc:
        pipe = entry.get("pipeline", {})
        pipe.setdefault("seed", seed)
        model = entry["model"]
        hp = dict(model.get("hyperparameters", {}))
        hp.setdefault("seed", seed)
        grid.append((PipelineConfig(**pipe),
                     ModelSpec(task, model["family"], hp)))
    return grid


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

def _extract_matrix(index, catalog, jobs: int):
    """(keys, vectors) for every index entry; order independent of jobs."""
    def work(entry):
        stack, mask = load_pair(entry)
        return extract_all_iqms(stack, mask, catalog)

    entries = list(index)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            vectors = list(pool.map(work, entries))
    else:
        vectors = [work(e) for e in entries]
    keys = [(e.subject_id, e.run_id) for e in entries]
    return keys, vectors


def _load_matrix(path) -> FeatureMatrix:
    keys, names, values = read_iqm_table(path)
    return FeatureMatrix(values, keys, names)


def _load_labels(ratings_path, keys, task: str):
    ratings = read_ratings_table(ratings_path)
    by_key = training_labels(ratings)
    missing = [k for k in keys if k not in by_key]
    if missing:
        raise StackQCError(
            f"{len(missing)} stacks have no rating (first: {missing[0]})")
    quality = np.array([by_key[k] for k in keys])
    if task == "classification":
        return (quality > EXCLUDE_THRESHOLD).astype(float)
    return quality


def _json_out(doc, out=None):
    text = json.dumps(doc, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    manifest = generate_dataset(
        args.out, args.masks, n_subjects=int(args.subjects),
        stacks_per_subject=int(args.stacks), seed=int(args.seed),
        ratings_dir=args.ratings_dir)
    _json_out(manifest)
    return 0


def cmd_extract(args) -> int:
    catalog = FeatureCatalog.load(args.catalog) if args.catalog else default_catalog()
    index = index_bids(args.bids, args.masks)
    for path in index.unmatched:
        print(f"unmatched stack (no mask): {path}", file=sys.stderr)
    keys, vectors = _extract_matrix(index, catalog, int(args.jobs))
    write_iqm_table(args.out, keys, catalog.names, vectors)
    incomplete = sum(1 for v in vectors if not v.complete)
    print(f"wrote {len(keys)} rows x {len(catalog)} features to {args.out}"
          + (f" ({incomplete} rows with missing entries)" if incomplete else ""))
    return 0


def cmd_report(args) -> int:
    catalog = FeatureCatalog.load(args.catalog) if args.catalog else default_catalog()
    index = index_bids(args.bids, args.masks)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    failures = []

    def work(entry):
        stack, mask = load_pair(entry)
        iqms = extract_all_iqms(stack, mask, catalog)
        name = f"{entry.subject_id}_{entry.run_id}_report.html"
        render_report(stack, mask, iqms, out_dir / name,
                      timestamp=args.timestamp or "")
        return (entry.key, name, iqms)

    results = {}
    jobs = int(args.jobs)
    entries = list(index)

    def safe(entry):
        try:
            return work(entry)
        except (StackQCError, OSError) as exc:
            return (entry.key, None, exc)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(safe, entries))
    else:
        outcomes = [safe(e) for e in entries]
    for key, name, payload in outcomes:
        if name is None:
            failures.append({"subject_id": key[0], "run_id": key[1],
                             "error": str(payload)})
        else:
            results[key] = (name, payload)

    ratings = {}
    if args.ratings and Path(args.ratings).exists():
        for r in read_ratings_table(args.ratings):
            ratings[(r.subject_id, r.run_id)] = r.quality
    links = {key: name for key, (name, _) in results.items()}
    render_group_report(sorted(results), out_dir / "group_report.html",
                        ratings=ratings, report_links=links,
                        timestamp=args.timestamp or "")

    print(f"rendered {len(results)} reports into {out_dir}")
    if failures:
        manifest = out_dir / "failures.json"
        manifest.write_text(json.dumps(failures, indent=2, sort_keys=True))
        print(f"{len(failures)} stacks failed; manifest at {manifest}",
              file=sys.stderr)
        return PARTIAL_FAILURE
    return 0


def cmd_rate_merge(args) -> int:
    ratings, errors = merge_ratings(args.in_dir)
    for err in errors:
        print(f"skipped: {err}", file=sys.stderr)
    if not ratings:
        raise StackQCError(f"no valid rating files under {args.in_dir}")
    write_ratings_table(args.out, ratings)
    print(f"merged {len(ratings)} ratings into {args.out}")
    return 0


def cmd_train(args) -> int:
    matrix = _load_matrix(args.iqms)
    y = _load_labels(args.ratings, matrix.row_keys, args.task)
    seed = int(args.seed)
    grid = load_grid(args.grid, args.task, seed)

    report = nested_cv(grid, matrix, y, task=args.task,
                       k_outer=int(args.k_outer), k_inner=int(args.k_inner),
                       seed=seed)
    config, spec, pipeline, model, means = select_and_fit(
        grid, matrix, y, args.task, k=int(args.k_inner), seed=seed)
    bundle = ModelBundle(pipeline=pipeline, model=model, spec=spec,
                         catalog_id=args.catalog_id)
    save_bundle(bundle, args.out)

    cv_doc = {
        "task": report["task"],
        "summary": report["summary"],
        "folds": [{"fold": f["fold"], "metrics": f["metrics"],
                   "selected": f["selected"]} for f in report["folds"]],
        "final": {"pipeline": config.describe(), "model": spec.describe(),
                  "grid_means": means},
        "bundle": str(args.out),
    }
    _json_out(cv_doc, args.cv_report)
    return 0


def cmd_predict(args) -> int:
    matrix = _load_matrix(args.iqms)
    bundle = load_bundle(args.model)
    scores = np.asarray(bundle.model.predict(bundle.pipeline.transform(matrix)),
                        dtype=np.float64)
    lines = ["\t".join(("subject_id", "run_id", "score", "label"))]
    if bundle.spec.task == "regression":
        scores = np.clip(scores, 0.0, 4.0)
        labels = ["exclude" if s <= EXCLUDE_THRESHOLD else "include"
                  for s in scores]
    else:
        labels = ["include" if p else "exclude"
                  for p in predict_labels(scores)]
    for key, s, label in zip(matrix.row_keys, scores, labels):
        lines.append("\t".join((key[0], key[1], repr(float(s)), label)))
    Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"wrote {len(scores)} predictions to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    matrix = _load_matrix(args.iqms)
    if args.features == "base":
        matrix = matrix.select(BASE_FEATURES)
    y = _load_labels(args.ratings, matrix.row_keys, args.task)
    seed = int(args.seed)
    grid = load_grid(args.grid, args.task, seed)

    if args.cross_site:
        site_of = {}
        for line in Path(args.cross_site).read_text().splitlines()[1:]:
            if line.strip():
                subject, site = line.split("\t")[:2]
                site_of[subject] = site
        sites = sorted(set(site_of.values()))
        if len(sites) != 2:
            raise StackQCError(f"cross-site needs exactly 2 sites, got {sites}")
        rows_a = [i for i, (s, _) in enumerate(matrix.row_keys)
                  if site_of.get(s) == sites[0]]
        rows_b = [i for i, (s, _) in enumerate(matrix.row_keys)
                  if site_of.get(s) == sites[1]]
        result = cross_site_eval(grid, matrix.take_rows(rows_a), y[rows_a],
                                 matrix.take_rows(rows_b), y[rows_b],
                                 task=args.task, seed=seed)
        result["sites"] = {"a": sites[0], "b": sites[1]}
        _json_out(result, args.out)
        return 0

    if args.train_fractions:
        fractions = [float(f) for f in args.train_fractions.split(",")]
        curve = learning_curve(grid, matrix, y, args.task, fractions, seed=seed)
        _json_out({"task": args.task,
                   "curve": {str(k): v for k, v in curve.items()}}, args.out)
        return 0

    report = nested_cv(grid, matrix, y, task=args.task,
                       k_outer=int(args.k_outer), k_inner=int(args.k_inner),
                       seed=seed)
    doc = {
        "task": report["task"],
        "summary": report["summary"],
        "selection_metric": report["selection_metric"],
        "folds": [{"fold": f["fold"], "metrics": f["metrics"],
                   "selected": f["selected"], "n_train": f["n_train"],
                   "n_test": f["n_test"]} for f in report["folds"]],
        "predictions": report["predictions"],
    }
    _json_out(doc, args.out)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="stackqc",
                     description="Quality metrics and automated QC for "
                                 "low-resolution fetal brain MRI stacks")
    parser.add_argument("--version", action="version",
                        version=f"stackqc {__version__} "
                                f"(catalog {default_catalog().catalog_id} "
                                f"v{default_catalog().version})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic phantom dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--masks", required=True)
    p.add_argument("--subjects", default=10)
    p.add_argument("--stacks", default=3)
    p.add_argument("--seed", default=0)
    p.add_argument("--ratings-dir", default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="extract the IQM table")
    p.add_argument("--bids", required=True)
    p.add_argument("--masks", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--catalog", default=None)
    p.add_argument("--jobs", default=1)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("report", help="render per-stack HTML QA reports")
    p.add_argument("--bids", required=True)
    p.add_argument("--masks", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--catalog", default=None)
    p.add_argument("--ratings", default=None)
    p.add_argument("--timestamp", default=None)
    p.add_argument("--jobs", default=1)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("rate", help="rating file operations")
    rate_sub = p.add_subparsers(dest="rate_command", required=True)
    m = rate_sub.add_parser("merge", help="merge rating JSONs into a table")
    m.add_argument("--in", dest="in_dir", required=True)
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_rate_merge)

    p = sub.add_parser("train", help="nested-CV selection and final fit")
    p.add_argument("--iqms", required=True)
    p.add_argument("--ratings", required=True)
    p.add_argument("--task", choices=("regression", "classification"),
                   required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", default=0)
    p.add_argument("--grid", default="full",
                   help="'full', 'fast' or a JSON grid file")
    p.add_argument("--k-outer", default=5)
    p.add_argument("--k-inner", default=5)
    p.add_argument("--catalog-id", default="stackqc-default")
    p.add_argument("--cv-report", default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score stacks with a trained bundle")
    p.add_argument("--iqms", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="nested-CV or cross-site evaluation")
    p.add_argument("--iqms", required=True)
    p.add_argument("--ratings", required=True)
    p.add_argument("--task", choices=("regression", "classification"),
                   required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", default=0)
    p.add_argument("--grid", default="full")
    p.add_argument("--features", choices=("all", "base"), default="all")
    p.add_argument("--k-outer", default=5)
    p.add_argument("--k-inner", default=5)
    p.add_argument("--cross-site", default=None,
                   help="TSV file mapping subject_id to site (2 sites)")
    p.add_argument("--train-fractions", default=None,
                   help="comma-separated fractions for a learning curve")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_evaluate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _apply_config(args)
        return args.func(args)
    except StackQCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
