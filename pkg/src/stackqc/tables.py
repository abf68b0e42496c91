"""Tabular formats: the IQM table (TSV), rating JSON files, ratings tables."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import SchemaError
from .types import IQMVector, Rating

MISSING = "NA"
KEY_COLUMNS = ("subject_id", "run_id")


def _fmt(value: float) -> str:
    if np.isnan(value):
        return MISSING
    return repr(float(value))


def write_iqm_table(path, keys: list[tuple[str, str]], names: tuple[str, ...],
                    vectors: list[IQMVector]) -> None:
    """Write one row per stack: subject_id, run_id, then catalog-ordered features."""
    lines = ["\t".join(KEY_COLUMNS + tuple(names))]
    for (subject_id, run_id), vec in zip(keys, vectors):
        if vec.names != tuple(names):
            raise SchemaError("IQM vector does not follow the catalog column order")
        lines.append("\t".join([subject_id, run_id] + [_fmt(v) for v in vec.values]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_iqm_table(path):
    """Read an IQM table back as (keys, feature names, float matrix).

    Missing cells (``NA``) become NaN in the matrix; any other non-numeric
    cell raises ValueError with its row and column.
    """
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise SchemaError(f"{path} is empty")
    header = lines[0].split("\t")
    if tuple(header[:2]) != KEY_COLUMNS:
        raise SchemaError(f"{path} must start with columns {KEY_COLUMNS}")
    names = tuple(header[2:])
    keys: list[tuple[str, str]] = []
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        cells = line.split("\t")
        if len(cells) != len(header):
            raise SchemaError(f"{path}:{i}: expected {len(header)} columns, got {len(cells)}")
        keys.append((cells[0], cells[1]))
        row = np.empty(len(names))
        for j, cell in enumerate(cells[2:]):
            if cell == MISSING:
                row[j] = np.nan
            else:
                try:
                    row[j] = float(cell)
                except ValueError:
                    raise ValueError(
                        f"{path}:{i}: non-numeric value {cell!r} in column {names[j]!r}"
                    ) from None
        rows.append(row)
    values = np.vstack(rows) if rows else np.empty((0, len(names)))
    return keys, names, values


def read_ratings_json(path) -> list[Rating]:
    """Read one rating document or an aggregate JSON array of ratings."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict):
        data = [data]
    return [Rating.from_dict(item) for item in data]


def merge_ratings(folder) -> tuple[list[Rating], list[str]]:
    """Collect all ``*.json`` rating files under ``folder``.

    Duplicate (subject, run, rater) entries resolve to the latest timestamp.
    Malformed files are reported in the returned error list, never fatal.
    """
    folder = Path(folder)
    merged: dict[tuple[str, str, str], Rating] = {}
    errors: list[str] = []
    for path in sorted(folder.rglob("*.json")):
        try:
            for rating in read_ratings_json(path):
                key = (rating.subject_id, rating.run_id, rating.rater_id)
                old = merged.get(key)
                if old is None or rating.timestamp >= old.timestamp:
                    merged[key] = rating
        except (ValueError, json.JSONDecodeError, KeyError, TypeError) as exc:
            errors.append(f"{path}: {exc}")
    ratings = sorted(merged.values(), key=lambda r: (r.subject_id, r.run_id, r.rater_id))
    return ratings, errors


RATINGS_COLUMNS = (
    "subject_id", "run_id", "rater_id", "quality", "orientation",
    "seconds_spent", "timestamp", "artifacts",
)


def write_ratings_table(path, ratings: list[Rating]) -> None:
    lines = ["\t".join(RATINGS_COLUMNS)]
    for r in ratings:
        lines.append("\t".join([
            r.subject_id, r.run_id, r.rater_id, repr(r.quality), r.orientation,
            repr(r.seconds_spent), r.timestamp,
            json.dumps(r.artifacts, sort_keys=True),
        ]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_ratings_table(path) -> list[Rating]:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise SchemaError(f"{path} is empty")
    header = tuple(lines[0].split("\t"))
    if header != RATINGS_COLUMNS:
        raise SchemaError(f"{path} must have columns {RATINGS_COLUMNS}")
    ratings = []
    for i, line in enumerate(lines[1:], start=2):
        cells = line.split("\t")
        if len(cells) != len(RATINGS_COLUMNS):
            raise SchemaError(f"{path}:{i}: expected {len(RATINGS_COLUMNS)} columns")
        ratings.append(Rating(
            subject_id=cells[0], run_id=cells[1], rater_id=cells[2],
            quality=float(cells[3]), orientation=cells[4],
            seconds_spent=float(cells[5]), timestamp=cells[6],
            artifacts=json.loads(cells[7]),
        ))
    return ratings


def training_labels(ratings: list[Rating]) -> dict[tuple[str, str], float]:
    """Mean quality per (subject, run); multiple raters average out."""
    sums: dict[tuple[str, str], list[float]] = {}
    for r in ratings:
        sums.setdefault((r.subject_id, r.run_id), []).append(r.quality)
    return {key: float(np.mean(vals)) for key, vals in sums.items()}
