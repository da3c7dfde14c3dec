"""CSV ingestion and table writing.

All floats are written with 17 significant digits so every table
round-trips to the exact same doubles.
"""

from __future__ import annotations

import csv
import logging
import math
from pathlib import Path

import numpy as np

from . import synthetic
from .errors import MissingColumn, NonPositiveForLog, ParseError
from .glmm import BinomialPanel
from .penalty import SpatialDesign, build_design

log = logging.getLogger(__name__)

MISSING = {"", "na", "nan", "null", "none"}
COUNT_COLUMNS = ("y1", "n1", "y2", "n2")


def _read_rows(path, columns):
    """Yield ``(line_number, {column: float or None})`` for the requested columns."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in columns:
            if col not in header:
                raise MissingColumn(f"{path}: column {col!r} not found (have {', '.join(header)})")
        for row in reader:
            line = reader.line_num
            parsed = {}
            for col in columns:
                raw = (row.get(col) or "").strip()
                if raw.lower() in MISSING:
                    parsed[col] = None
                    continue
                try:
                    parsed[col] = float(raw)
                except ValueError:
                    raise ParseError(f"{path}, row {line}: cannot parse {col}={raw!r}") from None
                if not math.isfinite(parsed[col]):
                    parsed[col] = None
            yield line, parsed


def _complete_rows(path, columns):
    rows, dropped = [], 0
    for line, parsed in _read_rows(path, columns):
        if any(v is None for v in parsed.values()):
            dropped += 1
            continue
        rows.append((line, parsed))
    if dropped:
        log.warning("%s: dropped %d row(s) with missing values", path, dropped)
    return rows


def _jitter(xy, eps, seed):
    if not eps:
        return xy
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(2)[1])
    return xy + rng.uniform(-eps, eps, xy.shape)


def ingest_points(
    path,
    value_column: str = "value",
    transform: str = "none",
    *,
    jitter: float | None = None,
    seed=None,
) -> tuple[SpatialDesign, np.ndarray]:
    """Read ``x, y, <value_column>`` from a CSV file.

    Rows with a missing entry in any of those columns are dropped (with a
    logged count).  ``transform="log"`` requires strictly positive values.
    ``jitter`` adds seeded uniform noise of that half-width to every
    coordinate; without it, repeated sites raise DuplicateSites.
    """
    if transform not in ("none", "log"):
        raise ValueError(f"unknown transform {transform!r}")
    rows = _complete_rows(path, ("x", "y", value_column))
    xy = np.array([[r["x"], r["y"]] for _, r in rows]).reshape(-1, 2)
    values = np.array([r[value_column] for _, r in rows])
    if transform == "log":
        bad = np.flatnonzero(values <= 0)
        if bad.size:
            line = rows[int(bad[0])][0]
            raise NonPositiveForLog(
                f"{path}, row {line}: {value_column}={values[bad[0]]!r} is not positive, cannot take log"
            )
        values = np.log(values)
    design = build_design(_jitter(xy, jitter, seed))
    return design, values


def ingest_panel(path, *, jitter: float | None = None, seed=None) -> tuple[SpatialDesign, BinomialPanel]:
    """Read a two-week binomial panel with columns ``x, y, y1, n1, y2, n2``."""
    rows = _complete_rows(path, ("x", "y") + COUNT_COLUMNS)
    table = np.array([[r[c] for c in ("x", "y") + COUNT_COLUMNS] for _, r in rows]).reshape(-1, 6)
    counts = table[:, 2:]
    bad = np.flatnonzero(np.any((counts < 0) | (counts != np.round(counts)), axis=1))
    if bad.size == 0:
        bad = np.flatnonzero((counts[:, 0] > counts[:, 1]) | (counts[:, 2] > counts[:, 3]))
    if bad.size:
        raise ParseError(f"{path}, row {rows[int(bad[0])][0]}: counts must be integers with 0 <= y <= n")
    xy = _jitter(table[:, :2], jitter, seed)
    design = build_design(xy)
    panel = BinomialPanel(
        y=counts[:, [0, 2]],
        trials=counts[:, [1, 3]],
        centroids=xy,
    )
    return design, panel


def write_table(path, header, columns, int_columns=()) -> Path:
    """Write equal-length columns (or a 2-D array) as CSV."""
    path = Path(path)
    if isinstance(columns, np.ndarray) and columns.ndim == 2:
        data = columns
    else:
        data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    fmt = ["%d" if name in int_columns else "%.17g" for name in header]
    np.savetxt(path, data, fmt=fmt, delimiter=",", header=",".join(header), comments="")
    return path


def write_records(path, header, rows) -> Path:
    """Write rows whose first field is a label and the rest are floats."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for label, *values in rows:
            writer.writerow([label] + ["%.17g" % v for v in values])
    return path


def make_synthetic(kind: str, seed, path) -> Path:
    """Write a seeded synthetic dataset: ``gaussian`` (150 sites) or ``turkey`` (114 counties)."""
    if kind == "gaussian":
        d = synthetic.gaussian_dataset(seed)
        header = ["x", "y", "value", "truth"]
        return write_table(path, header, [d[k] for k in header])
    if kind == "turkey":
        d = synthetic.turkey_dataset(seed)
        header = ["x", "y", "y1", "n1", "y2", "n2", "Z_true"]
        return write_table(path, header, [d[k] for k in header], int_columns=COUNT_COLUMNS)
    raise ValueError(f"unknown synthetic kind {kind!r}")
