"""Log transform, min-max rescaling and column summaries.

Quantiles use linear interpolation between order statistics: for ``n``
sorted values and probability ``p`` the position is ``h = (n - 1) p`` and
the quantile is ``x[floor(h)] + (x[floor(h) + 1] - x[floor(h)]) * frac(h)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DataError


def log_transform(x):
    """``log10(x + 1)``; accepts scalars or arrays of non-negative values."""
    arr = np.asarray(x, dtype=np.float64)
    if np.any(arr < 0):
        raise DataError("log_transform is defined for non-negative values only")
    out = np.log10(arr + 1.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ScalingParams:
    """Per-column min and max fitted on a reference (training) sample."""

    minimum: np.ndarray
    maximum: np.ndarray

    @classmethod
    def fit(cls, matrix: np.ndarray) -> "ScalingParams":
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim == 1:
            matrix = matrix[:, None]
        if matrix.shape[0] == 0:
            raise DataError("cannot fit scaling on an empty sample")
        return cls(matrix.min(axis=0), matrix.max(axis=0))

    def apply(self, matrix: np.ndarray) -> np.ndarray:
        matrix = np.asarray(matrix, dtype=np.float64)
        span = self.maximum - self.minimum
        safe = np.where(span > 0, span, 1.0)
        out = (matrix - self.minimum) / safe
        # constant columns carry no information
        out[..., span <= 0] = 0.0
        return out

    def to_dict(self) -> dict:
        return {"minimum": self.minimum.tolist(), "maximum": self.maximum.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ScalingParams":
        return cls(np.asarray(d["minimum"], dtype=np.float64), np.asarray(d["maximum"], dtype=np.float64))


def minmax_rescale(column) -> np.ndarray:
    column = np.asarray(column, dtype=np.float64)
    if column.size == 0:
        raise DataError("cannot rescale an empty column")
    return ScalingParams.fit(column).apply(column[:, None])[:, 0]


@dataclass(frozen=True)
class ColumnSummary:
    count: int
    mean: float
    std: float
    min: float
    q1: float
    median: float
    q3: float
    max: float
    iqr_ratio: float | None

    def as_dict(self) -> dict:
        return asdict(self)


def _select_quantile(values: np.ndarray, p: float) -> float:
    n = len(values)
    h = (n - 1) * p
    lo = math.floor(h)
    frac = h - lo
    hi = min(lo + 1, n - 1)
    part = np.partition(values, (lo, hi))
    a, b = float(part[lo]), float(part[hi])
    return a + (b - a) * frac


def summarize_column(column) -> ColumnSummary:
    """Count, mean, sample std, min, quartiles, max and ``(Q3 - Q1) / Q2``."""
    values = np.asarray(column, dtype=np.float64).ravel()
    if values.size == 0:
        raise DataError("cannot summarize an empty column")
    q1, q2, q3 = (_select_quantile(values, p) for p in (0.25, 0.5, 0.75))
    return ColumnSummary(
        count=int(values.size),
        mean=float(values.mean()),
        std=float(values.std(ddof=1)) if values.size > 1 else 0.0,
        min=float(values.min()),
        q1=q1,
        median=q2,
        q3=q3,
        max=float(values.max()),
        iqr_ratio=(q3 - q1) / q2 if q2 > 0 else None,
    )


@dataclass
class ModelMatrix:
    """Model-ready matrix: plain then log10(x+1) columns, each min-max rescaled."""

    values: np.ndarray
    columns: list[str]
    scaling: ScalingParams

    def manifest(self) -> list[dict]:
        n_plain = len(self.columns) // 2
        return [
            {"index": i, "name": name, "transform": "plain" if i < n_plain else "log10p1"}
            for i, name in enumerate(self.columns)
        ]


def expand_with_logs(features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    bad = ~np.isfinite(features)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise DataError(f"non-finite feature value at row {r}, column {c}")
    return np.hstack([features, log_transform(features)])


def assemble_model_matrix(
    features: np.ndarray,
    names: list[str] | None = None,
    fit_rows: np.ndarray | None = None,
    scaling: ScalingParams | None = None,
) -> ModelMatrix:
    """Plain + log columns, rescaled to ``[0, 1]``.

    Scaling is fitted on ``fit_rows`` (defaults to all rows) unless a
    previously fitted ``scaling`` is supplied. Rows outside the fitting
    sample may fall outside ``[0, 1]``; they are not clipped.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise DataError("feature matrix must be two-dimensional")
    names = names if names is not None else [f"f{i}" for i in range(features.shape[1])]
    if len(names) != features.shape[1]:
        raise DataError("feature names do not match column count")
    full = expand_with_logs(features)
    if scaling is None:
        ref = full if fit_rows is None else full[np.asarray(fit_rows)]
        scaling = ScalingParams.fit(ref)
    columns = list(names) + [f"log_{n}" for n in names]
    return ModelMatrix(scaling.apply(full), columns, scaling)


def save_scaling(path, matrix: ModelMatrix) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"columns": matrix.manifest(), "scaling": matrix.scaling.to_dict()}, fh, indent=1)


def load_scaling(path) -> tuple[list[str], ScalingParams]:
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    return [c["name"] for c in d["columns"]], ScalingParams.from_dict(d["scaling"])
