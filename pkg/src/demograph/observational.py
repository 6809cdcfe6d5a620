"""Exploratory statistics over features, labels and the graph."""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import stats

from .cdr_model import EventTable, RecordKind, SocialGraph
from .errors import DataError, NumericError

# ---------------------------------------------------------------------------
# PCA


@dataclass(frozen=True)
class PcaResult:
    mean: np.ndarray
    eigenvalues: np.ndarray
    components: np.ndarray  # rows are eigenvectors, descending eigenvalue
    explained_variance_fraction: np.ndarray

    def transform(self, matrix: np.ndarray) -> np.ndarray:
        return (np.asarray(matrix, dtype=np.float64) - self.mean) @ self.components.T

    def inverse_transform(self, scores: np.ndarray) -> np.ndarray:
        return scores @ self.components + self.mean


def pca(matrix: np.ndarray) -> PcaResult:
    """Eigendecomposition of the sample covariance matrix.

    Each eigenvector is signed so its largest-magnitude coordinate is positive.
    """
    x = np.asarray(matrix, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise DataError("PCA needs a 2-D matrix with at least two rows")
    if not np.all(np.isfinite(x)):
        raise DataError("PCA input contains non-finite values")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / (x.shape[0] - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order].T
    total = evals.sum()
    if total <= 0:
        raise NumericError("PCA input has zero variance in every column")
    pivot = np.argmax(np.abs(evecs), axis=1)
    signs = np.sign(evecs[np.arange(len(evecs)), pivot])
    evecs = evecs * signs[:, None]
    return PcaResult(mean, evals, evecs, evals / total)


# ---------------------------------------------------------------------------
# gender statistics


@dataclass(frozen=True)
class GenderMeanRow:
    variable: str
    mean_female: float
    mean_male: float
    p_value: float


def gender_group_means(features: np.ndarray, genders: np.ndarray, names: list[str]) -> list[GenderMeanRow]:
    """Per-gender sample means with a Welch two-sample t-test p-value."""
    features = np.asarray(features, dtype=np.float64)
    genders = np.asarray(genders)
    female = features[genders == 1]
    male = features[genders == 0]
    if len(female) < 2 or len(male) < 2:
        raise DataError("each gender needs at least two users")
    rows = []
    for j, name in enumerate(names):
        f, m = female[:, j], male[:, j]
        if f.var() == 0 and m.var() == 0:
            p = 1.0 if f.mean() == m.mean() else 0.0
        else:
            p = float(stats.ttest_ind(f, m, equal_var=False).pvalue)
        rows.append(GenderMeanRow(name, float(f.mean()), float(m.mean()), p))
    return rows


@dataclass(frozen=True)
class GenderMixMatrix:
    """``p[g, g']`` = probability that a call made by gender ``g`` reaches ``g'``.

    Rows with no originating calls are NaN and listed in ``undefined_rows``.
    """

    counts: np.ndarray
    p: np.ndarray
    undefined_rows: tuple

    def prob(self, recipient: int, caller: int) -> float:
        return float(self.p[caller, recipient])


def gender_mix(events: EventTable, genders: np.ndarray) -> GenderMixMatrix:
    """Conditional gender mix of calls between labeled users.

    ``genders`` holds one code per node: 0 male, 1 female, negative unknown.
    """
    genders = np.asarray(genders)
    calls = events.kind == RecordKind.CALL
    gs, gd = genders[events.src[calls]], genders[events.dst[calls]]
    both = (gs >= 0) & (gd >= 0)
    counts = np.bincount(gs[both] * 2 + gd[both], minlength=4).reshape(2, 2).astype(np.int64)
    totals = counts.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = counts / totals[:, None]
    undefined = tuple(int(g) for g in np.flatnonzero(totals == 0))
    return GenderMixMatrix(counts, p, undefined)


# ---------------------------------------------------------------------------
# Tukey HSD


@dataclass(frozen=True)
class TukeyHsdRow:
    group1: int
    group2: int
    meandiff: float
    lower: float
    upper: float
    reject: bool


@lru_cache(maxsize=256)
def studentized_range_quantile(prob: float, k: int, df: float) -> float:
    """Quantile of the studentized range by numerical integration and inversion."""
    return float(stats.studentized_range.ppf(prob, k, df))


def tukey_hsd(groups, fwer: float = 0.05) -> list[TukeyHsdRow]:
    """All-pairs Tukey-Kramer comparison; ``meandiff = mean(group2) - mean(group1)``."""
    groups = [np.asarray(g, dtype=np.float64).ravel() for g in groups]
    if len(groups) < 2:
        raise DataError("Tukey HSD needs at least two groups")
    sizes = np.array([len(g) for g in groups])
    if np.any(sizes < 2):
        raise DataError("every group needs at least two observations")
    means = np.array([g.mean() for g in groups])
    df = int(sizes.sum() - len(groups))
    mse = sum(((g - g.mean()) ** 2).sum() for g in groups) / df
    q = studentized_range_quantile(1.0 - fwer, len(groups), df)
    rows = []
    for i, j in itertools.combinations(range(len(groups)), 2):
        diff = means[j] - means[i]
        half = q * np.sqrt(mse / 2.0 * (1.0 / sizes[i] + 1.0 / sizes[j]))
        lower, upper = diff - half, diff + half
        rows.append(TukeyHsdRow(i, j, float(diff), float(lower), float(upper),
                                bool(lower > 0 or upper < 0)))
    return rows


def all_pairs_rejected(matrix: np.ndarray, group_index: np.ndarray, names: list[str],
                       fwer: float = 0.05) -> list[str]:
    """Variables whose Tukey test rejects equal means for every pair of groups."""
    group_index = np.asarray(group_index)
    labels = np.unique(group_index)
    out = []
    for j, name in enumerate(names):
        rows = tukey_hsd([matrix[group_index == g, j] for g in labels], fwer)
        if all(r.reject for r in rows):
            out.append(name)
    return out


# ---------------------------------------------------------------------------
# age structure of links


@dataclass(frozen=True)
class AgeLinkMatrix:
    """``counts[i - min_age, j - min_age]`` links between users aged ``i`` and ``j``."""

    min_age: int
    counts: np.ndarray

    def at(self, i: int, j: int) -> int:
        a, b = i - self.min_age, j - self.min_age
        if not (0 <= a < len(self.counts) and 0 <= b < len(self.counts)):
            return 0
        return int(self.counts[a, b])

    @property
    def ages(self) -> np.ndarray:
        return np.arange(self.min_age, self.min_age + len(self.counts))

    def band_contrast(self, width: int = 2) -> tuple[float, float]:
        """Mean cell count within ``|i - j| <= width`` versus outside it."""
        n = len(self.counts)
        if n == 0:
            return 0.0, 0.0
        d = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
        band = d <= width
        off = self.counts[~band]
        return float(self.counts[band].mean()), float(off.mean()) if off.size else 0.0


def _labeled_edges(graph: SocialGraph, ages: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ages = np.asarray(ages)
    e = graph.edges()
    a, b = ages[e[:, 0]], ages[e[:, 1]]
    keep = (a >= 0) & (b >= 0)
    return a[keep], b[keep]


def age_link_matrix(graph: SocialGraph, ages: np.ndarray, min_age: int = 10, max_age: int = 100) -> AgeLinkMatrix:
    """Symmetric age-by-age link counts; ``ages`` is per node, negative = unlabeled.

    Each labeled-labeled edge adds one to both orientations, so a same-age
    edge adds two to its diagonal cell.
    """
    a, b = _labeled_edges(graph, ages)
    n = max_age - min_age + 1
    if len(a) and (min(a.min(), b.min()) < min_age or max(a.max(), b.max()) > max_age):
        raise DataError("age outside matrix bounds")
    ia, ib = a - min_age, b - min_age
    flat = np.concatenate([ia * n + ib, ib * n + ia])
    counts = np.bincount(flat, minlength=n * n).reshape(n, n).astype(np.int64)
    return AgeLinkMatrix(min_age, counts)


def age_diff_histogram(graph: SocialGraph, ages: np.ndarray) -> dict[int, int]:
    """Number of labeled-labeled edges per absolute age difference (each edge once)."""
    a, b = _labeled_edges(graph, ages)
    if len(a) == 0:
        return {}
    hist = np.bincount(np.abs(a - b))
    return {int(d): int(c) for d, c in enumerate(hist) if c}


# ---------------------------------------------------------------------------
# report emitters


def write_pca_csv(path, result: PcaResult, columns: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["component", "eigenvalue", "explained_variance_fraction", *columns])
        for k, (ev, frac, vec) in enumerate(zip(result.eigenvalues, result.explained_variance_fraction,
                                                result.components)):
            w.writerow([k, repr(float(ev)), repr(float(frac)), *(repr(float(v)) for v in vec)])


def write_tukey_csv(path, rows: list[TukeyHsdRow], variable: str = "") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["variable", "group1", "group2", "meandiff", "lower", "upper", "reject"])
        for r in rows:
            w.writerow([variable, r.group1, r.group2, f"{r.meandiff:.6g}", f"{r.lower:.6g}",
                        f"{r.upper:.6g}", r.reject])


def write_age_link_csv(path, m: AgeLinkMatrix) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["age", *m.ages.tolist()])
        for age, row in zip(m.ages, m.counts):
            w.writerow([int(age), *row.tolist()])


def write_age_diff_csv(path, hist: dict[int, int]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["age_difference", "links"])
        for d in sorted(hist):
            w.writerow([d, hist[d]])
