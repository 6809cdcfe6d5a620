"""Population Pyramid Scaling: collapse probability rows under exact quotas.

All ``(node, category, probability)`` tuples are visited in descending
probability order (ties: lower node index, then lower category index). A
tuple assigns its node to its category when the node is still free and the
category is below quota. The sweep stops once every quota is filled.
"""

from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DataError


@dataclass(frozen=True)
class QuotaPlan:
    q: float
    population: int
    total: int
    quotas: np.ndarray
    shares: np.ndarray


def apportion(total: int, shares) -> np.ndarray:
    """Largest-remainder apportionment of ``total`` units; ties go to lower index."""
    shares = np.asarray(shares, dtype=np.float64)
    raw = total * shares
    floors = np.floor(raw).astype(np.int64)
    rest = int(total - floors.sum())
    remainders = raw - floors
    order = np.lexsort((np.arange(len(shares)), -remainders))
    floors[order[:rest]] += 1
    return floors


def compute_quotas(population_size: int, q: float, target_distribution) -> QuotaPlan:
    """Per-category quotas summing to ``N = round(q * population_size)``."""
    if not 0 < q <= 1:
        raise DataError("coverage q must be in (0, 1]")
    shares = np.asarray(target_distribution, dtype=np.float64)
    if np.any(shares < 0) or abs(shares.sum() - 1.0) > 1e-9:
        raise DataError("target distribution must be non-negative and sum to 1")
    total = int(math.floor(q * population_size + 0.5))
    return QuotaPlan(q, int(population_size), total, apportion(total, shares), shares)


@dataclass
class Assignment:
    """``category[i]`` is the assigned category of row ``i`` or ``-1``."""

    category: np.ndarray
    probability: np.ndarray
    rank: np.ndarray

    @property
    def assigned(self) -> np.ndarray:
        return self.category >= 0

    def counts(self, n_categories: int) -> np.ndarray:
        return np.bincount(self.category[self.assigned], minlength=n_categories)


@njit(cache=True)
def _sweep(nodes, cats, quotas, n_nodes):
    remaining = quotas.copy()
    left = remaining.sum()
    out = np.full(n_nodes, -1, dtype=np.int64)
    rank = np.full(n_nodes, -1, dtype=np.int64)
    r = 0
    for t in range(nodes.shape[0]):
        if left == 0:
            break
        i = nodes[t]
        k = cats[t]
        if out[i] < 0 and remaining[k] > 0:
            out[i] = k
            rank[i] = r
            r += 1
            remaining[k] -= 1
            left -= 1
    return out, rank


def _validate(probabilities: np.ndarray, plan: QuotaPlan) -> np.ndarray:
    p = np.asarray(probabilities, dtype=np.float64)
    if p.ndim != 2 or p.shape[1] != len(plan.quotas):
        raise DataError("probability matrix does not match the number of categories")
    if plan.total > p.shape[0]:
        raise DataError(f"infeasible plan: {plan.total} assignments for {p.shape[0]} nodes")
    if not np.all(np.isfinite(p)):
        raise DataError("non-finite probability")
    return p


def _finish(p: np.ndarray, category: np.ndarray, rank: np.ndarray) -> Assignment:
    prob = np.where(category >= 0, p[np.arange(len(p)), np.maximum(category, 0)], np.nan)
    return Assignment(category, prob, rank)


def pps_assign(probabilities, plan: QuotaPlan) -> Assignment:
    """Greedy quota-constrained assignment over the fully sorted tuple list."""
    p = _validate(probabilities, plan)
    n, c = p.shape
    nodes = np.repeat(np.arange(n, dtype=np.int64), c)
    cats = np.tile(np.arange(c, dtype=np.int64), n)
    order = np.lexsort((cats, nodes, -p.ravel()))
    category, rank = _sweep(nodes[order], cats[order], plan.quotas.astype(np.int64), n)
    return _finish(p, category, rank)


def pps_assign_merge(probabilities, plan: QuotaPlan) -> Assignment:
    """Same result as :func:`pps_assign` via a k-way merge of per-category orders.

    Only one sorted index array per category is held; the tuple list is never
    materialized.
    """
    p = _validate(probabilities, plan)
    n, c = p.shape
    per_cat = [np.lexsort((np.arange(n), -p[:, k])) for k in range(c)]
    heap = [(-p[per_cat[k][0], k], int(per_cat[k][0]), k, 0) for k in range(c) if n]
    heapq.heapify(heap)
    remaining = plan.quotas.astype(np.int64).copy()
    left = int(remaining.sum())
    category = np.full(n, -1, dtype=np.int64)
    rank = np.full(n, -1, dtype=np.int64)
    r = 0
    while heap and left:
        negp, i, k, pos = heapq.heappop(heap)
        if category[i] < 0 and remaining[k] > 0:
            category[i] = k
            rank[i] = r
            r += 1
            remaining[k] -= 1
            left -= 1
        if remaining[k] > 0 and pos + 1 < n:
            j = int(per_cat[k][pos + 1])
            heapq.heappush(heap, (-p[j, k], j, k, pos + 1))
    return _finish(p, category, rank)


def write_assignment_csv(path, assignment: Assignment, user_ids, include_unassigned: bool = False) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["user_id", "category", "probability", "assigned_rank"])
        order = np.argsort(np.where(assignment.rank >= 0, assignment.rank, np.iinfo(np.int64).max), kind="stable")
        for i in order:
            k = int(assignment.category[i])
            if k < 0 and not include_unassigned:
                continue
            prob = "" if k < 0 else repr(float(assignment.probability[i]))
            w.writerow([user_ids[i], k, prob, int(assignment.rank[i])])
