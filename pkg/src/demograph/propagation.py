"""Reaction-diffusion label propagation over the communication graph.

Every node carries a probability vector over ``C`` categories. With initial
state ``f`` and diffusion strength ``lam``::

    g_0 = f
    g_t[x] = (1 - lam) f[x] + lam * mean(g_{t-1}[y] for y adjacent to x)

Updates are synchronous (Jacobi style, double-buffered) so the result does
not depend on node visitation order. Nodes without neighbors keep
``g[x] = f[x]``. The map is a contraction with constant ``lam`` in the sup
norm, so the per-step residual ``max |g_t - g_{t-1}|`` decays at least
geometrically.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .cdr_model import SocialGraph
from .errors import DataError, NumericError

log = logging.getLogger(__name__)

DEFAULT_LAMBDA = 0.5
DEFAULT_ITERATIONS = 30
EARLY_STOP_RESIDUAL = 1e-9
ROW_SUM_TOL = 1e-9


@dataclass
class LabelState:
    f: np.ndarray
    g: np.ndarray
    lam: float = DEFAULT_LAMBDA
    t: int = 0
    residuals: list = field(default_factory=list)

    @property
    def n_categories(self) -> int:
        return self.f.shape[1]

    def check(self, tol: float = ROW_SUM_TOL) -> None:
        for name in ("f", "g"):
            m = getattr(self, name)
            if np.any(m < -tol) or np.any(np.abs(m.sum(axis=1) - 1.0) > tol):
                raise NumericError(f"rows of {name} are not probability vectors")

    def save(self, path) -> None:
        np.savez(path, f=self.f, g=self.g, lam=self.lam, t=self.t, residuals=np.asarray(self.residuals))

    @classmethod
    def load(cls, path) -> "LabelState":
        with np.load(path) as z:
            return cls(z["f"], z["g"], float(z["lam"]), int(z["t"]), z["residuals"].tolist())


def _one_hot_rows(f: np.ndarray, nodes: np.ndarray, categories: np.ndarray, n_categories: int) -> None:
    categories = np.asarray(categories, dtype=np.int64)
    if np.any((categories < 0) | (categories >= n_categories)):
        raise DataError(f"label outside [0, {n_categories})")
    f[nodes] = 0.0
    f[nodes, categories] = 1.0


def init_state_pure(n_nodes: int, labeled_nodes, categories, n_categories: int,
                    lam: float = DEFAULT_LAMBDA) -> LabelState:
    """One-hot rows for labeled training nodes, uniform ``1/C`` elsewhere."""
    f = np.full((n_nodes, n_categories), 1.0 / n_categories)
    nodes = np.asarray(labeled_nodes, dtype=np.int64)
    if nodes.size:
        _one_hot_rows(f, nodes, categories, n_categories)
    return LabelState(f, f.copy(), lam)


def init_state_combined(n_nodes: int, labeled_nodes, categories, n_categories: int,
                        predicted_nodes, predicted_proba, lam: float = DEFAULT_LAMBDA,
                        tol: float = ROW_SUM_TOL) -> LabelState:
    """Like :func:`init_state_pure` but unlabeled nodes with classifier output start there.

    ``predicted_proba`` rows belong to ``predicted_nodes``; nodes with neither a
    label nor a prediction (no features) stay uniform. Labels override
    predictions.
    """
    proba = np.asarray(predicted_proba, dtype=np.float64)
    pnodes = np.asarray(predicted_nodes, dtype=np.int64)
    if proba.shape != (len(pnodes), n_categories):
        raise DataError("prediction matrix shape does not match nodes x categories")
    if np.any(~np.isfinite(proba)) or np.any(proba < -tol) or np.any(np.abs(proba.sum(axis=1) - 1.0) > tol):
        raise DataError("invalid probability row in classifier output")
    f = np.full((n_nodes, n_categories), 1.0 / n_categories)
    f[pnodes] = proba
    nodes = np.asarray(labeled_nodes, dtype=np.int64)
    if nodes.size:
        _one_hot_rows(f, nodes, categories, n_categories)
    return LabelState(f, f.copy(), lam)


class Diffusion:
    """Precomputed row-normalized operator ``D^-1 W`` for a fixed graph."""

    def __init__(self, graph: SocialGraph, weights: sp.csr_matrix | None = None):
        w = graph.adjacency() if weights is None else sp.csr_matrix(weights, dtype=np.float64)
        if w.shape != (graph.n_nodes, graph.n_nodes):
            raise DataError("weight matrix shape does not match the graph")
        w.sort_indices()
        strength = np.asarray(w.sum(axis=1)).ravel()
        self.isolated = strength <= 0
        inv = np.where(self.isolated, 0.0, 1.0 / np.where(self.isolated, 1.0, strength))
        self.operator = sp.diags(inv) @ w
        self.operator = sp.csr_matrix(self.operator)
        self.operator.sort_indices()

    def step(self, state: LabelState) -> np.ndarray:
        lam = state.lam
        g_new = (1.0 - lam) * state.f + lam * (self.operator @ state.g)
        g_new[self.isolated] = state.f[self.isolated]
        return g_new


def propagate_step(state: LabelState, graph: SocialGraph | Diffusion) -> LabelState:
    diffusion = graph if isinstance(graph, Diffusion) else Diffusion(graph)
    g_new = diffusion.step(state)
    residual = float(np.max(np.abs(g_new - state.g))) if g_new.size else 0.0
    return LabelState(state.f, g_new, state.lam, state.t + 1, state.residuals + [residual])


def propagate(state: LabelState, graph: SocialGraph | Diffusion, m: int = DEFAULT_ITERATIONS,
              early_stop: float | None = EARLY_STOP_RESIDUAL, check_rows: bool = True) -> LabelState:
    """Apply ``m`` synchronous steps, stopping early once the residual is below ``early_stop``.

    With ``check_rows`` every step asserts that rows still sum to one.
    """
    if m < 0:
        raise ValueError("iteration count must be non-negative")
    diffusion = graph if isinstance(graph, Diffusion) else Diffusion(graph)
    f, g = state.f, state.g
    residuals = list(state.residuals)
    t = state.t
    for _ in range(m):
        g_new = diffusion.step(LabelState(f, g, state.lam))
        if check_rows and g_new.size and np.max(np.abs(g_new.sum(axis=1) - 1.0)) > ROW_SUM_TOL:
            raise NumericError(f"row sums drifted at step {t + 1}")
        residual = float(np.max(np.abs(g_new - g))) if g.size else 0.0
        g = g_new
        t += 1
        residuals.append(residual)
        log.debug("step %d residual %.3e", t, residual)
        if early_stop is not None and residual < early_stop:
            break
    return LabelState(f, g, state.lam, t, residuals)


def argmax_predict(state: LabelState, nodes=None) -> np.ndarray:
    """Most probable category per node; ties go to the lowest index."""
    g = state.g if nodes is None else state.g[np.asarray(nodes, dtype=np.int64)]
    return np.argmax(g, axis=1)


def write_residual_log(path, state: LabelState) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "residual_sup_norm"])
        for t, r in enumerate(state.residuals, start=1):
            w.writerow([t, repr(r)])
