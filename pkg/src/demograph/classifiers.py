"""Linear node-attribute classifiers.

Objectives (``b`` is an unpenalized intercept, ``m_i = w.x_i + b``):

* ``logreg_l1``:  ``||w||_1 + C sum_i log(1 + exp(-y_i m_i))``, ``y = +1`` female, ``-1`` male
* ``linear_svm_l1loss``:  ``0.5 w.w + C sum_i max(0, 1 - y_i m_i)``
* ``multinomial_logistic``:  ``||W||_1 + C sum_i (logsumexp(s_i) - s_i[y_i])``, ``s_i = W^T x_i + b``

The two logistic losses are minimized by proximal Newton: each outer step
solves the local quadratic model plus the L1 term (coordinate sweeps, then a
Newton step on the nonzero coordinates) and backtracks along the result.
Exact zeros in ``w`` are kept and the objective is non-increasing. Training
stops when the predicted decrease drops below ``tol`` relative to the
objective, or after ``max_iter`` outer steps. :func:`minimize_l1` (monotone
FISTA) solves the same problems more slowly and serves as a cross-check.

The SVM is solved by dual coordinate descent for a fixed intercept; the
intercept is then found by a one-dimensional convex search on the optimal
primal value. SVM margins are turned into probabilities with a Platt-style
logistic fit on the training margins.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit
from scipy import optimize
from scipy.special import expit, logsumexp

from .errors import DataError, NumericError

ALGORITHMS = ("logreg_l1", "linear_svm_l1loss", "multinomial_logistic")
MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    algorithm: str = "logreg_l1"
    C: float = 10.0
    k: int = 100
    train_fraction: float = 0.7
    max_iter: int = 200
    tol: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if not self.C > 0:
            raise ValueError("C must be positive")
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must be in (0, 1)")
        if self.k <= 0:
            raise ValueError("k must be positive")


# Default per-task configurations.
GENDER_LOGREG = TrainConfig("logreg_l1", C=10.0, k=100)
GENDER_SVM = TrainConfig("linear_svm_l1loss", C=1.0, k=100)
AGE_MNLOGIT = TrainConfig("multinomial_logistic", C=10.0, k=100)
C_GRID = (0.1, 0.3, 1.0, 3.0, 10.0)
K_GRID = (10, 30, 100)


@dataclass
class LinearModel:
    algorithm: str
    n_classes: int
    n_input_columns: int
    selected: np.ndarray
    weights: np.ndarray
    bias: np.ndarray
    column_names: list = field(default_factory=list)
    calibration: tuple | None = None
    config: TrainConfig | None = None
    objective_history: list = field(default_factory=list)

    @property
    def task(self) -> str:
        return "binary" if self.n_classes == 2 else "multiclass"

    def decision_function(self, matrix: np.ndarray) -> np.ndarray:
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[1] != self.n_input_columns:
            raise DataError(
                f"model expects {self.n_input_columns} columns, got {matrix.shape[-1] if matrix.ndim else 0}"
            )
        return matrix[:, self.selected] @ self.weights + self.bias

    def to_dict(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "algorithm": self.algorithm,
            "n_classes": self.n_classes,
            "n_input_columns": self.n_input_columns,
            "selected": self.selected.tolist(),
            "column_names": list(self.column_names),
            "weights": self.weights.tolist(),
            "bias": np.asarray(self.bias).tolist(),
            "calibration": list(self.calibration) if self.calibration is not None else None,
            "config": asdict(self.config) if self.config is not None else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearModel":
        if d.get("format_version") != MODEL_FORMAT_VERSION:
            raise DataError(f"unsupported model format {d.get('format_version')!r}")
        return cls(
            algorithm=d["algorithm"],
            n_classes=d["n_classes"],
            n_input_columns=d["n_input_columns"],
            selected=np.asarray(d["selected"], dtype=np.int64),
            weights=np.asarray(d["weights"], dtype=np.float64),
            bias=np.asarray(d["bias"], dtype=np.float64),
            column_names=d.get("column_names", []),
            calibration=tuple(d["calibration"]) if d.get("calibration") is not None else None,
            config=TrainConfig(**d["config"]) if d.get("config") else None,
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path) -> "LinearModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# feature selection


def anova_f_scores(matrix: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """One-way ANOVA F statistic of each column against the class labels.

    Constant columns score 0; columns with zero within-class spread but
    distinct class means score ``inf``.
    """
    x = np.asarray(matrix, dtype=np.float64)
    labels = np.asarray(labels)
    classes = np.unique(labels)
    n, k = len(x), len(classes)
    grand = x.mean(axis=0)
    ssb = np.zeros(x.shape[1])
    ssw = np.zeros(x.shape[1])
    for c in classes:
        xc = x[labels == c]
        mc = xc.mean(axis=0)
        ssb += len(xc) * (mc - grand) ** 2
        ssw += ((xc - mc) ** 2).sum(axis=0)
    dfb, dfw = k - 1, n - k
    with np.errstate(divide="ignore", invalid="ignore"):
        f = (ssb / dfb) / (ssw / dfw)
    f = np.where(ssb <= 1e-12 * np.maximum(ssw, 1e-300), 0.0, f)
    f = np.where(np.isnan(f), 0.0, f)
    return f


def select_top_k_features(matrix: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` highest-F columns, in ascending column order.

    ``k`` larger than the column count selects every column. Ties are broken
    by lower column index.
    """
    if k <= 0:
        raise DataError("k must be positive")
    n_cols = np.asarray(matrix).shape[1]
    if k >= n_cols:
        return np.arange(n_cols)
    f = anova_f_scores(matrix, labels)
    order = np.argsort(-f, kind="stable")
    return np.sort(order[:k])


# ---------------------------------------------------------------------------
# smooth losses and proximal solver


def logistic_loss_grad(params: np.ndarray, x: np.ndarray, y: np.ndarray, C: float):
    """Value and gradient of ``C sum log(1 + exp(-y (x.w + b)))``; ``params = [w, b]``."""
    w, b = params[:-1], params[-1]
    z = y * (x @ w + b)
    value = C * np.logaddexp(0.0, -z).sum()
    s = -C * y * expit(-z)
    return value, np.concatenate([x.T @ s, [s.sum()]])


def softmax_loss_grad(params: np.ndarray, x: np.ndarray, y: np.ndarray, C: float, n_classes: int):
    """Value and gradient of ``C sum (logsumexp(s) - s[y])``; ``params = [vec(W), b]``."""
    d = x.shape[1]
    W = params[: d * n_classes].reshape(d, n_classes)
    b = params[d * n_classes:]
    s = x @ W + b
    lse = logsumexp(s, axis=1)
    value = C * (lse - s[np.arange(len(y)), y]).sum()
    r = np.exp(s - lse[:, None])
    r[np.arange(len(y)), y] -= 1.0
    r *= C
    return value, np.concatenate([(x.T @ r).ravel(), r.sum(axis=0)])


def _soft_threshold(v: np.ndarray, step: float, mask: np.ndarray) -> np.ndarray:
    out = v.copy()
    out[mask] = np.sign(v[mask]) * np.maximum(np.abs(v[mask]) - step, 0.0)
    return out


def _design_norm_sq(x: np.ndarray) -> float:
    """Squared spectral norm of ``[x, 1]``."""
    xa = np.hstack([x, np.ones((len(x), 1))])
    return float(np.linalg.eigvalsh(xa.T @ xa)[-1])


def minimize_l1(fun, x0: np.ndarray, l1_mask: np.ndarray, lipschitz: float,
                max_iter: int, tol: float, patience: int = 10):
    """Monotone FISTA for ``fun(x) + ||x[l1_mask]||_1``.

    Returns ``(x, history)`` where ``history`` holds the composite objective
    after every iteration (non-increasing).
    """
    L = max(lipschitz, 1e-12)
    x = x0.astype(np.float64).copy()
    fx, _ = fun(x)
    Fx = fx + np.abs(x[l1_mask]).sum()
    y, t = x.copy(), 1.0
    fy, gy = fun(y)
    history = [Fx]
    for _ in range(max_iter):
        while True:
            z = _soft_threshold(y - gy / L, 1.0 / L, l1_mask)
            fz, _ = fun(z)
            d = z - y
            if fz <= fy + gy @ d + 0.5 * L * (d @ d) + 1e-12 * abs(fy):
                break
            L *= 2.0
        Fz = fz + np.abs(z[l1_mask]).sum()
        if not np.isfinite(Fz):
            raise NumericError("objective became non-finite")
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        if Fz <= Fx:
            x_next, F_next = z, Fz
            y = x_next + ((t - 1.0) / t_next) * (x_next - x)
        else:
            # reject the extrapolated step and restart momentum
            x_next, F_next = x, Fx
            y = x.copy()
            t_next = 1.0
        x, Fx, t = x_next, F_next, t_next
        history.append(Fx)
        fy, gy = fun(y)
        if len(history) > patience:
            old = history[-1 - patience]
            if old - Fx <= tol * max(abs(Fx), 1e-300):
                break
    return x, history


@njit(cache=True)
def _cd_sweeps(H, g, x, mask, d, Hd, sweeps):
    """Coordinate descent on ``g.d + d.H.d / 2 + |x + d|_1`` (masked coordinates)."""
    n = g.shape[0]
    for _ in range(sweeps):
        for j in range(n):
            a = max(H[j, j], 1e-12)
            v = x[j] - (g[j] + Hd[j] - a * d[j]) / a
            if mask[j]:
                t = 1.0 / a
                u = v - t if v > t else (v + t if v < -t else 0.0)
            else:
                u = v
            delta = (u - x[j]) - d[j]
            if delta != 0.0:
                d[j] += delta
                for i in range(n):
                    Hd[i] += H[i, j] * delta


@njit(cache=True)
def _model_kkt(g, x, mask, d, Hd):
    """Largest minimum-norm subgradient entry of the quadratic model at ``d``."""
    worst = 0.0
    for j in range(g.shape[0]):
        gr = g[j] + Hd[j]
        u = x[j] + d[j]
        if not mask[j]:
            r = abs(gr)
        elif u > 0:
            r = abs(gr + 1.0)
        elif u < 0:
            r = abs(gr - 1.0)
        else:
            r = max(abs(gr) - 1.0, 0.0)
        worst = max(worst, r)
    return worst


def _solve_l1_model(H, g, x, mask, tol, max_rounds=200):
    """Minimize the local quadratic model plus L1 term over the step ``d``.

    Rounds of coordinate descent alternate with a Newton step on the current
    support at fixed signs; coordinates whose sign would flip are set to zero
    and the step is halved until the model value drops.
    """
    d = np.zeros_like(x)
    Hd = np.zeros_like(x)
    ridge = 1e-4 * max(np.trace(H) / len(x), 1e-300)
    for _ in range(max_rounds):
        _cd_sweeps(H, g, x, mask, d, Hd, 5)
        if _model_kkt(g, x, mask, d, Hd) <= tol:
            break
        u = x + d
        free = ~mask | (u != 0)
        s = np.where(mask, np.sign(u), 0.0)
        Hf = H[np.ix_(free, free)]
        p = np.zeros_like(x)
        p[free] = -np.linalg.solve(Hf + ridge * np.eye(len(Hf)), (g + Hd + s)[free])
        m0 = g @ d + 0.5 * d @ Hd + np.abs(u[mask]).sum()
        t = 1.0
        while t > 1e-12:
            dn = d + t * p
            flip = mask & ((x + dn) * s < 0)
            dn[flip] = -x[flip]
            Hdn = H @ dn
            if g @ dn + 0.5 * dn @ Hdn + np.abs((x + dn)[mask]).sum() < m0:
                d, Hd = dn, Hdn
                break
            t *= 0.5
    return d


def minimize_l1_newton(fun, hess, x0: np.ndarray, l1_mask: np.ndarray, max_iter: int, tol: float):
    """Proximal Newton for ``fun(x) + ||x[l1_mask]||_1`` with an exact Hessian.

    ``fun`` returns ``(value, gradient)`` and ``hess`` the dense Hessian. Each
    step minimizes the local quadratic model plus the L1 term, then
    backtracks until a sufficient decrease. Stops once the predicted decrease
    falls below ``tol`` relative to the objective. Returns ``(x, history)``.
    """
    x = x0.astype(np.float64).copy()
    f, g = fun(x)
    F = f + np.abs(x[l1_mask]).sum()
    history = [F]
    for _ in range(max_iter):
        H = hess(x)
        zero = np.zeros_like(x)
        kkt = _model_kkt(g, x, l1_mask, zero, zero)
        d = _solve_l1_model(H, g, x, l1_mask, max(1e-9 * max(np.abs(g).max(), 1.0), 0.01 * kkt))
        delta = g @ d + np.abs((x + d)[l1_mask]).sum() - np.abs(x[l1_mask]).sum()
        if not delta < 0:
            break
        alpha = 1.0
        while True:
            xn = x + alpha * d
            fn, gn = fun(xn)
            Fn = fn + np.abs(xn[l1_mask]).sum()
            if Fn <= F + 1e-4 * alpha * delta or alpha < 1e-10:
                break
            alpha *= 0.5
        if not np.isfinite(Fn):
            raise NumericError("objective became non-finite")
        if Fn > F:
            break
        x, f, g, F = xn, fn, gn, Fn
        history.append(F)
        if -delta <= tol * max(abs(F), 1e-300):
            break
    return x, history


def logistic_hessian(params: np.ndarray, x: np.ndarray, y: np.ndarray, C: float) -> np.ndarray:
    xa = np.hstack([x, np.ones((len(x), 1))])
    p = expit(y * (xa @ params))
    w = C * p * (1.0 - p)
    return (xa * w[:, None]).T @ xa


def softmax_hessian(params: np.ndarray, x: np.ndarray, C: float, n_classes: int) -> np.ndarray:
    """Hessian in the ``[vec(W), b]`` layout used by :func:`softmax_loss_grad`."""
    d, k = x.shape[1], n_classes
    W = params[: d * k].reshape(d, k)
    s = x @ W + params[d * k:]
    P = np.exp(s - logsumexp(s, axis=1)[:, None])
    xa = np.hstack([x, np.ones((len(x), 1))])
    blocks = np.empty((d + 1, k, d + 1, k))
    for a in range(k):
        for b in range(a, k):
            w = C * P[:, a] * (float(a == b) - P[:, b])
            blk = (xa * w[:, None]).T @ xa
            blocks[:, a, :, b] = blk
            blocks[:, b, :, a] = blk.T
    # augmented index j * k + c maps to W[j, c] for j < d and to b[c] for j == d,
    # which is exactly the parameter layout
    return blocks.reshape((d + 1) * k, (d + 1) * k)


def _binary_targets(labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if len(classes) < 2:
        raise DataError("training labels contain a single class")
    if not set(classes.tolist()) <= {0, 1}:
        raise DataError("binary labels must be 0 (male) or 1 (female)")
    return np.where(labels == 1, 1.0, -1.0)


def _prepare(matrix, labels, config: TrainConfig, column_names):
    x = np.asarray(matrix, dtype=np.float64)
    labels = np.asarray(labels)
    if x.ndim != 2 or len(x) != len(labels):
        raise DataError("matrix and labels do not align")
    if not np.all(np.isfinite(x)):
        raise DataError("training matrix contains non-finite values")
    selected = select_top_k_features(x, labels, config.k)
    names = [column_names[i] for i in selected] if column_names is not None else []
    return x, labels, selected, names


def train_logreg_l1(matrix, labels, config: TrainConfig = GENDER_LOGREG, column_names=None) -> LinearModel:
    x, labels, selected, names = _prepare(matrix, labels, config, column_names)
    y = _binary_targets(labels)
    xs = x[:, selected]
    d = xs.shape[1]
    mask = np.zeros(d + 1, dtype=bool)
    mask[:d] = True
    params, history = minimize_l1_newton(lambda p: logistic_loss_grad(p, xs, y, config.C),
                                         lambda p: logistic_hessian(p, xs, y, config.C),
                                         np.zeros(d + 1), mask, config.max_iter, config.tol)
    return LinearModel("logreg_l1", 2, x.shape[1], selected, params[:d], np.asarray(params[d]),
                       names, None, config, history)


def train_multinomial_logistic(matrix, labels, config: TrainConfig = AGE_MNLOGIT, column_names=None,
                               n_classes: int | None = None) -> LinearModel:
    x, labels, selected, names = _prepare(matrix, labels, config, column_names)
    labels = labels.astype(np.int64)
    if len(np.unique(labels)) < 2:
        raise DataError("training labels contain a single class")
    n_classes = int(labels.max()) + 1 if n_classes is None else n_classes
    xs = x[:, selected]
    d = xs.shape[1]
    mask = np.zeros(d * n_classes + n_classes, dtype=bool)
    mask[: d * n_classes] = True
    params, history = minimize_l1_newton(lambda p: softmax_loss_grad(p, xs, labels, config.C, n_classes),
                                         lambda p: softmax_hessian(p, xs, config.C, n_classes),
                                         np.zeros(mask.size), mask, config.max_iter, config.tol)
    W = params[: d * n_classes].reshape(d, n_classes)
    b = params[d * n_classes:]
    return LinearModel("multinomial_logistic", n_classes, x.shape[1], selected, W, b, names, None,
                       config, history)


# ---------------------------------------------------------------------------
# L1-loss linear SVM


@njit(cache=True)
def _dcd_epoch(x, y, e, C, alpha, w, qdiag, order):
    """One pass of dual coordinate descent; returns projected-gradient spread."""
    pg_max = -np.inf
    pg_min = np.inf
    d = x.shape[1]
    for idx in range(order.shape[0]):
        i = order[idx]
        g = 0.0
        for j in range(d):
            g += w[j] * x[i, j]
        g = y[i] * g - e[i]
        a = alpha[i]
        if a <= 0.0:
            pg = min(g, 0.0)
        elif a >= C:
            pg = max(g, 0.0)
        else:
            pg = g
        if pg > pg_max:
            pg_max = pg
        if pg < pg_min:
            pg_min = pg
        if pg != 0.0 and qdiag[i] > 0.0:
            a_new = min(max(a - g / qdiag[i], 0.0), C)
            delta = (a_new - a) * y[i]
            if delta != 0.0:
                for j in range(d):
                    w[j] += delta * x[i, j]
                alpha[i] = a_new
    return pg_max - pg_min


def _svm_dual_objective(w, alpha, e) -> float:
    return 0.5 * float(w @ w) - float(alpha @ e)


def _svm_primal(w, b, x, y, C) -> float:
    return 0.5 * float(w @ w) + C * float(np.maximum(0.0, 1.0 - y * (x @ w + b)).sum())


def _svm_fixed_bias(x, y, C, b, alpha, rng, max_epochs, gap_tol):
    """Dual coordinate descent with the intercept held at ``b``.

    Stops when the relative duality gap drops below ``gap_tol``. ``history``
    is the dual objective in minimization form, one entry per epoch.
    """
    e = 1.0 - y * b
    w = (alpha * y) @ x
    qdiag = np.einsum("ij,ij->i", x, x)
    history = [_svm_dual_objective(w, alpha, e)]
    for epoch in range(max_epochs):
        _dcd_epoch(x, y, e, C, alpha, w, qdiag, rng.permutation(len(y)))
        history.append(_svm_dual_objective(w, alpha, e))
        if epoch % 5 == 4:
            # recompute to remove accumulated drift in w
            w[:] = (alpha * y) @ x
            primal = _svm_primal(w, b, x, y, C)
            if primal + history[-1] <= gap_tol * max(abs(primal), 1e-300):
                break
    w = (alpha * y) @ x
    return w, alpha, history


def train_linear_svm(matrix, labels, config: TrainConfig = GENDER_SVM, column_names=None,
                     gap_tol: float = 1e-7, max_epochs: int = 20000) -> LinearModel:
    x, labels, selected, names = _prepare(matrix, labels, config, column_names)
    y = _binary_targets(labels)
    xs = x[:, selected]
    # exact reparametrization (the intercept is free): b = b_centered - w.mu
    mu = xs.mean(axis=0)
    xs = np.ascontiguousarray(xs - mu)
    rng = np.random.default_rng(config.seed)
    cache: dict[float, tuple] = {}
    state = {"alpha": np.zeros(len(y))}

    def value(b: float) -> float:
        b = float(b)
        if b not in cache:
            w, alpha, hist = _svm_fixed_bias(xs, y, config.C, b, state["alpha"].copy(), rng, max_epochs, gap_tol)
            state["alpha"] = alpha
            cache[b] = (_svm_primal(w, b, xs, y, config.C), w, alpha, hist)
        return cache[b][0]

    # V(b) = min_w primal(w, b) is convex in b
    optimize.minimize_scalar(value, bracket=(-1.0, 1.0), method="brent",
                             options={"xtol": 1e-6, "maxiter": 100})
    b_best = min(cache, key=lambda k: (cache[k][0], abs(k)))
    primal, w, alpha, hist = cache[b_best]
    margins = xs @ w + b_best
    model = LinearModel("linear_svm_l1loss", 2, x.shape[1], selected, w, np.asarray(b_best - w @ mu), names,
                        platt_calibrate(margins, y), config, hist)
    model.primal_objective = primal
    return model


def platt_calibrate(margins: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Fit ``P(y=+1 | m) = sigmoid(A m + B)`` with Platt's smoothed targets."""
    n_pos = float((y > 0).sum())
    n_neg = float((y <= 0).sum())
    t = np.where(y > 0, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))

    def nll(ab):
        z = ab[0] * margins + ab[1]
        p = expit(z)
        val = np.sum(np.logaddexp(0.0, z) - t * z)
        g = p - t
        return val, np.array([g @ margins, g.sum()])

    res = optimize.minimize(nll, np.array([1.0, 0.0]), jac=True, method="L-BFGS-B")
    return float(res.x[0]), float(res.x[1])


# ---------------------------------------------------------------------------


def train(matrix, labels, config: TrainConfig, column_names=None, n_classes: int | None = None) -> LinearModel:
    if config.algorithm == "logreg_l1":
        return train_logreg_l1(matrix, labels, config, column_names)
    if config.algorithm == "linear_svm_l1loss":
        return train_linear_svm(matrix, labels, config, column_names)
    return train_multinomial_logistic(matrix, labels, config, column_names, n_classes)


def predict_proba(model: LinearModel, matrix) -> np.ndarray:
    """Class probabilities with columns in category order.

    Binary models return ``[P(category 0), P(category 1)]`` where category 1
    (female) is the ``y = +1`` class.
    """
    scores = model.decision_function(matrix)
    if model.n_classes == 2:
        if model.calibration is not None:
            A, B = model.calibration
            p = expit(A * scores + B)
        else:
            p = expit(scores)
        return np.column_stack([1.0 - p, p])
    z = scores - logsumexp(scores, axis=1, keepdims=True)
    return np.exp(z)


def predict(model: LinearModel, matrix) -> np.ndarray:
    return np.argmax(predict_proba(model, matrix), axis=1)


@dataclass
class GridResult:
    best: TrainConfig
    model: LinearModel
    rows: list

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["algorithm", "C", "k", "validation_accuracy"])
            for cfg, acc in self.rows:
                w.writerow([cfg.algorithm, cfg.C, cfg.k, f"{acc:.6f}"])


def expand_grid(algorithm: str, Cs=C_GRID, ks=K_GRID, **kw) -> list[TrainConfig]:
    return [TrainConfig(algorithm, C=c, k=k, **kw) for k in ks for c in Cs]


def grid_search(configs, train_x, train_y, val_x, val_y, column_names=None,
                n_classes: int | None = None) -> GridResult:
    """Exhaustive evaluation; best = highest validation accuracy, ties to smaller k then C."""
    configs = list(configs)
    if not configs:
        raise DataError("empty parameter grid")
    rows = []
    models = []
    for cfg in configs:
        model = train(train_x, train_y, cfg, column_names, n_classes)
        acc = float(np.mean(predict(model, val_x) == np.asarray(val_y)))
        rows.append((cfg, acc))
        models.append(model)
    best_i = min(range(len(rows)), key=lambda i: (-rows[i][1], rows[i][0].k, rows[i][0].C))
    return GridResult(rows[best_i][0], models[best_i], rows)
