"""Evaluation protocol shared by the CLI stages and the in-memory benchmarks.

Labeled users are split (stratified) into training and validation parts.
The prediction population is every operator client that is not a training
label; validation users are part of it and are treated as unlabeled by
every predictor. For a coverage ``q`` PPS assigns ``round(q * |population|)``
users with quotas matching the training label distribution, and accuracy is
``correct / assigned`` over the assigned validation users.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import classifiers as clf
from .cdr_model import EventTable, SocialGraph, UserSets, age_groups
from .errors import DataError
from .features import FEATURE_NAMES, extract_features
from .pps import Assignment, compute_quotas, pps_assign
from .preprocessing import ModelMatrix, assemble_model_matrix, load_scaling, save_scaling
from .propagation import Diffusion, LabelState, init_state_combined, init_state_pure, propagate

log = logging.getLogger(__name__)

TASKS = ("gender", "age")
METHODS = ("ml", "rdif", "ml+rdif")
DEFAULT_QS = (1.0, 0.5, 0.25, 0.125)
N_CATEGORIES = {"gender": 2, "age": 4}


@dataclass(frozen=True)
class RunConfig:
    task: str = "age"
    methods: tuple = ("ml", "rdif", "ml+rdif")
    qs: tuple = DEFAULT_QS
    lam: float = 0.5
    iters: int = 30
    seed: int = 0
    train_fraction: float = 0.7
    classifier: clf.TrainConfig | None = None
    grid: bool = False

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise ValueError(f"unknown methods {sorted(bad)}")
        if not 0 <= self.lam <= 1:
            raise ValueError("lambda must be in [0, 1]")
        for q in self.qs:
            if not 0 < q <= 1:
                raise ValueError("q must be in (0, 1]")

    def classifier_config(self) -> clf.TrainConfig:
        if self.classifier is not None:
            return self.classifier
        return clf.GENDER_LOGREG if self.task == "gender" else clf.AGE_MNLOGIT

    def to_dict(self) -> dict:
        d = asdict(self)
        d["methods"] = list(self.methods)
        d["qs"] = list(self.qs)
        return d

    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


def task_labels(user_sets: UserSets, task: str) -> tuple[np.ndarray, np.ndarray]:
    """``(nodes, category)`` of all ground-truth users for the task."""
    nodes, gender, age = user_sets.label_arrays()
    return nodes, (gender if task == "gender" else age_groups(age))


def split_ground_truth(nodes, categories, fraction: float = 0.7, seed: int = 0):
    """Stratified split into ``(train_nodes, train_cat, val_nodes, val_cat)``, each sorted by node."""
    if not 0 < fraction < 1:
        raise DataError("split fraction must be in (0, 1)")
    nodes = np.asarray(nodes, dtype=np.int64)
    categories = np.asarray(categories, dtype=np.int64)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EED]))
    train_mask = np.zeros(len(nodes), dtype=bool)
    for c in np.unique(categories):
        members = np.flatnonzero(categories == c)
        if len(members) < 2:
            raise DataError(f"category {c} has fewer than two labeled users")
        members = members[np.argsort(nodes[members], kind="stable")]
        chosen = rng.permutation(len(members))[: int(round(fraction * len(members)))]
        train_mask[members[chosen]] = True
    tr, va = np.flatnonzero(train_mask), np.flatnonzero(~train_mask)
    tr = tr[np.argsort(nodes[tr])]
    va = va[np.argsort(nodes[va])]
    return nodes[tr], categories[tr], nodes[va], categories[va]


def category_shares(categories, n_categories: int) -> np.ndarray:
    counts = np.bincount(np.asarray(categories, dtype=np.int64), minlength=n_categories)
    return counts / counts.sum()


@dataclass
class EvalRow:
    task: str
    method: str
    q: float
    population: int
    assigned: int
    assigned_validation: int
    correct: int

    @property
    def accuracy(self) -> float | None:
        return self.correct / self.assigned_validation if self.assigned_validation else None

    @property
    def coverage(self) -> float:
        return self.assigned / self.population if self.population else 0.0


@dataclass
class EvalReport:
    task: str
    method: str
    rows: list
    predicted_distribution: list
    confusion: list
    provenance: dict = field(default_factory=dict)

    def accuracy(self, q: float) -> float | None:
        for r in self.rows:
            if r.q == q:
                return r.accuracy
        raise KeyError(q)

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "method": self.method,
            "denominator": "assigned validation users",
            "rows": [
                {"q": r.q, "population": r.population, "assigned": r.assigned,
                 "coverage": r.coverage, "assigned_validation": r.assigned_validation,
                 "correct": r.correct, "accuracy": r.accuracy}
                for r in self.rows
            ],
            "predicted_distribution": self.predicted_distribution,
            "confusion_matrix_q1": self.confusion,
            "provenance": self.provenance,
        }


def evaluate_accuracy(task: str, method: str, q: float, population_nodes, assignment: Assignment,
                      val_nodes, val_categories) -> EvalRow:
    """Accuracy over validation users that received a label at this coverage.

    ``accuracy`` is ``None`` (undefined) when no validation user was assigned.
    """
    population_nodes = np.asarray(population_nodes, dtype=np.int64)
    pos = np.searchsorted(population_nodes, val_nodes)
    pos = np.minimum(pos, len(population_nodes) - 1)
    present = population_nodes[pos] == val_nodes
    if not np.all(present):
        raise DataError("validation users must belong to the prediction population")
    pred = assignment.category[pos]
    hit = pred >= 0
    return EvalRow(task, method, q, len(population_nodes), int(assignment.assigned.sum()),
                   int(hit.sum()), int((pred[hit] == np.asarray(val_categories)[hit]).sum()))


def confusion_matrix(truth, predicted, n_categories: int) -> np.ndarray:
    truth = np.asarray(truth)
    predicted = np.asarray(predicted)
    keep = predicted >= 0
    return np.bincount(truth[keep] * n_categories + predicted[keep],
                       minlength=n_categories ** 2).reshape(n_categories, n_categories)


# ---------------------------------------------------------------------------


@dataclass
class Prepared:
    """Features, split and model matrix for one task."""

    task: str
    n_categories: int
    clients: np.ndarray
    features: np.ndarray
    matrix: ModelMatrix
    train_nodes: np.ndarray
    train_cat: np.ndarray
    val_nodes: np.ndarray
    val_cat: np.ndarray
    population: np.ndarray

    def rows_of(self, nodes) -> np.ndarray:
        return np.searchsorted(self.clients, nodes)

    def save(self, path_npz, path_scaling) -> None:
        np.savez(path_npz, task=self.task, clients=self.clients, features=self.features,
                 values=self.matrix.values, train_nodes=self.train_nodes, train_cat=self.train_cat,
                 val_nodes=self.val_nodes, val_cat=self.val_cat, population=self.population)
        save_scaling(path_scaling, self.matrix)

    @classmethod
    def load(cls, path_npz, path_scaling) -> "Prepared":
        columns, scaling = load_scaling(path_scaling)
        with np.load(path_npz) as z:
            task = str(z["task"])
            return cls(task, N_CATEGORIES[task], z["clients"], z["features"],
                       ModelMatrix(z["values"], columns, scaling), z["train_nodes"], z["train_cat"],
                       z["val_nodes"], z["val_cat"], z["population"])


def prepare(events: EventTable, graph: SocialGraph, user_sets: UserSets, task: str,
            train_fraction: float = 0.7, seed: int = 0, tz: str = "UTC",
            features: np.ndarray | None = None) -> Prepared:
    clients = user_sets.client_indices()
    if features is None:
        features = extract_features(events, graph, clients, tz)
    nodes, cats = task_labels(user_sets, task)
    tr_n, tr_c, va_n, va_c = split_ground_truth(nodes, cats, train_fraction, seed)
    train_rows = np.searchsorted(clients, tr_n)
    matrix = assemble_model_matrix(features, FEATURE_NAMES, fit_rows=train_rows)
    population = np.setdiff1d(clients, tr_n)
    return Prepared(task, N_CATEGORIES[task], clients, features, matrix, tr_n, tr_c, va_n, va_c, population)


def fit_classifier(prep: Prepared, config: clf.TrainConfig, grid: bool = False, seed: int = 0):
    """Train on the training split. With ``grid`` the training split is split
    again 70/30 for model selection and the winner is refit on all of it."""
    x = prep.matrix.values[prep.rows_of(prep.train_nodes)]
    y = prep.train_cat
    names = prep.matrix.columns
    if not grid:
        return clf.train(x, y, config, names, prep.n_categories), None
    idx = np.arange(len(y))
    tr, _, va, _ = split_ground_truth(idx, y, config.train_fraction, seed + 1)
    grid_cfgs = clf.expand_grid(config.algorithm)
    result = clf.grid_search(grid_cfgs, x[tr], y[tr], x[va], y[va], names, prep.n_categories)
    return clf.train(x, y, result.best, names, prep.n_categories), result


def predict_scores(prep: Prepared, graph: SocialGraph | Diffusion, method: str, model=None,
                   lam: float = 0.5, iters: int = 30) -> tuple[np.ndarray, LabelState | None]:
    """Probability rows for ``prep.population``; only training labels are used."""
    c = prep.n_categories
    if method in ("ml", "ml+rdif"):
        if model is None:
            raise DataError(f"method {method} needs a trained classifier")
        ml = clf.predict_proba(model, prep.matrix.values[prep.rows_of(prep.population)])
        if method == "ml":
            return ml, None
    n_nodes = graph.operator.shape[0] if isinstance(graph, Diffusion) else graph.n_nodes
    if method == "rdif":
        state = init_state_pure(n_nodes, prep.train_nodes, prep.train_cat, c, lam)
    else:
        state = init_state_combined(n_nodes, prep.train_nodes, prep.train_cat, c, prep.population, ml, lam)
    state = propagate(state, graph, iters)
    return state.g[prep.population], state


def assign_all(prep: Prepared, scores: np.ndarray, qs=DEFAULT_QS) -> dict[float, Assignment]:
    """PPS at every coverage with quotas from the training label distribution."""
    shares = category_shares(prep.train_cat, prep.n_categories)
    return {q: pps_assign(scores, compute_quotas(len(prep.population), q, shares)) for q in qs}


def predicted_distribution(scores: np.ndarray, n_categories: int) -> list:
    """Share of each category under unconstrained argmax."""
    return (np.bincount(np.argmax(scores, axis=1), minlength=n_categories) / max(len(scores), 1)).tolist()


def build_report(prep: Prepared, method: str, assignments: dict, distribution: list,
                 provenance: dict | None = None) -> EvalReport:
    rows = [evaluate_accuracy(prep.task, method, q, prep.population, a, prep.val_nodes, prep.val_cat)
            for q, a in assignments.items()]
    q_conf = 1.0 if 1.0 in assignments else max(assignments)
    pos = np.searchsorted(prep.population, prep.val_nodes)
    confusion = confusion_matrix(prep.val_cat, assignments[q_conf].category[pos], prep.n_categories)
    return EvalReport(prep.task, method, rows, distribution, confusion.tolist(), provenance or {})


def collapse_and_evaluate(prep: Prepared, method: str, scores: np.ndarray, qs=DEFAULT_QS,
                          provenance: dict | None = None) -> tuple[EvalReport, dict]:
    assignments = assign_all(prep, scores, qs)
    dist = predicted_distribution(scores, prep.n_categories)
    return build_report(prep, method, assignments, dist, provenance), assignments


def run_experiment(events: EventTable, graph: SocialGraph, user_sets: UserSets, config: RunConfig,
                   tz: str = "UTC", provenance: dict | None = None, features=None) -> dict[str, EvalReport]:
    """All requested methods for one task; returns reports keyed by method."""
    prep = prepare(events, graph, user_sets, config.task, config.train_fraction, config.seed, tz, features)
    prov = {"run_config_hash": config.config_hash(), "seed": config.seed, "data": provenance or {}}
    model = None
    if {"ml", "ml+rdif"} & set(config.methods):
        model, _ = fit_classifier(prep, config.classifier_config(), config.grid, config.seed)
    diffusion = Diffusion(graph) if {"rdif", "ml+rdif"} & set(config.methods) else None
    reports = {}
    for method in config.methods:
        scores, _ = predict_scores(prep, diffusion, method, model, config.lam, config.iters)
        reports[method], _ = collapse_and_evaluate(prep, method, scores, config.qs, prov)
    return reports


def write_report(path_csv, path_json, reports: list[EvalReport]) -> None:
    with open(path_csv, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["task", "method", "q", "population", "assigned", "coverage", "assigned_validation",
                    "correct", "accuracy"])
        for rep in reports:
            for r in rep.rows:
                acc = "undefined" if r.accuracy is None else f"{r.accuracy:.6f}"
                w.writerow([r.task, r.method, r.q, r.population, r.assigned, f"{r.coverage:.6f}",
                            r.assigned_validation, r.correct, acc])
    with open(path_json, "w", encoding="utf-8") as fh:
        json.dump([rep.to_dict() for rep in reports], fh, indent=1, sort_keys=True)
        fh.write("\n")
