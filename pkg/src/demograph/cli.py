"""Command-line driver. Stages exchange artifacts through a work directory.

Layout of ``WORK``::

    ingest.json users.txt events.npz graph.npz labels.npz   (ingest)
    features.npz features.csv                               (features)
    analysis/*.csv                                          (analyze)
    <task>/prep.npz <task>/scaling.json                     (preprocess)
    <task>/model.json <task>/scores_ml.npz                  (train)
    <task>/state_<m>.npz <task>/scores_<m>.npz              (propagate)
    <task>/assign_<m>.npz <task>/assign_<m>_q<q>.csv        (pps)
    <task>/report_<m>.csv <task>/report_<m>.json            (evaluate)

Every stage also writes ``<name>.stamp.json`` with the config hash, seed and
the sha256 of each file it produced.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import classifiers as clf
from . import observational as obs
from .cdr_model import (
    EventTable,
    Interner,
    ObservationWindow,
    RecordKind,
    SocialGraph,
    UserSets,
    build_social_graph,
    load_ground_truth,
    load_operator_clients,
    read_record_csv,
)
from .errors import DataError, DemographError, MissingArtifactError
from .features import FEATURE_NAMES, extract_features, write_feature_csv
from .pipeline import (
    DEFAULT_QS,
    METHODS,
    N_CATEGORIES,
    TASKS,
    Prepared,
    RunConfig,
    assign_all,
    build_report,
    fit_classifier,
    predict_scores,
    predicted_distribution,
    prepare,
    write_report,
)
from .pps import Assignment, write_assignment_csv
from .preprocessing import summarize_column
from .propagation import write_residual_log
from .synth import SynthConfig, write_synth

log = logging.getLogger("demograph")


class UsageError(DemographError):
    exit_code = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# settings


@dataclass
class Settings:
    task: str = "age"
    methods: tuple = METHODS
    qs: tuple = DEFAULT_QS
    lam: float = 0.5
    iters: int = 30
    seed: int = 0
    train_fraction: float = 0.7
    grid: bool = False
    algorithm: str | None = None
    C: float | None = None
    k: int | None = None
    tz: str | None = None
    synth: dict = field(default_factory=dict)

    def run_config(self) -> RunConfig:
        base = clf.GENDER_LOGREG if self.task == "gender" else clf.AGE_MNLOGIT
        over = {k: v for k, v in (("algorithm", self.algorithm), ("C", self.C), ("k", self.k)) if v is not None}
        if over.get("algorithm") == "linear_svm_l1loss" and "C" not in over:
            over["C"] = clf.GENDER_SVM.C
        try:
            classifier = replace(base, seed=self.seed, **over)
            return RunConfig(self.task, tuple(self.methods), tuple(self.qs), self.lam, self.iters, self.seed,
                             self.train_fraction, classifier, self.grid)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc


def parse_q(text: str) -> float:
    try:
        q = float(Fraction(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"bad q {text!r}") from exc
    if not 0 < q <= 1:
        raise argparse.ArgumentTypeError("q must be in (0, 1]")
    return q


_CONFIG_KEYS = {"task", "method", "methods", "q", "qs", "lambda", "iters", "seed", "train_fraction",
                "grid", "algorithm", "C", "k", "tz", "synth"}


def load_settings(args) -> Settings:
    s = Settings()
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"config is not valid JSON: {exc}") from exc
        unknown = set(cfg) - _CONFIG_KEYS
        if unknown:
            raise UsageError(f"unknown config keys {sorted(unknown)}")
        for key, value in cfg.items():
            if key in ("method", "methods"):
                s.methods = (value,) if isinstance(value, str) else tuple(value)
            elif key in ("q", "qs"):
                s.qs = tuple(parse_q(str(v)) for v in (value if isinstance(value, list) else [value]))
            elif key == "lambda":
                s.lam = float(value)
            else:
                setattr(s, key, value)
    for attr, dest in (("task", "task"), ("lam", "lam"), ("iters", "iters"), ("seed", "seed"),
                       ("grid", "grid"), ("algorithm", "algorithm"), ("C", "C"), ("k", "k"), ("tz", "tz")):
        value = getattr(args, attr, None)
        if value is not None and value is not False:
            setattr(s, dest, value)
    if getattr(args, "method", None):
        s.methods = tuple(args.method)
    if getattr(args, "q", None):
        s.qs = tuple(args.q)
    if s.task not in TASKS:
        raise UsageError(f"unknown task {s.task!r}")
    if not 0 <= s.lam <= 1:
        raise UsageError("--lambda must be in [0, 1]")
    if s.iters < 0:
        raise UsageError("--iters must be non-negative")
    return s


# ---------------------------------------------------------------------------
# work directory


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _method_token(method: str) -> str:
    return method.replace("+", "_")


def _q_token(q: float) -> str:
    return str(Fraction(q).limit_denominator(1 << 20)).replace("/", "-")


class Workspace:
    def __init__(self, root):
        self.root = Path(root)

    def path(self, *parts) -> Path:
        return self.root.joinpath(*parts)

    def need(self, stage: str, *parts) -> Path:
        p = self.path(*parts)
        if not p.exists():
            raise MissingArtifactError(p, stage)
        return p

    def ingest_info(self) -> dict:
        return json.loads(self.need("ingest", "ingest.json").read_text())

    def stamp(self, name: str, settings: Settings | None, outputs: list[Path], extra: dict | None = None) -> None:
        info = self.ingest_info() if self.path("ingest.json").exists() else {}
        body = {
            "stage": name,
            "data_hash": info.get("data_hash"),
            "seed": settings.seed if settings else info.get("seed"),
            "config_hash": settings.run_config().config_hash() if settings else None,
            "outputs": {str(p.relative_to(self.root)): _sha256(p) for p in outputs},
            **(extra or {}),
        }
        self.path(f"{name}.stamp.json").write_text(json.dumps(body, indent=1, sort_keys=True) + "\n")

    def task_dir(self, task: str) -> Path:
        d = self.path(task)
        d.mkdir(parents=True, exist_ok=True)
        return d

    def load_events(self) -> EventTable:
        return EventTable.from_npz(self.need("ingest", "events.npz"))

    def load_graph(self) -> SocialGraph:
        return SocialGraph.from_npz(self.need("ingest", "graph.npz"))

    def load_user_ids(self) -> list[str]:
        return self.need("ingest", "users.txt").read_text().splitlines()

    def load_prepared(self, task: str) -> Prepared:
        return Prepared.load(self.need("preprocess", task, "prep.npz"), self.need("preprocess", task, "scaling.json"))

    def load_labels(self) -> dict:
        with np.load(self.need("ingest", "labels.npz")) as z:
            return {k: z[k] for k in z.files}


# ---------------------------------------------------------------------------
# stages


def stage_synth(config: SynthConfig, out_dir: Path) -> Path:
    write_synth(config, out_dir)
    return out_dir.resolve()


def stage_ingest(ws: Workspace, data_dir: Path, tz: str | None = None, window: tuple | None = None) -> dict:
    data_dir = Path(data_dir)
    manifest_path = data_dir / "synth_manifest.json"
    manifest = json.loads(manifest_path.read_text()) if manifest_path.exists() else {}
    tz = tz or manifest.get("tz", "UTC")
    if window is None and "window_start" in manifest:
        window = (manifest["window_start"], manifest["window_end"])
    obs_window = ObservationWindow.from_strings(*window, tz=tz) if window else None

    inputs = [data_dir / n for n in ("calls.csv", "sms.csv", "clients.txt", "ground_truth.csv")]
    for p in inputs:
        if not p.exists():
            raise DataError(f"input file {p} not found")
    user_sets = UserSets(interner=Interner())
    load_operator_clients(inputs[2], user_sets)
    calls, call_stats = read_record_csv(inputs[0], RecordKind.CALL, user_sets.interner, tz, obs_window)
    sms, sms_stats = read_record_csv(inputs[1], RecordKind.SMS, user_sets.interner, tz, obs_window)
    gt_stats = load_ground_truth(inputs[3], user_sets)
    user_sets.check_invariants()
    events = EventTable.concat([calls, sms])
    n = len(user_sets.interner)
    graph = build_social_graph(events, n_nodes=n)

    ws.root.mkdir(parents=True, exist_ok=True)
    ws.path("users.txt").write_text("\n".join(user_sets.interner.ids) + "\n")
    events.to_npz(ws.path("events.npz"))
    graph.to_npz(ws.path("graph.npz"))
    nodes, gender, age = user_sets.label_arrays()
    np.savez(ws.path("labels.npz"), clients=user_sets.client_indices(), nodes=nodes, gender=gender, age=age)
    data_hash = manifest.get("config_hash") or hashlib.sha256(
        "".join(_sha256(p) for p in inputs).encode()).hexdigest()[:16]
    info = {
        "data_dir": str(data_dir.resolve()),
        "data_hash": data_hash,
        "seed": manifest.get("seed"),
        "tz": tz,
        "window": list(window) if window else None,
        "n_users": n,
        "n_clients": len(user_sets.operator_clients),
        "n_labels": len(nodes),
        "n_events": len(events),
        "n_edges": int(graph.n_edges),
        "calls": {"accepted": call_stats.accepted, "rejected": dict(sorted(call_stats.rejected.items()))},
        "sms": {"accepted": sms_stats.accepted, "rejected": dict(sorted(sms_stats.rejected.items()))},
        "ground_truth": gt_stats.as_dict(),
    }
    ws.path("ingest.json").write_text(json.dumps(info, indent=1, sort_keys=True) + "\n")
    ws.stamp("ingest", None, [ws.path(n) for n in ("users.txt", "events.npz", "graph.npz", "labels.npz",
                                                    "ingest.json")])
    return info


def user_sets_from_work(ws: Workspace) -> UserSets:
    from .cdr_model import DemographicLabel, Gender

    us = UserSets(interner=Interner(ws.load_user_ids()))
    labels = ws.load_labels()
    us.operator_clients = set(labels["clients"].tolist())
    for i, g, a in zip(labels["nodes"].tolist(), labels["gender"].tolist(), labels["age"].tolist()):
        us.ground_truth[i] = DemographicLabel(Gender(g), a)
    return us


def stage_features(ws: Workspace, csv_out: bool = True) -> np.ndarray:
    info = ws.ingest_info()
    events, graph = ws.load_events(), ws.load_graph()
    clients = ws.load_labels()["clients"]
    matrix = extract_features(events, graph, clients, info["tz"])
    np.savez(ws.path("features.npz"), clients=clients, features=matrix)
    outputs = [ws.path("features.npz")]
    if csv_out:
        ids = np.asarray(ws.load_user_ids(), dtype=object)[clients]
        write_feature_csv(ws.path("features.csv"), matrix, ids)
        outputs.append(ws.path("features.csv"))
    ws.stamp("features", None, outputs)
    return matrix


def _load_features(ws: Workspace) -> np.ndarray:
    with np.load(ws.need("features", "features.npz")) as z:
        return z["features"]


def stage_preprocess(ws: Workspace, s: Settings) -> Prepared:
    info = ws.ingest_info()
    prep = prepare(None, None, user_sets_from_work(ws), s.task, s.train_fraction, s.seed, info["tz"],
                   features=_load_features(ws))
    d = ws.task_dir(s.task)
    prep.save(d / "prep.npz", d / "scaling.json")
    summary = d / "feature_summary.csv"
    with open(summary, "w", encoding="utf-8") as fh:
        fh.write("feature,mean,std,min,q1,median,q3,max\n")
        for j, name in enumerate(FEATURE_NAMES):
            c = summarize_column(prep.features[:, j]).as_dict()
            fh.write(",".join([name] + [f"{c[k]:.6g}" for k in ("mean", "std", "min", "q1", "median", "q3", "max")])
                     + "\n")
    ws.stamp(f"{s.task}/preprocess", s, [d / "prep.npz", d / "scaling.json", summary])
    return prep


def stage_analyze(ws: Workspace) -> Path:
    out = ws.path("analysis")
    out.mkdir(exist_ok=True)
    features = _load_features(ws)
    labels = ws.load_labels()
    clients = labels["clients"]
    graph = ws.load_graph()
    n = graph.n_nodes
    matrix = prepare(None, None, user_sets_from_work(ws), "gender", features=features).matrix

    obs.write_pca_csv(out / "pca_components.csv", obs.pca(matrix.values), matrix.columns)
    rows = np.searchsorted(clients, labels["nodes"])
    means = obs.gender_group_means(features[rows], labels["gender"], FEATURE_NAMES)
    with open(out / "gender_means.csv", "w", encoding="utf-8") as fh:
        fh.write("feature,mean_male,mean_female,welch_p_value\n")
        for r in means:
            fh.write(f"{r.variable},{r.mean_male:.6g},{r.mean_female:.6g},{r.p_value:.6g}\n")

    genders = np.full(n, -1, dtype=np.int64)
    genders[labels["nodes"]] = labels["gender"]
    mix = obs.gender_mix(ws.load_events(), genders)
    with open(out / "gender_mix.csv", "w", encoding="utf-8") as fh:
        fh.write("caller,recipient,count,probability\n")
        for caller in (0, 1):
            for recipient in (0, 1):
                fh.write(f"{caller},{recipient},{int(mix.counts[caller, recipient])},"
                         f"{mix.prob(recipient, caller):.6g}\n")

    groups = np.searchsorted([10, 25, 35, 50], labels["age"], side="right") - 1
    logs = matrix.values[rows][:, len(FEATURE_NAMES):]
    with open(out / "tukey.csv", "w", encoding="utf-8") as fh:
        fh.write("variable,group1,group2,meandiff,lower,upper,reject\n")
        for j, name in enumerate(FEATURE_NAMES):
            if len(np.unique(groups)) < 2:
                break
            for r in obs.tukey_hsd([logs[groups == g, j] for g in np.unique(groups)]):
                fh.write(f"log_{name},{r.group1},{r.group2},{r.meandiff:.6g},{r.lower:.6g},{r.upper:.6g},"
                         f"{r.reject}\n")

    ages = np.full(n, -1, dtype=np.int64)
    ages[labels["nodes"]] = labels["age"]
    obs.write_age_link_csv(out / "age_link_matrix.csv", obs.age_link_matrix(graph, ages, 10, int(max(100, ages.max()))))
    obs.write_age_diff_csv(out / "age_diff_hist.csv", obs.age_diff_histogram(graph, ages))
    ws.stamp("analyze", None, sorted(out.glob("*.csv")))
    return out


def stage_train(ws: Workspace, s: Settings) -> clf.LinearModel:
    prep = ws.load_prepared(s.task)
    rc = s.run_config()
    model, grid = fit_classifier(prep, rc.classifier_config(), rc.grid, rc.seed)
    d = ws.task_dir(s.task)
    model.save(d / "model.json")
    scores, _ = predict_scores(prep, None, "ml", model)
    np.savez(d / "scores_ml.npz", scores=scores)
    outputs = [d / "model.json", d / "scores_ml.npz"]
    if grid is not None:
        grid.write_csv(d / "grid.csv")
        outputs.append(d / "grid.csv")
    ws.stamp(f"{s.task}/train", s, outputs)
    return model


def stage_propagate(ws: Workspace, s: Settings, method: str) -> None:
    if method == "ml":
        ws.need("train", s.task, "scores_ml.npz")
        return
    prep = ws.load_prepared(s.task)
    model = clf.LinearModel.load(ws.need("train", s.task, "model.json")) if method == "ml+rdif" else None
    scores, state = predict_scores(prep, ws.load_graph(), method, model, s.lam, s.iters)
    d = ws.task_dir(s.task)
    tok = _method_token(method)
    state.save(d / f"state_{tok}.npz")
    write_residual_log(d / f"residuals_{tok}.csv", state)
    np.savez(d / f"scores_{tok}.npz", scores=scores)
    ws.stamp(f"{s.task}/propagate_{tok}", s,
             [d / f"state_{tok}.npz", d / f"residuals_{tok}.csv", d / f"scores_{tok}.npz"])


def _load_scores(ws: Workspace, task: str, method: str) -> np.ndarray:
    stage = "train" if method == "ml" else "propagate"
    with np.load(ws.need(stage, task, f"scores_{_method_token(method)}.npz")) as z:
        return z["scores"]


def stage_pps(ws: Workspace, s: Settings, method: str) -> dict:
    prep = ws.load_prepared(s.task)
    scores = _load_scores(ws, s.task, method)
    assignments = assign_all(prep, scores, s.qs)
    d = ws.task_dir(s.task)
    tok = _method_token(method)
    ids = np.asarray(ws.load_user_ids(), dtype=object)[prep.population]
    outputs = []
    for q, a in assignments.items():
        p = d / f"assign_{tok}_q{_q_token(q)}.csv"
        write_assignment_csv(p, a, ids)
        outputs.append(p)
    np.savez(d / f"assign_{tok}.npz", qs=np.array(list(assignments)),
             category=np.stack([a.category for a in assignments.values()]),
             probability=np.stack([a.probability for a in assignments.values()]),
             rank=np.stack([a.rank for a in assignments.values()]),
             distribution=np.array(predicted_distribution(scores, prep.n_categories)))
    outputs.append(d / f"assign_{tok}.npz")
    ws.stamp(f"{s.task}/pps_{tok}", s, outputs)
    return assignments


def stage_evaluate(ws: Workspace, s: Settings, methods) -> list:
    prep = ws.load_prepared(s.task)
    info = ws.ingest_info()
    rc = s.run_config()
    d = ws.task_dir(s.task)
    reports = []
    for method in methods:
        tok = _method_token(method)
        with np.load(ws.need("pps", s.task, f"assign_{tok}.npz")) as z:
            assignments = {float(q): Assignment(z["category"][i], z["probability"][i], z["rank"][i])
                           for i, q in enumerate(z["qs"])}
            dist = z["distribution"].tolist()
        prov = {"run_config_hash": rc.config_hash(), "seed": rc.seed, "data_hash": info["data_hash"],
                "lambda": s.lam, "iters": s.iters}
        reports.append(build_report(prep, method, assignments, dist, prov))
    name = "report_" + "-".join(_method_token(m) for m in methods)
    write_report(d / f"{name}.csv", d / f"{name}.json", reports)
    ws.stamp(f"{s.task}/evaluate_{name}", s, [d / f"{name}.csv", d / f"{name}.json"])
    return reports


def stage_run(ws: Workspace, data_dir: Path, s: Settings, with_analysis: bool = False) -> Path:
    stage_ingest(ws, data_dir, s.tz)
    stage_features(ws)
    if with_analysis:
        stage_analyze(ws)
    stage_preprocess(ws, s)
    if {"ml", "ml+rdif"} & set(s.methods):
        stage_train(ws, s)
    for m in s.methods:
        stage_propagate(ws, s, m)
        stage_pps(ws, s, m)
    stage_evaluate(ws, s, s.methods)
    name = "report_" + "-".join(_method_token(m) for m in s.methods)
    return ws.path(s.task, f"{name}.csv")


# ---------------------------------------------------------------------------
# argument parsing


def _common(p: argparse.ArgumentParser, work: bool = True) -> None:
    p.add_argument("--config", help="JSON file with run settings; flags override it")
    p.add_argument("--seed", type=int)
    if work:
        p.add_argument("--work", required=True, help="work directory holding stage artifacts")


def _task(p, methods=True, q=False, propagation=False):
    p.add_argument("--task", choices=TASKS)
    if methods:
        p.add_argument("--method", choices=METHODS, action="append",
                       help="repeat to select several methods (default: all)")
    if q:
        p.add_argument("--q", type=parse_q, action="append", help="coverage, e.g. 0.25 or 1/8; repeatable")
    if propagation:
        p.add_argument("--lambda", dest="lam", type=float)
        p.add_argument("--iters", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="demograph", description="Demographic inference from call-detail records.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic dataset; prints its directory")
    _common(p, work=False)
    p.add_argument("--out", help="output directory (default: ./synth-<seed>-<hash>)")
    p.add_argument("--n-users", type=int)
    p.add_argument("--months", type=int)
    p.add_argument("--homophily", type=float, help="age homophily scale in years")

    p = sub.add_parser("ingest", help="parse CSV inputs into the work directory")
    _common(p)
    p.add_argument("data", help="directory with calls.csv, sms.csv, clients.txt, ground_truth.csv")
    p.add_argument("--tz")
    p.add_argument("--window", nargs=2, metavar=("START", "END"))

    p = sub.add_parser("features", help="per-client characterization variables")
    _common(p)
    p.add_argument("--no-csv", action="store_true")

    p = sub.add_parser("analyze", help="observational statistics as plot-ready CSVs")
    _common(p)

    p = sub.add_parser("preprocess", help="split labels and build the model matrix")
    _common(p)
    _task(p, methods=False)

    p = sub.add_parser("train", help="fit the classifier on the training split")
    _common(p)
    _task(p, methods=False)
    p.add_argument("--algorithm", choices=clf.ALGORITHMS)
    p.add_argument("-C", dest="C", type=float)
    p.add_argument("-k", dest="k", type=int)
    p.add_argument("--grid", action="store_true", help="grid search C and k on an inner split")

    p = sub.add_parser("propagate", help="reaction-diffusion over the graph")
    _common(p)
    _task(p, propagation=True)

    p = sub.add_parser("pps", help="quota-constrained label assignment")
    _common(p)
    _task(p, q=True)

    p = sub.add_parser("evaluate", help="accuracy report on the validation split")
    _common(p)
    _task(p)

    p = sub.add_parser("run", help="all stages from a data directory (read from stdin if omitted)")
    _common(p, work=False)
    p.add_argument("data", nargs="?")
    p.add_argument("--work", help="default: <data>/work")
    _task(p, q=True, propagation=True)
    p.add_argument("--algorithm", choices=clf.ALGORITHMS)
    p.add_argument("-C", dest="C", type=float)
    p.add_argument("-k", dest="k", type=int)
    p.add_argument("--grid", action="store_true")
    p.add_argument("--tz")
    p.add_argument("--analyze", action="store_true", help="also run the analyze stage")
    return parser


def _synth_config(args, s: Settings) -> SynthConfig:
    d = dict(s.synth)
    if args.seed is not None or "seed" not in d:
        d["seed"] = s.seed
    for attr, key in (("n_users", "n_users"), ("months", "months"), ("homophily", "age_homophily_scale")):
        value = getattr(args, attr)
        if value is not None:
            d[key] = value
    try:
        return SynthConfig.from_dict(d)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad synth settings: {exc}") from exc


def dispatch(args) -> int:
    s = load_settings(args)
    cmd = args.command
    if cmd == "synth":
        cfg = _synth_config(args, s)
        out = Path(args.out) if args.out else Path(f"synth-{cfg.seed}-{cfg.config_hash()[:8]}")
        print(stage_synth(cfg, out))
        return 0
    if cmd == "run":
        data = args.data
        if data is None:
            data = sys.stdin.readline().strip()
            if not data:
                raise UsageError("no data directory given on the command line or stdin")
        data = Path(data)
        ws = Workspace(args.work or data / "work")
        report = stage_run(ws, data, s, args.analyze)
        sys.stdout.write(report.read_text())
        return 0

    ws = Workspace(args.work)
    methods = s.methods
    if cmd == "ingest":
        window = tuple(args.window) if args.window else None
        info = stage_ingest(ws, Path(args.data), s.tz, window)
        print(json.dumps({k: info[k] for k in ("n_users", "n_clients", "n_labels", "n_events")}))
    elif cmd == "features":
        stage_features(ws, csv_out=not args.no_csv)
    elif cmd == "analyze":
        print(stage_analyze(ws))
    elif cmd == "preprocess":
        stage_preprocess(ws, s)
    elif cmd == "train":
        stage_train(ws, s)
    elif cmd == "propagate":
        for m in methods:
            stage_propagate(ws, s, m)
    elif cmd == "pps":
        for m in methods:
            stage_pps(ws, s, m)
    elif cmd == "evaluate":
        stage_evaluate(ws, s, methods)
        name = "report_" + "-".join(_method_token(m) for m in methods)
        sys.stdout.write(ws.path(s.task, f"{name}.csv").read_text())
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return dispatch(args)
    except DemographError as exc:
        print(f"demograph: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FileNotFoundError, PermissionError) as exc:
        print(f"demograph: error: {exc}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
