"""Synthetic population, contact graph and CDR/SMS stream with planted homophily.

Random streams: the seed feeds a :class:`numpy.random.SeedSequence` spawned
into independent child streams for the population, the edges and the
events, so each stage is reproducible on its own. All sampling is done with
integer or float64 vectorized draws from ``PCG64``, which are identical
across platforms.

Edges: an initiator is drawn with probability proportional to its
sociability, a partner age ``a'`` with probability proportional to
``count(a') * k(|a - a'|)`` and a partner gender that equals the initiator's with probability
``gender_mix_bias`` and otherwise follows the population shares. Pairs with
no operator client on either side are never observed and are dropped.

The affinity ``k`` is a law on the age gap ``d``: ``exp(-d / sigma)`` (plus
``bump * exp(-|d - offset| / sigma)`` when enabled), split evenly between the
older and the younger side, so ``k(d)`` is halved for ``d >= 1``. In a flat
pyramid the gap histogram then decays from its mode at ``d = 0``. An
infinite ``sigma`` means no age preference (uniform random mixing).

Events: for every edge and direction ``u -> v`` the number of calls and
SMS are Poisson with rates scaled by the initiator's (gender, age group)
profile; call durations are exponential with a mean scaled by both parties.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .cdr_model import (
    AGE_GROUP_EDGES,
    DemographicLabel,
    EventTable,
    Gender,
    Interner,
    RecordKind,
    SocialGraph,
    UserSets,
    age_groups,
    build_social_graph,
)

# default age-group and gender shares of the synthetic population
DEFAULT_GROUP_SHARES = (0.121, 0.3545, 0.3745, 0.15)
DEFAULT_GENDER_SHARES = (0.5683, 0.4317)
OLDEST_AGE = 80


def _default_profiles() -> dict:
    # multipliers indexed [gender][age_group]; gender 0 = male, 1 = female
    return {
        "sociability": [[1.3, 1.1, 1.0, 0.7], [1.3, 1.1, 1.0, 0.7]],
        "calls": [[0.8, 1.1, 1.15, 1.0], [0.7, 1.0, 1.05, 0.95]],
        "sms": [[2.2, 1.2, 0.7, 0.35], [2.5, 1.4, 0.8, 0.4]],
        "night_share": [[0.45, 0.35, 0.3, 0.25], [0.42, 0.32, 0.28, 0.22]],
        "duration_out": [[0.75, 1.0, 1.1, 1.25], [0.6, 0.85, 0.95, 1.1]],
        "duration_in": [[0.7, 0.9, 1.0, 1.2], [0.8, 1.0, 1.1, 1.35]],
    }


@dataclass
class SynthConfig:
    seed: int = 0
    n_users: int = 10_000
    client_fraction: float = 0.8
    label_fraction: float = 0.3
    gender_shares: tuple = DEFAULT_GENDER_SHARES
    group_shares: tuple = DEFAULT_GROUP_SHARES
    # optional explicit distribution over integer ages (index 0 = age 10)
    age_pyramid: list | None = None
    mean_degree: float = 10.0
    age_homophily_scale: float = 5.0
    gender_mix_bias: float = 0.15
    generation_bump_weight: float = 0.0
    generation_bump_offset: int = 21
    call_rate: float = 0.6
    sms_rate: float = 0.4
    mean_call_seconds: float = 120.0
    profiles: dict = field(default_factory=_default_profiles)
    start: str = "2021-03-01"
    months: int = 3
    tz: str = "UTC"

    def __post_init__(self):
        for name in ("gender_shares", "group_shares"):
            v = np.asarray(getattr(self, name), dtype=float)
            if np.any(v < 0) or abs(v.sum() - 1) > 1e-9:
                raise ValueError(f"{name} must be non-negative and sum to 1")
        if self.age_pyramid is not None:
            v = np.asarray(self.age_pyramid, dtype=float)
            if np.any(v < 0) or abs(v.sum() - 1) > 1e-9:
                raise ValueError("age_pyramid must be non-negative and sum to 1")
        if not 0 < self.label_fraction <= 1 or not 0 < self.client_fraction <= 1:
            raise ValueError("fractions must be in (0, 1]")
        if min(self.mean_degree, self.call_rate, self.sms_rate, self.mean_call_seconds) < 0:
            raise ValueError("rates must be non-negative")
        if not 0 <= self.gender_mix_bias <= 1:
            raise ValueError("gender_mix_bias must be in [0, 1]")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["gender_shares"] = list(self.gender_shares)
        d["group_shares"] = list(self.group_shares)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown synth config keys: {sorted(unknown)}")
        d = dict(d)
        for key in ("gender_shares", "group_shares"):
            if key in d:
                d[key] = tuple(d[key])
        if "profiles" in d:
            d["profiles"] = {**_default_profiles(), **d["profiles"]}
        return cls(**d)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def streams(self) -> list[np.random.Generator]:
        return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(self.seed).spawn(4)]

    @property
    def window_seconds(self) -> tuple[int, int]:
        start = pd.Timestamp(self.start)
        end = start + pd.DateOffset(months=self.months)
        return int(start.value // 10**9), int(end.value // 10**9)


@dataclass
class Population:
    gender: np.ndarray
    age: np.ndarray
    is_client: np.ndarray
    is_labeled: np.ndarray

    def __len__(self) -> int:
        return len(self.age)

    @property
    def group(self) -> np.ndarray:
        return age_groups(self.age)


def age_distribution(config: SynthConfig) -> tuple[np.ndarray, np.ndarray]:
    """Integer ages and their probabilities."""
    if config.age_pyramid is not None:
        p = np.asarray(config.age_pyramid, dtype=float)
        return np.arange(AGE_GROUP_EDGES[0], AGE_GROUP_EDGES[0] + len(p)), p
    ages = np.arange(AGE_GROUP_EDGES[0], OLDEST_AGE + 1)
    groups = age_groups(ages)
    sizes = np.bincount(groups, minlength=4)
    p = np.asarray(config.group_shares)[groups] / sizes[groups]
    return ages, p / p.sum()


def generate_population(config: SynthConfig) -> Population:
    rng = config.streams()[0]
    n = config.n_users
    gender = (rng.random(n) < config.gender_shares[1]).astype(np.int64)
    ages, p = age_distribution(config)
    age = ages[np.minimum(np.searchsorted(np.cumsum(p), rng.random(n), side="right"), len(ages) - 1)]
    is_client = rng.random(n) < config.client_fraction
    is_labeled = is_client & (rng.random(n) < config.label_fraction)
    return Population(gender, age.astype(np.int64), is_client, is_labeled)


def _age_kernel(config: SynthConfig, ages: np.ndarray) -> np.ndarray:
    delta = np.abs(np.subtract.outer(ages, ages)).astype(float)
    sigma = config.age_homophily_scale
    if sigma is None or not math.isfinite(sigma):
        return np.ones_like(delta)
    k = np.exp(-delta / sigma)
    if config.generation_bump_weight:
        k += config.generation_bump_weight * np.exp(-np.abs(delta - config.generation_bump_offset) / sigma)
    # a gap d >= 1 is reachable on two sides
    return np.where(delta == 0, k, 0.5 * k)


def generate_edges(pop: Population, config: SynthConfig) -> np.ndarray:
    """Undirected edge list ``(m, 2)`` with ``u < v``, deduplicated."""
    rng = config.streams()[1]
    n = len(pop)
    m = int(round(n * config.mean_degree / 2))
    if m == 0 or n < 2:
        return np.zeros((0, 2), dtype=np.int64)
    soc = np.asarray(config.profiles["sociability"], dtype=float)[pop.gender, pop.group]
    cum = np.cumsum(soc)
    u = np.searchsorted(cum, rng.random(m) * cum[-1], side="right")
    u = np.minimum(u, n - 1)

    min_age = int(pop.age.min())
    ages = np.arange(min_age, int(pop.age.max()) + 1)
    cell = (pop.age - min_age) * 2 + pop.gender
    order = np.argsort(cell, kind="stable")
    cell_start = np.searchsorted(cell[order], np.arange(len(ages) * 2))
    cell_size = np.bincount(cell, minlength=len(ages) * 2)
    age_count = cell_size.reshape(-1, 2).sum(axis=1)

    weights = _age_kernel(config, ages) * age_count[None, :]
    cdf = np.cumsum(weights, axis=1)
    cdf /= cdf[:, -1:]
    row = pop.age[u] - min_age
    partner_age = np.empty(m, dtype=np.int64)
    draw = rng.random(m)
    for a in np.unique(row):
        sel = row == a
        partner_age[sel] = np.minimum(np.searchsorted(cdf[a], draw[sel], side="right"), len(ages) - 1)

    same = rng.random(m) < config.gender_mix_bias
    other = (rng.random(m) < config.gender_shares[1]).astype(np.int64)
    partner_gender = np.where(same, pop.gender[u], other)
    c = partner_age * 2 + partner_gender
    empty = cell_size[c] == 0
    c = np.where(empty, partner_age * 2 + (1 - partner_gender), c)
    pick = np.floor(rng.random(m) * cell_size[c]).astype(np.int64)
    v = order[cell_start[c] + pick]

    keep = (u != v) & (pop.is_client[u] | pop.is_client[v])
    lo, hi = np.minimum(u, v)[keep], np.maximum(u, v)[keep]
    key = np.unique(lo * n + hi)
    return np.stack([key // n, key % n], axis=1)


def generate_cdr_events(pop: Population, edges: np.ndarray, config: SynthConfig) -> EventTable:
    """Event table over local-time epoch seconds (see :func:`local_to_epoch`)."""
    rng = config.streams()[2]
    prof = {k: np.asarray(v, dtype=float) for k, v in config.profiles.items()}
    src = np.concatenate([edges[:, 0], edges[:, 1]])
    dst = np.concatenate([edges[:, 1], edges[:, 0]])
    g_src, a_src = pop.gender[src], pop.group[src]
    n_calls = rng.poisson(config.call_rate * prof["calls"][g_src, a_src])
    n_sms = rng.poisson(config.sms_rate * prof["sms"][g_src, a_src])

    ev_src = np.concatenate([np.repeat(src, n_calls), np.repeat(src, n_sms)])
    ev_dst = np.concatenate([np.repeat(dst, n_calls), np.repeat(dst, n_sms)])
    kind = np.concatenate([np.full(n_calls.sum(), RecordKind.CALL, np.int8),
                           np.full(n_sms.sum(), RecordKind.SMS, np.int8)])
    n_ev = len(ev_src)

    start, end = config.window_seconds
    n_days = (end - start) // 86400
    day = rng.integers(0, n_days, size=n_ev)
    night = rng.random(n_ev) < prof["night_share"][pop.gender[ev_src], pop.group[ev_src]]
    # night hours are [19, 31) mod 24, daylight [7, 19)
    sec = rng.integers(0, 12 * 3600, size=n_ev)
    tod = np.where(night, (19 * 3600 + sec) % 86400, 7 * 3600 + sec)
    ts = start + day * 86400 + tod

    is_call = kind == RecordKind.CALL
    mean = (config.mean_call_seconds
            * prof["duration_out"][pop.gender[ev_src], pop.group[ev_src]]
            * prof["duration_in"][pop.gender[ev_dst], pop.group[ev_dst]])
    duration = np.where(is_call, np.floor(rng.exponential(1.0, size=n_ev) * mean), 0).astype(np.int64)
    direction = pop.is_client[ev_src].astype(np.int8)
    return EventTable(ev_src, ev_dst, ts, duration, direction, kind)


def local_to_epoch(local_ts: np.ndarray, tz: str) -> np.ndarray:
    if tz == "UTC" or len(local_ts) == 0:
        return np.asarray(local_ts, dtype=np.int64)
    idx = pd.DatetimeIndex(pd.to_datetime(local_ts, unit="s")).tz_localize(
        tz, ambiguous=np.ones(len(local_ts), dtype=bool), nonexistent="shift_forward")
    return idx.as_unit("s").asi8


WRITE_CHUNK = 1_000_000


@dataclass
class Dataset:
    """Everything the pipeline needs, already interned."""

    user_sets: UserSets
    events: EventTable
    graph: SocialGraph
    tz: str = "UTC"
    window: tuple | None = None
    provenance: dict = field(default_factory=dict)

    @property
    def interner(self) -> Interner:
        return self.user_sets.interner


def user_id(i: int) -> str:
    return f"U{i:07d}"


def generate(config: SynthConfig) -> tuple[Population, np.ndarray, EventTable]:
    pop = generate_population(config)
    edges = generate_edges(pop, config)
    events = generate_cdr_events(pop, edges, config)
    return pop, edges, events


def build_dataset(config: SynthConfig) -> Dataset:
    """In-memory dataset equivalent to writing and re-ingesting the CSV files."""
    pop, _, events = generate(config)
    events.ts = local_to_epoch(events.ts, config.tz)
    interner = Interner(user_id(i) for i in range(len(pop)))
    us = UserSets(interner=interner)
    us.operator_clients = set(np.flatnonzero(pop.is_client).tolist())
    for i in np.flatnonzero(pop.is_labeled):
        us.ground_truth[int(i)] = DemographicLabel(Gender(int(pop.gender[i])), int(pop.age[i]))
    graph = build_social_graph(events, n_nodes=len(pop))
    return Dataset(us, events, graph, config.tz, config.window_seconds,
                   {"seed": config.seed, "config_hash": config.config_hash()})


def write_synth(config: SynthConfig, out_dir) -> dict:
    """Write ``calls.csv``, ``sms.csv``, ``clients.txt``, ``ground_truth.csv`` and a manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pop, edges, events = generate(config)
    ids = np.array([user_id(i) for i in range(len(pop))], dtype=object)
    is_call = events.kind == RecordKind.CALL
    with open(out / "calls.csv", "w", newline="") as calls_fh, open(out / "sms.csv", "w", newline="") as sms_fh:
        for lo in range(0, len(events), WRITE_CHUNK):
            part = slice(lo, lo + WRITE_CHUNK)
            src, dst, call = events.src[part], events.dst[part], is_call[part]
            frame = pd.DataFrame({
                "a": ids[src], "b": ids[dst],
                "t": pd.to_datetime(events.ts[part], unit="s").strftime("%Y-%m-%dT%H:%M:%S"),
                "dur": events.duration[part],
                "dir": np.where(events.direction[part] == 1, "OUT", "IN"),
            })
            calls = frame[call]
            calls.insert(5, "tower", "T" + pd.Series(src[call] % 997, index=calls.index).astype(str))
            calls.to_csv(calls_fh, header=False, index=False)
            frame.loc[~call, ["a", "b", "t", "dir"]].to_csv(sms_fh, header=False, index=False)
    (out / "clients.txt").write_text("\n".join(ids[pop.is_client]) + "\n")
    lab = np.flatnonzero(pop.is_labeled)
    pd.DataFrame({"u": ids[lab], "g": np.where(pop.gender[lab] == 1, "F", "M"), "a": pop.age[lab]}) \
        .to_csv(out / "ground_truth.csv", header=False, index=False)
    start, end = config.window_seconds
    manifest = {
        "seed": config.seed,
        "config_hash": config.config_hash(),
        "config": config.to_dict(),
        "n_users": len(pop),
        "n_edges": int(len(edges)),
        "n_events": int(len(events)),
        "window_start": pd.Timestamp(start, unit="s").strftime("%Y-%m-%dT%H:%M:%S"),
        "window_end": pd.Timestamp(end, unit="s").strftime("%Y-%m-%dT%H:%M:%S"),
        "tz": config.tz,
    }
    (out / "synth_manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return manifest
