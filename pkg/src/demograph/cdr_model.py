"""Call/SMS detail records, user sets and the communication graph.

User ids are opaque strings interned to dense ``int64`` indices on ingestion;
everything downstream works on those indices. Events are kept columnar
(:class:`EventTable`) so that aggregation stays vectorized at tens of millions
of rows.

Role convention: the first id of a record is the party that initiated the
event (caller / sender) and the second id received it. The ``direction``
token says from which side the operator logged the event; it is retained
but the in/out feature split is derived from the caller/callee roles.
"""

from __future__ import annotations

import csv
import enum
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Iterator

import numpy as np
import pandas as pd
import pyarrow as pa
import pyarrow.compute as pc
import scipy.sparse as sp

from .errors import DataError

log = logging.getLogger(__name__)

DEFAULT_TZ = "UTC"
AGE_MIN = 10
AGE_MAX = 100
# lower edges of the four age groups; the last group is open-ended
AGE_GROUP_EDGES = (10, 25, 35, 50)
AGE_GROUP_LABELS = ("10-24", "25-34", "35-49", "50+")

_ISO_RE = re.compile(
    r"^\d{4}-\d{2}-\d{2}[T ]\d{2}:\d{2}:\d{2}(\.\d+)?(Z|[+-]\d{2}:?\d{2})?$"
)
_FAST_TS_FORMAT = "%Y-%m-%dT%H:%M:%S"


class Direction(enum.IntEnum):
    IN = 0
    OUT = 1


class Gender(enum.IntEnum):
    MALE = 0
    FEMALE = 1


GENDER_TOKENS = {"M": Gender.MALE, "F": Gender.FEMALE}


class RecordKind(enum.IntEnum):
    CALL = 0
    SMS = 1


class RecordRejected(DataError):
    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        super().__init__(f"{reason}: {detail}" if detail else reason)


@dataclass(frozen=True)
class CdrRecord:
    caller: str
    callee: str
    timestamp: datetime
    duration: int
    direction: Direction
    tower: str | None = None


@dataclass(frozen=True)
class SmsRecord:
    sender: str
    receiver: str
    timestamp: datetime
    direction: Direction


@dataclass(frozen=True)
class ObservationWindow:
    """Half-open ``[start, end)`` interval in epoch seconds."""

    start: int
    end: int

    @classmethod
    def from_strings(cls, start: str, end: str, tz: str = DEFAULT_TZ) -> "ObservationWindow":
        return cls(_to_epoch(_parse_timestamp(start, tz)), _to_epoch(_parse_timestamp(end, tz)))

    def contains(self, ts: int) -> bool:
        return self.start <= ts < self.end

    @property
    def n_days(self) -> int:
        return -(-(self.end - self.start) // 86400)


@dataclass
class ParseStats:
    accepted: int = 0
    rejected: Counter = field(default_factory=Counter)

    @property
    def n_rejected(self) -> int:
        return sum(self.rejected.values())

    def merge(self, other: "ParseStats") -> "ParseStats":
        return ParseStats(self.accepted + other.accepted, self.rejected + other.rejected)

    def as_dict(self) -> dict:
        return {"accepted": self.accepted, "rejected": dict(sorted(self.rejected.items()))}


def _parse_timestamp(text: str, tz: str) -> pd.Timestamp:
    text = text.strip()
    if not _ISO_RE.match(text):
        raise RecordRejected("bad_timestamp", text)
    try:
        ts = pd.Timestamp(text)
    except ValueError as exc:
        raise RecordRejected("bad_timestamp", text) from exc
    if ts.tzinfo is None:
        # ambiguous wall times resolve to the first (DST) occurrence
        ts = ts.tz_localize(tz, ambiguous=True, nonexistent="shift_forward")
    return ts.tz_convert(tz).floor("s")


def _to_epoch(ts: pd.Timestamp) -> int:
    return int(ts.value // 1_000_000_000)


def _parse_direction(token: str) -> Direction:
    token = token.strip().upper()
    if token == "IN":
        return Direction.IN
    if token == "OUT":
        return Direction.OUT
    raise RecordRejected("bad_direction", token)


def parse_cdr_line(
    line: str,
    schema: str | RecordKind = RecordKind.CALL,
    tz: str = DEFAULT_TZ,
    window: ObservationWindow | None = None,
) -> CdrRecord | SmsRecord:
    """Parse one CSV line.

    ``schema`` is ``"cdr"`` (``caller,callee,timestamp,duration,direction,tower``)
    or ``"sms"`` (``sender,receiver,timestamp,direction``). Raises
    :class:`RecordRejected` carrying a short reason code.
    """
    kind = _kind(schema)
    parts = line.rstrip("\r\n").split(",")
    expected = 6 if kind is RecordKind.CALL else 4
    if len(parts) != expected:
        raise RecordRejected("field_count", f"expected {expected}, got {len(parts)}")
    a, b = parts[0].strip(), parts[1].strip()
    if not a or not b:
        raise RecordRejected("empty_id")
    if a == b:
        raise RecordRejected("self_contact", a)
    ts = _parse_timestamp(parts[2], tz)
    if window is not None and not window.contains(_to_epoch(ts)):
        raise RecordRejected("out_of_window", parts[2])
    when = ts.to_pydatetime()
    if kind is RecordKind.SMS:
        return SmsRecord(a, b, when, _parse_direction(parts[3]))
    try:
        duration = int(parts[3])
    except ValueError as exc:
        raise RecordRejected("bad_duration", parts[3]) from exc
    if duration < 0:
        raise RecordRejected("negative_duration", parts[3])
    tower = parts[5].strip() or None
    return CdrRecord(a, b, when, duration, _parse_direction(parts[4]), tower)


def _kind(schema: str | RecordKind) -> RecordKind:
    if isinstance(schema, RecordKind):
        return schema
    key = schema.lower()
    if key in ("cdr", "call", "calls"):
        return RecordKind.CALL
    if key == "sms":
        return RecordKind.SMS
    raise ValueError(f"unknown record schema {schema!r}")


def parse_lines(
    lines: Iterable[str],
    schema: str | RecordKind,
    stats: ParseStats | None = None,
    tz: str = DEFAULT_TZ,
    window: ObservationWindow | None = None,
) -> Iterator[CdrRecord | SmsRecord]:
    """Yield parsed records, counting rejected lines in ``stats`` instead of raising."""
    stats = stats if stats is not None else ParseStats()
    for line in lines:
        if not line.strip():
            continue
        try:
            rec = parse_cdr_line(line, schema, tz=tz, window=window)
        except RecordRejected as exc:
            stats.rejected[exc.reason] += 1
            continue
        stats.accepted += 1
        yield rec


class Interner:
    """Bidirectional map between opaque user ids and dense indices."""

    def __init__(self, ids: Iterable[str] = ()):
        self._index: dict[str, int] = {}
        self.ids: list[str] = []
        for uid in ids:
            self.intern(uid)

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, uid: str) -> bool:
        return uid in self._index

    def intern(self, uid: str) -> int:
        idx = self._index.get(uid)
        if idx is None:
            idx = len(self.ids)
            self._index[uid] = idx
            self.ids.append(uid)
        return idx

    def get(self, uid: str) -> int | None:
        return self._index.get(uid)

    def intern_array(self, values) -> np.ndarray:
        """Vectorized :meth:`intern`; new ids are numbered in order of first appearance."""
        values = np.asarray(values, dtype=object)
        if values.size == 0:
            return np.zeros(0, dtype=np.int64)
        codes, uniques = pd.factorize(values)
        get = self._index.get
        lut = np.fromiter((get(u, -1) for u in uniques), dtype=np.int64, count=len(uniques))
        fresh = np.flatnonzero(lut < 0)
        if fresh.size:
            new_ids = uniques[fresh].tolist()
            start = len(self.ids)
            lut[fresh] = np.arange(start, start + len(new_ids))
            self._index.update(zip(new_ids, range(start, start + len(new_ids))))
            self.ids.extend(new_ids)
        return lut[codes]

    def lookup_array(self, indices) -> np.ndarray:
        ids = np.asarray(self.ids, dtype=object)
        return ids[np.asarray(indices, dtype=np.int64)]


@dataclass
class EventTable:
    """Columnar event log. ``src`` initiated the event, ``dst`` received it."""

    src: np.ndarray
    dst: np.ndarray
    ts: np.ndarray
    duration: np.ndarray
    direction: np.ndarray
    kind: np.ndarray

    def __post_init__(self):
        self.src = np.asarray(self.src, dtype=np.int64)
        self.dst = np.asarray(self.dst, dtype=np.int64)
        self.ts = np.asarray(self.ts, dtype=np.int64)
        self.duration = np.asarray(self.duration, dtype=np.int64)
        self.direction = np.asarray(self.direction, dtype=np.int8)
        self.kind = np.asarray(self.kind, dtype=np.int8)
        n = len(self.src)
        for name in ("dst", "ts", "duration", "direction", "kind"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name} has length {len(getattr(self, name))}, expected {n}")

    def __len__(self) -> int:
        return len(self.src)

    @classmethod
    def empty(cls) -> "EventTable":
        z = np.zeros(0, dtype=np.int64)
        b = np.zeros(0, dtype=np.int8)
        return cls(z, z, z, z, b, b)

    @classmethod
    def concat(cls, tables: Iterable["EventTable"]) -> "EventTable":
        tables = list(tables)
        if not tables:
            return cls.empty()
        cols = {
            name: np.concatenate([getattr(t, name) for t in tables])
            for name in ("src", "dst", "ts", "duration", "direction", "kind")
        }
        return cls(**cols)

    @classmethod
    def from_records(cls, records: Iterable[CdrRecord | SmsRecord], interner: Interner) -> "EventTable":
        rows = []
        for rec in records:
            if isinstance(rec, CdrRecord):
                rows.append((rec.caller, rec.callee, rec.timestamp, rec.duration, rec.direction, RecordKind.CALL))
            else:
                rows.append((rec.sender, rec.receiver, rec.timestamp, 0, rec.direction, RecordKind.SMS))
        if not rows:
            return cls.empty()
        pair_ids = interner.intern_array([uid for r in rows for uid in r[:2]]).reshape(-1, 2)
        return cls(
            src=pair_ids[:, 0],
            dst=pair_ids[:, 1],
            ts=[int(r[2].timestamp()) for r in rows],
            duration=[r[3] for r in rows],
            direction=[int(r[4]) for r in rows],
            kind=[int(r[5]) for r in rows],
        )

    def take(self, mask_or_index) -> "EventTable":
        return EventTable(
            self.src[mask_or_index],
            self.dst[mask_or_index],
            self.ts[mask_or_index],
            self.duration[mask_or_index],
            self.direction[mask_or_index],
            self.kind[mask_or_index],
        )

    def to_npz(self, path) -> None:
        np.savez(path, src=self.src, dst=self.dst, ts=self.ts, duration=self.duration,
                 direction=self.direction, kind=self.kind)

    @classmethod
    def from_npz(cls, path) -> "EventTable":
        with np.load(path) as z:
            return cls(z["src"], z["dst"], z["ts"], z["duration"], z["direction"], z["kind"])


def read_record_csv(
    path,
    schema: str | RecordKind,
    interner: Interner,
    tz: str = DEFAULT_TZ,
    window: ObservationWindow | None = None,
    chunk_lines: int = 1_000_000,
) -> tuple[EventTable, ParseStats]:
    """Vectorized bulk reader for the CDR / SMS CSV layouts.

    Semantics match :func:`parse_cdr_line` applied line by line: malformed
    lines are counted per reason in the returned :class:`ParseStats` and
    dropped, the stream is never aborted.
    """
    kind = _kind(schema)
    stats = ParseStats()
    reader = pd.read_csv(
        path, sep="\x1f", header=None, names=["line"], dtype="string[pyarrow]", quoting=csv.QUOTE_NONE,
        keep_default_na=False, skip_blank_lines=True, engine="c", chunksize=chunk_lines,
    )
    tables = [_parse_chunk(chunk["line"], kind, interner, tz, window, stats) for chunk in reader]
    return (EventTable.concat(tables) if tables else EventTable.empty()), stats


def _split_fields(lines: pd.Series, n_fields: int) -> pd.DataFrame:
    """Split lines that all contain exactly ``n_fields`` comma-separated fields."""
    arr = pa.chunked_array([lines.array._pa_array.combine_chunks()]) if len(lines) else None
    if arr is None:
        return pd.DataFrame({i: pd.Series([], dtype="string[pyarrow]") for i in range(n_fields)})
    values = pc.list_flatten(pc.split_pattern(arr, ",")).combine_chunks()
    stride = np.arange(len(lines)) * n_fields
    return pd.DataFrame(
        {i: pd.Series(pd.arrays.ArrowStringArray(values.take(pa.array(stride + i))), index=lines.index)
         for i in range(n_fields)}
    )


def _parse_chunk(raw: pd.Series, kind: RecordKind, interner: Interner, tz: str,
                 window: ObservationWindow | None, stats: ParseStats) -> EventTable:
    n_fields = 6 if kind is RecordKind.CALL else 4
    raw = raw[raw.str.strip() != ""]
    if raw.empty:
        return EventTable.empty()

    bad = pd.Series(False, index=raw.index)

    def reject(mask: pd.Series, reason: str) -> None:
        mask = mask & ~bad
        n = int(mask.sum())
        if n:
            stats.rejected[reason] += n
            bad.loc[mask] = True

    reject(raw.str.count(",") != n_fields - 1, "field_count")
    parts = _split_fields(raw[~bad], n_fields).reindex(raw.index)
    a = parts[0].fillna("").str.strip()
    b = parts[1].fillna("").str.strip()
    reject((a == "") | (b == ""), "empty_id")
    reject(a == b, "self_contact")

    ts_text = parts[2].fillna("")
    ts_fast = pd.to_datetime(ts_text, format=_FAST_TS_FORMAT, errors="coerce")
    epoch = pd.Series(np.zeros(len(raw), dtype=np.int64), index=raw.index)
    fast_ok = ts_fast.notna() & ~bad
    if fast_ok.any():
        local = pd.DatetimeIndex(ts_fast[fast_ok]).tz_localize(
            tz, ambiguous=np.ones(int(fast_ok.sum()), dtype=bool), nonexistent="shift_forward"
        )
        epoch.loc[fast_ok] = local.as_unit("ns").asi8 // 1_000_000_000
    slow = ~fast_ok & ~bad
    if slow.any():
        slow_bad = pd.Series(False, index=raw.index)
        for idx in raw.index[slow]:
            try:
                epoch.loc[idx] = _to_epoch(_parse_timestamp(ts_text.loc[idx], tz))
            except RecordRejected:
                slow_bad.loc[idx] = True
        reject(slow_bad, "bad_timestamp")
    if window is not None:
        reject((epoch < window.start) | (epoch >= window.end), "out_of_window")

    if kind is RecordKind.CALL:
        dur_text = parts[3].fillna("").str.strip()
        dur = pd.to_numeric(dur_text, errors="coerce")
        integral = dur.notna() & (dur == np.floor(dur.fillna(0))) & dur_text.str.fullmatch(r"[+-]?\d+")
        reject(~integral, "bad_duration")
        reject(dur < 0, "negative_duration")
        dir_text = parts[4]
    else:
        dur = pd.Series(0, index=raw.index)
        dir_text = parts[3]
    dir_text = dir_text.fillna("").str.strip().str.upper()
    reject(~dir_text.isin(["IN", "OUT"]), "bad_direction")

    ok = ~bad
    n_ok = int(ok.sum())
    stats.accepted += n_ok
    ids = np.empty(2 * n_ok, dtype=object)
    ids[0::2] = a[ok].to_numpy()
    ids[1::2] = b[ok].to_numpy()
    codes = interner.intern_array(ids).reshape(-1, 2)
    table = EventTable(
        src=codes[:, 0],
        dst=codes[:, 1],
        ts=epoch[ok].to_numpy(),
        duration=dur[ok].to_numpy(dtype=np.int64),
        direction=(dir_text[ok] == "OUT").to_numpy(dtype=np.int8),
        kind=np.full(n_ok, int(kind), dtype=np.int8),
    )
    return table


@dataclass(frozen=True)
class DirectedCounters:
    """Per ordered pair ``(src, dst)`` aggregates, sorted by ``(src, dst)``."""

    src: np.ndarray
    dst: np.ndarray
    calls: np.ndarray
    seconds: np.ndarray
    sms: np.ndarray

    @classmethod
    def from_events(cls, events: EventTable) -> "DirectedCounters":
        is_call = events.kind == RecordKind.CALL
        return cls._reduce(
            events.src,
            events.dst,
            is_call.astype(np.int64),
            np.where(is_call, events.duration, 0),
            (~is_call).astype(np.int64),
        )

    @classmethod
    def _reduce(cls, src, dst, calls, seconds, sms) -> "DirectedCounters":
        if len(src) == 0:
            z = np.zeros(0, dtype=np.int64)
            return cls(z, z, z, z, z)
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        base = int(max(src.max(), dst.max())) + 1
        uniq, inv = np.unique(src * base + dst, return_inverse=True)
        n = len(uniq)
        return cls(
            uniq // base,
            uniq % base,
            np.bincount(inv, weights=calls, minlength=n).astype(np.int64),
            np.bincount(inv, weights=seconds, minlength=n).astype(np.int64),
            np.bincount(inv, weights=sms, minlength=n).astype(np.int64),
        )

    def merge(self, other: "DirectedCounters") -> "DirectedCounters":
        return DirectedCounters._reduce(
            np.concatenate([self.src, other.src]),
            np.concatenate([self.dst, other.dst]),
            np.concatenate([self.calls, other.calls]),
            np.concatenate([self.seconds, other.seconds]),
            np.concatenate([self.sms, other.sms]),
        )

    def __len__(self) -> int:
        return len(self.src)

    def lookup(self, x: int, y: int) -> tuple[int, int, int]:
        """``(calls, seconds, sms)`` for the ordered pair ``x -> y``."""
        hit = np.flatnonzero((self.src == x) & (self.dst == y))
        if hit.size == 0:
            return 0, 0, 0
        i = hit[0]
        return int(self.calls[i]), int(self.seconds[i]), int(self.sms[i])


class SocialGraph:
    """Immutable undirected, unweighted graph plus directed traffic counters.

    Adjacency is stored as a symmetric CSR structure with sorted neighbor
    lists, so neighbor reductions always run in ascending index order.
    """

    def __init__(self, n_nodes: int, counters: DirectedCounters):
        self.n_nodes = int(n_nodes)
        self.counters = counters
        if len(counters) and max(counters.src.max(), counters.dst.max()) >= self.n_nodes:
            raise ValueError("counter index exceeds node count")
        if np.any(counters.src == counters.dst):
            raise DataError("self-loop in communication records")
        lo = np.minimum(counters.src, counters.dst)
        hi = np.maximum(counters.src, counters.dst)
        if len(lo):
            key = np.unique(lo * self.n_nodes + hi)
            pairs = np.stack([key // self.n_nodes, key % self.n_nodes], axis=1)
        else:
            pairs = np.zeros((0, 2), np.int64)
        self._edges = pairs
        rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
        cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
        order = np.lexsort((cols, rows))
        rows, cols = rows[order], cols[order]
        self.indptr = np.zeros(self.n_nodes + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=self.n_nodes), out=self.indptr[1:])
        self.indices = cols.astype(np.int64)
        self.indptr.setflags(write=False)
        self.indices.setflags(write=False)
        self._edges.setflags(write=False)

    @property
    def n_edges(self) -> int:
        return len(self._edges)

    def edges(self) -> np.ndarray:
        """``(n_edges, 2)`` array of undirected edges with ``u < v``."""
        return self._edges

    def neighbors(self, x: int) -> np.ndarray:
        return self.indices[self.indptr[x]:self.indptr[x + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def weight(self, x: int, y: int) -> int:
        nb = self.neighbors(x)
        i = np.searchsorted(nb, y)
        return int(i < len(nb) and nb[i] == y)

    def adjacency(self) -> sp.csr_matrix:
        data = np.ones(len(self.indices), dtype=np.float64)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n_nodes, self.n_nodes))

    def traffic_adjacency(self) -> sp.csr_matrix:
        """Symmetric weights: total events (calls + SMS) in both directions."""
        c = self.counters
        w = (c.calls + c.sms).astype(np.float64)
        m = sp.coo_matrix((w, (c.src, c.dst)), shape=(self.n_nodes, self.n_nodes)).tocsr()
        m = (m + m.T).tocsr()
        m.sort_indices()
        return m

    def to_npz(self, path) -> None:
        c = self.counters
        np.savez(path, n_nodes=self.n_nodes, src=c.src, dst=c.dst, calls=c.calls, seconds=c.seconds, sms=c.sms)

    @classmethod
    def from_npz(cls, path) -> "SocialGraph":
        with np.load(path) as z:
            counters = DirectedCounters(z["src"], z["dst"], z["calls"], z["seconds"], z["sms"])
            return cls(int(z["n_nodes"]), counters)

    @classmethod
    def from_edges(cls, n_nodes: int, edges) -> "SocialGraph":
        """Graph with one synthetic call per listed pair (testing helper)."""
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        one = np.ones(len(edges), dtype=np.int64)
        counters = DirectedCounters._reduce(edges[:, 0], edges[:, 1], one, np.zeros_like(one), np.zeros_like(one))
        return cls(n_nodes, counters)


class GraphAccumulator:
    """Shardable aggregation of events into directed counters.

    ``merge`` is associative and commutative, so shards can be reduced in any
    order and yield the same graph.
    """

    def __init__(self, counters: DirectedCounters | None = None, max_index: int = -1):
        self.counters = counters if counters is not None else DirectedCounters.from_events(EventTable.empty())
        self.max_index = max_index

    def add(self, events: EventTable) -> "GraphAccumulator":
        if len(events):
            self.counters = self.counters.merge(DirectedCounters.from_events(events))
            self.max_index = max(self.max_index, int(events.src.max()), int(events.dst.max()))
        return self

    def merge(self, other: "GraphAccumulator") -> "GraphAccumulator":
        return GraphAccumulator(self.counters.merge(other.counters), max(self.max_index, other.max_index))

    def finalize(self, n_nodes: int | None = None) -> SocialGraph:
        n = self.max_index + 1 if n_nodes is None else n_nodes
        return SocialGraph(n, self.counters)


def shard_events(events: EventTable, n_shards: int) -> list[EventTable]:
    """Partition events by unordered pair so each pair lands in one shard."""
    lo = np.minimum(events.src, events.dst)
    hi = np.maximum(events.src, events.dst)
    shard = (lo * 1_000_003 + hi) % n_shards
    return [events.take(shard == s) for s in range(n_shards)]


def build_social_graph(
    records: EventTable | Iterable[CdrRecord | SmsRecord],
    interner: Interner | None = None,
    n_nodes: int | None = None,
) -> SocialGraph:
    """Aggregate a record stream into a :class:`SocialGraph`.

    Accepts either an :class:`EventTable` or an iterable of parsed records
    (in which case ids are interned into ``interner``).
    """
    if not isinstance(records, EventTable):
        interner = interner if interner is not None else Interner()
        records = EventTable.from_records(records, interner)
        if n_nodes is None:
            n_nodes = len(interner)
    acc = GraphAccumulator().add(records)
    return acc.finalize(n_nodes)


@dataclass(frozen=True)
class DemographicLabel:
    gender: Gender
    age: int

    @property
    def age_group(self) -> int:
        return age_group(self.age)


def age_group(age: int) -> int:
    """Index of the age group containing ``age`` (0..3)."""
    if age < AGE_GROUP_EDGES[0]:
        raise DataError(f"age {age} below the youngest group")
    return int(np.searchsorted(AGE_GROUP_EDGES, age, side="right") - 1)


def age_groups(ages) -> np.ndarray:
    ages = np.asarray(ages)
    return np.searchsorted(AGE_GROUP_EDGES, ages, side="right").astype(np.int64) - 1


@dataclass
class LoadStats:
    accepted: int = 0
    rejected: Counter = field(default_factory=Counter)
    duplicates: int = 0

    def as_dict(self) -> dict:
        return {"accepted": self.accepted, "rejected": dict(sorted(self.rejected.items())),
                "duplicates": self.duplicates}


@dataclass
class UserSets:
    """All seen numbers, operator clients and the labeled ground truth.

    Maintains ``ground_truth keys ⊆ operator_clients ⊆ all_seen``: clients are
    interned into the shared :class:`Interner`, and labels for non-clients
    are rejected.
    """

    interner: Interner = field(default_factory=Interner)
    operator_clients: set = field(default_factory=set)
    ground_truth: dict = field(default_factory=dict)
    age_bounds: tuple = (AGE_MIN, AGE_MAX)

    @property
    def all_seen(self) -> set:
        return set(range(len(self.interner)))

    def add_clients(self, ids: Iterable[str]) -> None:
        idx = self.interner.intern_array(list(ids))
        self.operator_clients.update(int(i) for i in idx)

    def client_indices(self) -> np.ndarray:
        return np.array(sorted(self.operator_clients), dtype=np.int64)

    def set_label(self, uid: str, label: DemographicLabel, stats: LoadStats | None = None) -> bool:
        stats = stats if stats is not None else LoadStats()
        lo, hi = self.age_bounds
        if not lo <= label.age <= hi:
            stats.rejected["bad_age"] += 1
            return False
        idx = self.interner.get(uid)
        if idx is None or idx not in self.operator_clients:
            stats.rejected["subset_violation"] += 1
            return False
        if idx in self.ground_truth:
            stats.duplicates += 1
        self.ground_truth[idx] = label
        stats.accepted += 1
        return True

    def label_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(node_index, gender, age)`` arrays sorted by node index."""
        idx = np.array(sorted(self.ground_truth), dtype=np.int64)
        gender = np.array([int(self.ground_truth[i].gender) for i in idx], dtype=np.int64)
        age = np.array([self.ground_truth[i].age for i in idx], dtype=np.int64)
        return idx, gender, age

    def check_invariants(self) -> None:
        n = len(self.interner)
        if any(not 0 <= c < n for c in self.operator_clients):
            raise DataError("operator client outside the seen-user set")
        if not set(self.ground_truth) <= self.operator_clients:
            raise DataError("ground-truth user outside the operator-client set")


def load_operator_clients(path, user_sets: UserSets) -> int:
    """Read one user id per line; returns the number of ids read."""
    with open(path, encoding="utf-8") as fh:
        ids = [line.strip() for line in fh if line.strip()]
    user_sets.add_clients(ids)
    return len(ids)


def load_ground_truth(path, user_sets: UserSets) -> LoadStats:
    """Load ``user_id,gender{M|F},age_years`` rows into ``user_sets``.

    Duplicate ids are last-wins; the number of overwrites is reported in
    :attr:`LoadStats.duplicates`.
    """
    stats = LoadStats()
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or not "".join(row).strip():
                continue
            if len(row) != 3:
                stats.rejected["field_count"] += 1
                continue
            uid, g, a = (x.strip() for x in row)
            gender = GENDER_TOKENS.get(g.upper())
            if gender is None:
                stats.rejected["bad_gender"] += 1
                continue
            try:
                age = int(a)
            except ValueError:
                stats.rejected["bad_age"] += 1
                continue
            user_sets.set_label(uid, DemographicLabel(gender, age), stats)
    if stats.duplicates:
        log.warning("ground truth: %d duplicate user ids (last row wins)", stats.duplicates)
    return stats
