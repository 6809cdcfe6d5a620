"""The 45 per-user characterization variables.

Column layout (see :data:`FEATURE_NAMES`)::

    calls_{in,out,all}_{week_daylight,week_night,weekend,total}          12
    call_seconds_{in,out,all}_{week_daylight,week_night,weekend,total}   12
    sms_{in,out,all}_{week_daylight,week_night,weekend,total}            12
    contact_days_{call,sms}_{in,out,any}                                  6
    degree, in_degree, out_degree                                         3

A call is attributed to the window of its start time. Weekday daylight is
``07:00:00 <= t < 19:00:00`` local time, Monday to Friday.
"""

from __future__ import annotations

import enum
from datetime import datetime

import numpy as np
import pandas as pd

from .cdr_model import DEFAULT_TZ, EventTable, RecordKind, SocialGraph
from .errors import DataError

DAYLIGHT_START_HOUR = 7
DAYLIGHT_END_HOUR = 19


class TimeWindow(enum.IntEnum):
    WEEK_DAYLIGHT = 0
    WEEK_NIGHT = 1
    WEEKEND = 2
    TOTAL = 3


WINDOW_NAMES = ("week_daylight", "week_night", "weekend", "total")
DIRECTION_NAMES = ("in", "out", "all")
FAMILIES = ("calls", "call_seconds", "sms")


def _feature_names() -> list[str]:
    names = [
        f"{fam}_{d}_{w}" for fam in FAMILIES for d in DIRECTION_NAMES for w in WINDOW_NAMES
    ]
    names += [f"contact_days_{k}_{d}" for k in ("call", "sms") for d in ("in", "out", "any")]
    names += ["degree", "in_degree", "out_degree"]
    return names


FEATURE_NAMES: list[str] = _feature_names()
N_FEATURES = len(FEATURE_NAMES)
FEATURE_INDEX = {name: i for i, name in enumerate(FEATURE_NAMES)}


def classify_time_window(timestamp: datetime) -> TimeWindow:
    """Window of a (local) timestamp: weekend, weekday daylight or weekday night."""
    if timestamp.weekday() >= 5:
        return TimeWindow.WEEKEND
    if DAYLIGHT_START_HOUR <= timestamp.hour < DAYLIGHT_END_HOUR:
        return TimeWindow.WEEK_DAYLIGHT
    return TimeWindow.WEEK_NIGHT


def local_calendar(ts: np.ndarray, tz: str = DEFAULT_TZ) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ``(window, local_day_number)`` for epoch-second timestamps."""
    ts = np.asarray(ts, dtype=np.int64)
    if tz == "UTC":
        local = ts
    else:
        idx = pd.DatetimeIndex(pd.to_datetime(ts, unit="s", utc=True)).tz_convert(tz)
        local = idx.tz_localize(None).as_unit("s").asi8
    day = np.floor_divide(local, 86400)
    sec_of_day = local - day * 86400
    weekday = (day + 3) % 7  # 1970-01-01 was a Thursday (Mon = 0)
    hour = sec_of_day // 3600
    window = np.where(
        weekday >= 5,
        TimeWindow.WEEKEND,
        np.where((hour >= DAYLIGHT_START_HOUR) & (hour < DAYLIGHT_END_HOUR),
                 TimeWindow.WEEK_DAYLIGHT, TimeWindow.WEEK_NIGHT),
    ).astype(np.int64)
    return window, day


def _expand_family(base: np.ndarray) -> np.ndarray:
    """``(n, 2, 3)`` in/out x window counts -> ``(n, 12)`` with all/total cells."""
    n = base.shape[0]
    full = np.zeros((n, 3, 4), dtype=np.float64)
    full[:, :2, :3] = base
    full[:, 2, :3] = base[:, 0, :] + base[:, 1, :]
    full[:, :, 3] = full[:, :, :3].sum(axis=2)
    return full.reshape(n, 12)


def compute_degrees(graph: SocialGraph, users: np.ndarray | None = None) -> np.ndarray:
    """``(n, 3)`` array of ``(degree, in_degree, out_degree)``.

    ``in_degree`` counts distinct counterparties that contacted the user,
    ``out_degree`` those the user contacted and ``degree`` the distinct
    counterparties in either direction.
    """
    c = graph.counters
    out_deg = np.bincount(c.src, minlength=graph.n_nodes)
    in_deg = np.bincount(c.dst, minlength=graph.n_nodes)
    deg = graph.degrees()
    out = np.stack([deg, in_deg, out_deg], axis=1).astype(np.int64)
    return out if users is None else out[np.asarray(users, dtype=np.int64)]


def extract_features(
    events: EventTable,
    graph: SocialGraph,
    users: np.ndarray,
    tz: str = DEFAULT_TZ,
) -> np.ndarray:
    """Feature matrix ``(len(users), 45)`` for the given node indices.

    Rows follow ``users`` order. The result depends only on the multiset of
    events: every aggregation is an order-free integer count or sum.
    """
    users = np.asarray(users, dtype=np.int64)
    n = len(users)
    row_of = np.full(graph.n_nodes, -1, dtype=np.int64)
    row_of[users] = np.arange(n)
    window, day = local_calendar(events.ts, tz)
    is_call = events.kind == RecordKind.CALL

    calls = np.zeros((n, 2, 3))
    seconds = np.zeros((n, 2, 3))
    sms = np.zeros((n, 2, 3))
    day_base = int(day.min()) if len(day) else 0
    n_days = int(day.max()) - day_base + 1 if len(day) else 1
    # (row, day) pairs packed as row * n_days + day offset
    day_sets: dict[tuple[int, int], np.ndarray] = {}
    for direction, party in ((0, events.dst), (1, events.src)):
        rows = row_of[party]
        mine = rows >= 0
        cell = rows * 6 + direction * 3 + window
        for target, weight, kind_mask in (
            (calls, None, is_call),
            (seconds, events.duration, is_call),
            (sms, None, ~is_call),
        ):
            sel = mine & kind_mask
            w = None if weight is None else weight[sel].astype(np.float64)
            target += np.bincount(cell[sel], weights=w, minlength=n * 6).reshape(n, 2, 3)
        for kind in (RecordKind.CALL, RecordKind.SMS):
            sel = mine & (events.kind == kind)
            day_sets[(int(kind), direction)] = np.unique(rows[sel] * n_days + (day[sel] - day_base))

    contact = np.zeros((n, 6))
    for k, kind in enumerate((RecordKind.CALL, RecordKind.SMS)):
        d_in = day_sets[(int(kind), 0)]
        d_out = day_sets[(int(kind), 1)]
        d_any = np.union1d(d_in, d_out)
        for j, keys in enumerate((d_in, d_out, d_any)):
            contact[:, 3 * k + j] = np.bincount(keys // n_days, minlength=n)

    return np.hstack([
        _expand_family(calls),
        _expand_family(seconds),
        _expand_family(sms),
        contact,
        compute_degrees(graph, users).astype(np.float64),
    ])


def extract_user_features(
    user: int,
    events: EventTable,
    graph: SocialGraph,
    clients,
    tz: str = DEFAULT_TZ,
) -> dict[str, float]:
    """Named features for a single operator client."""
    if int(user) not in clients:
        raise DataError(f"user {user} is not an operator client")
    mine = (events.src == user) | (events.dst == user)
    row = extract_features(events.take(mine), graph, np.array([user]), tz)[0]
    return dict(zip(FEATURE_NAMES, row.tolist()))


def write_feature_csv(path, matrix: np.ndarray, user_ids) -> None:
    df = pd.DataFrame(matrix, columns=FEATURE_NAMES)
    df.insert(0, "user_id", list(user_ids))
    df.to_csv(path, index=False)
