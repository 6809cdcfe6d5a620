import zoneinfo
from datetime import datetime, timezone

import numpy as np
import pytest

from demograph.cdr_model import CdrRecord, Direction, EventTable, Interner, SmsRecord, build_social_graph
from demograph.errors import DataError
from demograph.features import (
    FEATURE_INDEX,
    FEATURE_NAMES,
    N_FEATURES,
    TimeWindow,
    classify_time_window,
    compute_degrees,
    extract_features,
    extract_user_features,
    local_calendar,
)


def _ts(*args):
    return datetime(*args, tzinfo=timezone.utc)


def test_feature_manifest():
    assert N_FEATURES == 45 == len(set(FEATURE_NAMES))
    assert FEATURE_NAMES[:4] == ["calls_in_week_daylight", "calls_in_week_night", "calls_in_weekend",
                                 "calls_in_total"]
    assert FEATURE_NAMES[-3:] == ["degree", "in_degree", "out_degree"]


@pytest.mark.parametrize("when,window", [
    (datetime(2021, 3, 2, 8, 30), TimeWindow.WEEK_DAYLIGHT),
    (datetime(2021, 3, 1, 6, 59, 59), TimeWindow.WEEK_NIGHT),
    (datetime(2021, 3, 1, 7, 0, 0), TimeWindow.WEEK_DAYLIGHT),
    (datetime(2021, 3, 1, 18, 59, 59), TimeWindow.WEEK_DAYLIGHT),
    (datetime(2021, 3, 1, 19, 0, 0), TimeWindow.WEEK_NIGHT),
    (datetime(2021, 3, 6, 3, 0), TimeWindow.WEEKEND),
    (datetime(2021, 3, 7, 12, 0), TimeWindow.WEEKEND),
])
def test_classify_time_window(when, window):
    assert classify_time_window(when) == window


def test_vectorized_calendar_matches_scalar(rng):
    ts = rng.integers(1_500_000_000, 1_700_000_000, 5000)
    for tz in ("UTC", "America/Mexico_City"):
        window, day = local_calendar(ts, tz)
        for t, w in zip(ts[:300], window[:300]):
            local = datetime.fromtimestamp(int(t), timezone.utc)
            if tz != "UTC":
                local = local.astimezone(zoneinfo.ZoneInfo(tz))
            assert classify_time_window(local) == w


def _build(records):
    interner = Interner()
    ev = EventTable.from_records(records, interner)
    g = build_social_graph(ev, n_nodes=len(interner))
    return interner, ev, g


def test_worked_example_calls():
    recs = [
        CdrRecord("U", "B", _ts(2021, 3, 2, 10), 60, Direction.OUT),
        CdrRecord("U", "B", _ts(2021, 3, 2, 10), 30, Direction.OUT),
        CdrRecord("C", "U", _ts(2021, 3, 6, 10), 10, Direction.IN),
    ]
    interner, ev, g = _build(recs)
    u = interner.get("U")
    f = extract_user_features(u, ev, g, {u})
    assert f["calls_out_week_daylight"] == 2
    assert f["calls_all_total"] == 3
    assert f["call_seconds_in_weekend"] == 10
    assert f["call_seconds_all_total"] == 100
    assert (f["degree"], f["in_degree"], f["out_degree"]) == (2, 1, 1)
    assert f["contact_days_call_any"] == 2
    assert f["sms_all_total"] == 0


def test_worked_example_sms():
    interner, ev, g = _build([SmsRecord("U", "B", _ts(2021, 3, 7, 9), Direction.OUT)])
    u = interner.get("U")
    f = extract_user_features(u, ev, g, {u})
    assert f["sms_out_weekend"] == 1 and f["sms_all_total"] == 1
    assert f["contact_days_sms_out"] == 1
    assert all(v == 0 for k, v in f.items() if k.startswith("call"))


def test_zero_record_user():
    interner, ev, g = _build([CdrRecord("A", "B", _ts(2021, 3, 2, 10), 5, Direction.OUT)])
    row = extract_features(ev, build_social_graph(ev, n_nodes=3), np.array([2]))
    assert row.shape == (1, 45) and not row.any()


def test_non_client_rejected():
    interner, ev, g = _build([CdrRecord("A", "B", _ts(2021, 3, 2, 10), 5, Direction.OUT)])
    with pytest.raises(DataError):
        extract_user_features(interner.get("B"), ev, g, {interner.get("A")})


def test_degrees():
    t = _ts(2021, 3, 2, 10)
    interner, ev, g = _build([
        CdrRecord("A", "B", t, 1, Direction.OUT),
        CdrRecord("A", "C", t, 1, Direction.OUT),
        CdrRecord("B", "A", t, 1, Direction.IN),
        CdrRecord("D", "E", t, 1, Direction.OUT),
        CdrRecord("E", "D", t, 1, Direction.OUT),
    ])
    deg = compute_degrees(g)
    assert deg[interner.get("A")].tolist() == [2, 1, 2]
    assert deg[interner.get("D")].tolist() == [1, 1, 1]
    isolated = compute_degrees(build_social_graph(ev, n_nodes=len(interner) + 1))
    assert isolated[-1].tolist() == [0, 0, 0]


def _random_table(rng, n_nodes=40, n=3000):
    src = rng.integers(0, n_nodes, n)
    dst = (src + rng.integers(1, n_nodes, n)) % n_nodes
    kind = rng.integers(0, 2, n)
    return EventTable(src, dst, rng.integers(1_614_556_800, 1_614_556_800 + 60 * 86400, n),
                      np.where(kind == 0, rng.integers(0, 900, n), 0), rng.integers(0, 2, n), kind)


def test_additivity_and_bounds(rng):
    ev = _random_table(rng)
    g = build_social_graph(ev, n_nodes=40)
    f = extract_features(ev, g, np.arange(40), "America/Mexico_City")
    assert np.all(f >= 0)
    for fam in ("calls", "call_seconds", "sms"):
        for w in ("week_daylight", "week_night", "weekend", "total"):
            cols = [FEATURE_INDEX[f"{fam}_{d}_{w}"] for d in ("in", "out", "all")]
            np.testing.assert_array_equal(f[:, cols[0]] + f[:, cols[1]], f[:, cols[2]])
        for d in ("in", "out", "all"):
            parts = [FEATURE_INDEX[f"{fam}_{d}_{w}"] for w in ("week_daylight", "week_night", "weekend")]
            np.testing.assert_array_equal(f[:, parts].sum(axis=1), f[:, FEATURE_INDEX[f"{fam}_{d}_total"]])
    deg, ind, outd = (f[:, FEATURE_INDEX[n]] for n in ("degree", "in_degree", "out_degree"))
    assert np.all(np.maximum(ind, outd) <= deg) and np.all(deg <= ind + outd)
    days = f[:, [FEATURE_INDEX[n] for n in FEATURE_NAMES if n.startswith("contact_days")]]
    assert days.max() <= 61


def test_permutation_invariance(rng):
    ev = _random_table(rng)
    g = build_social_graph(ev, n_nodes=40)
    users = np.arange(0, 40, 3)
    base = extract_features(ev, g, users)
    perm = rng.permutation(len(ev))
    shuffled = extract_features(ev.take(perm), g, users)
    assert base.tobytes() == shuffled.tobytes()


def test_brute_force_counts(rng):
    ev = _random_table(rng, n_nodes=12, n=400)
    g = build_social_graph(ev, n_nodes=12)
    f = extract_features(ev, g, np.arange(12))
    window, day = local_calendar(ev.ts)
    names = ("week_daylight", "week_night", "weekend")
    for u in range(12):
        out_calls = [(w, s) for a, k, w, s in zip(ev.src, ev.kind, window, ev.duration) if a == u and k == 0]
        for wi, wn in enumerate(names):
            assert f[u, FEATURE_INDEX[f"calls_out_{wn}"]] == sum(1 for w, _ in out_calls if w == wi)
            assert f[u, FEATURE_INDEX[f"call_seconds_out_{wn}"]] == sum(s for w, s in out_calls if w == wi)
        sms_days = {d for a, b, k, d in zip(ev.src, ev.dst, ev.kind, day) if k == 1 and u in (a, b)}
        assert f[u, FEATURE_INDEX["contact_days_sms_any"]] == len(sms_days)
        in_parties = {a for a, b in zip(ev.src, ev.dst) if b == u}
        assert f[u, FEATURE_INDEX["in_degree"]] == len(in_parties)
