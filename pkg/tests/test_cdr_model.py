from datetime import datetime, timezone

import numpy as np
import pytest

from demograph.cdr_model import (
    CdrRecord,
    DemographicLabel,
    Direction,
    EventTable,
    Gender,
    GraphAccumulator,
    Interner,
    ObservationWindow,
    ParseStats,
    RecordKind,
    RecordRejected,
    SmsRecord,
    SocialGraph,
    UserSets,
    age_group,
    build_social_graph,
    load_ground_truth,
    load_operator_clients,
    parse_cdr_line,
    parse_lines,
    read_record_csv,
    shard_events,
)
from demograph.errors import DataError


def test_parse_call_line():
    rec = parse_cdr_line("A1,B2,2021-03-02T08:30:00,120,OUT,T45", "cdr")
    assert isinstance(rec, CdrRecord)
    assert (rec.caller, rec.callee, rec.duration, rec.direction, rec.tower) == ("A1", "B2", 120, Direction.OUT, "T45")
    assert rec.timestamp == datetime(2021, 3, 2, 8, 30, tzinfo=timezone.utc)


def test_parse_sms_line():
    rec = parse_cdr_line("A1,B2,2021-03-06T23:10:00,IN", "sms")
    assert isinstance(rec, SmsRecord)
    assert (rec.sender, rec.receiver, rec.direction) == ("A1", "B2", Direction.IN)


@pytest.mark.parametrize("line,reason", [
    ("A1,B2,notadate,120,OUT,T45", "bad_timestamp"),
    ("A1,B2,2021-03-02T08:30:00,-5,OUT,T45", "negative_duration"),
    ("A1,B2,2021-03-02T08:30:00,120,OUT", "field_count"),
    ("A1,A1,2021-03-02T08:30:00,120,OUT,T45", "self_contact"),
    ("A1,B2,2021-03-02T08:30:00,120,SIDEWAYS,T45", "bad_direction"),
    ("A1,B2,2021-03-02T08:30:00,abc,OUT,T45", "bad_duration"),
])
def test_rejections(line, reason):
    with pytest.raises(RecordRejected) as exc:
        parse_cdr_line(line, "cdr")
    assert exc.value.reason == reason


def test_timezone_normalization():
    rec = parse_cdr_line("A,B,2021-03-02T08:30:00,1,OUT,", "cdr", tz="America/Mexico_City")
    assert rec.timestamp.utcoffset().total_seconds() == -6 * 3600
    assert rec.tower is None
    # explicit offsets are converted into the configured zone
    rec = parse_cdr_line("A,B,2021-03-02T14:30:00+00:00,1,OUT,T", "cdr", tz="America/Mexico_City")
    assert rec.timestamp.hour == 8


def test_window_rejection():
    window = ObservationWindow.from_strings("2021-03-01T00:00:00", "2021-04-01T00:00:00")
    assert window.n_days == 31
    with pytest.raises(RecordRejected, match="out_of_window"):
        parse_cdr_line("A,B,2021-04-01T00:00:00,1,OUT,T", "cdr", window=window)
    parse_cdr_line("A,B,2021-03-31T23:59:59,1,OUT,T", "cdr", window=window)


def test_parse_lines_counts_rejects_without_aborting():
    lines = ["A,B,2021-03-02T08:30:00,1,OUT,T", "garbage", "", "A,B,notadate,1,OUT,T",
             "B,C,2021-03-02T09:00:00,5,IN,T"]
    stats = ParseStats()
    recs = list(parse_lines(lines, "cdr", stats))
    assert len(recs) == 2
    assert stats.accepted == 2
    assert stats.n_rejected == 2
    assert stats.as_dict()["rejected"] == {"bad_timestamp": 1, "field_count": 1}


def test_bulk_reader_matches_line_parser(tmp_path):
    lines = [
        "A1,B2,2021-03-02T08:30:00,120,OUT,T45",
        "A1,B2,notadate,120,OUT,T45",
        "C3,A1,2021-03-05T19:00:00,0,IN,",
        "A1,A1,2021-03-02T08:30:00,3,OUT,T1",
        "A1,B2,2021-03-02T08:30:00,-1,OUT,T1",
        "A1,B2,2021-03-02T08:30:00,7,OUT",
        "B2,D4,2021-03-07T23:59:59,3600,IN,T9",
        "B2,D4,2021-03-07T23:59:59,x,IN,T9",
        "B2,D4,2021-03-07T23:59:59,1,UP,T9",
        "",
        "A1,B2,2021-03-02T08:30:00,120,OUT,T45",
    ]
    path = tmp_path / "calls.csv"
    path.write_text("\n".join(lines) + "\n")
    ref_stats = ParseStats()
    ref_interner = Interner()
    ref = EventTable.from_records(parse_lines(lines, "cdr", ref_stats), ref_interner)
    interner = Interner()
    table, stats = read_record_csv(path, "cdr", interner, chunk_lines=3)
    assert stats.as_dict() == ref_stats.as_dict()
    assert interner.ids == ref_interner.ids
    for col in ("src", "dst", "ts", "duration", "direction", "kind"):
        np.testing.assert_array_equal(getattr(table, col), getattr(ref, col))


def test_bulk_reader_sms_with_tz_and_window(tmp_path):
    lines = ["A,B,2021-03-06T23:10:00,IN", "A,B,2021-02-06T23:10:00,OUT", "A,C,2021-03-14T02:30:00,OUT"]
    path = tmp_path / "sms.csv"
    path.write_text("\n".join(lines) + "\n")
    tz = "America/New_York"
    window = ObservationWindow.from_strings("2021-03-01T00:00:00", "2021-04-01T00:00:00", tz)
    ref_stats = ParseStats()
    ref = EventTable.from_records(parse_lines(lines, "sms", ref_stats, tz=tz, window=window), Interner())
    table, stats = read_record_csv(path, "sms", Interner(), tz=tz, window=window)
    assert stats.as_dict() == ref_stats.as_dict() == {"accepted": 2, "rejected": {"out_of_window": 1}}
    np.testing.assert_array_equal(table.ts, ref.ts)
    assert np.all(table.kind == RecordKind.SMS)


def _records():
    t = datetime(2021, 3, 2, 10, tzinfo=timezone.utc)
    return [
        CdrRecord("A", "B", t, 60, Direction.OUT),
        CdrRecord("B", "A", t, 30, Direction.IN),
        SmsRecord("A", "C", t, Direction.OUT),
    ]


def test_build_graph_dedups_pairs():
    interner = Interner()
    g = build_social_graph(_records(), interner)
    assert g.n_nodes == 3
    a, b, c = (interner.get(x) for x in "ABC")
    assert {tuple(e) for e in g.edges().tolist()} == {tuple(sorted((a, b))), tuple(sorted((a, c)))}
    for x, y in ((a, b), (a, c)):
        assert g.weight(x, y) == g.weight(y, x) == 1
    assert g.weight(b, c) == 0


def test_empty_graph():
    g = build_social_graph([])
    assert g.n_nodes == 0 and g.n_edges == 0


def test_directed_counter_aggregation():
    t = datetime(2021, 3, 2, 10, tzinfo=timezone.utc)
    interner = Interner()
    g = build_social_graph([CdrRecord("A", "B", t, 60, Direction.OUT), CdrRecord("A", "B", t, 30, Direction.OUT)],
                           interner)
    a, b = interner.get("A"), interner.get("B")
    assert g.counters.lookup(a, b) == (2, 90, 0)
    assert g.counters.lookup(b, a) == (0, 0, 0)
    assert g.weight(a, b) == 1


def test_self_loop_rejected_in_graph():
    with pytest.raises(DataError):
        SocialGraph.from_edges(3, [(1, 1)])


def _random_events(rng, n_nodes=50, n=2000):
    src = rng.integers(0, n_nodes, n)
    dst = (src + rng.integers(1, n_nodes, n)) % n_nodes
    return EventTable(src, dst, rng.integers(0, 10**6, n), rng.integers(0, 600, n),
                      rng.integers(0, 2, n), rng.integers(0, 2, n))


def test_graph_symmetry_and_conservation(rng):
    ev = _random_events(rng)
    g = build_social_graph(ev, n_nodes=50)
    adj = g.adjacency()
    assert (adj != adj.T).nnz == 0
    for u, v in g.edges():
        assert g.weight(u, v) == g.weight(v, u) == 1
    calls = ev.kind == RecordKind.CALL
    assert g.counters.seconds.sum() == ev.duration[calls].sum()
    assert g.counters.calls.sum() == calls.sum()
    assert g.counters.sms.sum() == (~calls).sum()


def test_duplicate_records_counted_twice():
    t = datetime(2021, 3, 2, 10, tzinfo=timezone.utc)
    rec = CdrRecord("A", "B", t, 10, Direction.OUT)
    interner = Interner()
    g = build_social_graph([rec, rec], interner)
    assert g.counters.lookup(0, 1) == (2, 20, 0)


def test_sharded_merge_is_order_free(rng):
    ev = _random_events(rng)
    whole = build_social_graph(ev, n_nodes=50)
    shards = [GraphAccumulator().add(s) for s in shard_events(ev, 4)]
    forward = shards[0].merge(shards[1]).merge(shards[2].merge(shards[3])).finalize(50)
    backward = shards[3].merge(shards[2]).merge(shards[1]).merge(shards[0]).finalize(50)
    for g in (forward, backward):
        np.testing.assert_array_equal(g.indptr, whole.indptr)
        np.testing.assert_array_equal(g.indices, whole.indices)
        for col in ("src", "dst", "calls", "seconds", "sms"):
            np.testing.assert_array_equal(getattr(g.counters, col), getattr(whole.counters, col))


def test_age_groups():
    assert [age_group(a) for a in (10, 24, 25, 34, 35, 49, 50, 100)] == [0, 0, 1, 1, 2, 2, 3, 3]
    assert DemographicLabel(Gender.FEMALE, 34).age_group == 1


def test_ground_truth_loading(tmp_path):
    clients = tmp_path / "clients.txt"
    clients.write_text("A1\nA2\nA3\n")
    gt = tmp_path / "gt.csv"
    gt.write_text("A1,F,34\nA2,X,34\nZ9,M,40\nA3,M,7\nA2,M,101\nA3,M,60\nA3,F,61\n")
    us = UserSets()
    us.interner.intern("Q0")
    assert load_operator_clients(clients, us) == 3
    stats = load_ground_truth(gt, us)
    assert stats.accepted == 3
    assert stats.rejected == {"bad_gender": 1, "subset_violation": 1, "bad_age": 2}
    assert stats.duplicates == 1
    a1, a3 = us.interner.get("A1"), us.interner.get("A3")
    assert us.ground_truth[a1] == DemographicLabel(Gender.FEMALE, 34)
    assert us.ground_truth[a1].age_group == 1
    assert us.ground_truth[a3] == DemographicLabel(Gender.FEMALE, 61)
    us.check_invariants()
    assert set(us.ground_truth) <= us.operator_clients <= us.all_seen


def test_interner_roundtrip():
    it = Interner(["x", "y"])
    idx = it.intern_array(["y", "z", "x", "z", "w"])
    assert idx.tolist() == [1, 2, 0, 2, 3]
    assert it.lookup_array([3, 0]).tolist() == ["w", "x"]
