import dataclasses
import math

import numpy as np
import pytest

from demograph.cdr_model import RecordKind, SocialGraph
from demograph.cli import Workspace, stage_ingest
from demograph.features import FEATURE_INDEX, extract_features
from demograph.observational import age_diff_histogram, age_link_matrix, gender_mix
from demograph.synth import (
    SynthConfig,
    age_distribution,
    build_dataset,
    generate,
    generate_cdr_events,
    generate_edges,
    generate_population,
    user_id,
)


def flat_sociability():
    base = SynthConfig().profiles
    return {**base, "sociability": [[1.0] * 4, [1.0] * 4]}


def test_population_shares():
    pop = generate_population(SynthConfig(seed=3, n_users=10_000))
    assert abs((pop.gender == 0).mean() - 0.5683) <= 0.01
    assert np.all(pop.is_labeled <= pop.is_client)
    groups = np.bincount(pop.group, minlength=4) / len(pop)
    np.testing.assert_allclose(groups, [0.121, 0.3545, 0.3745, 0.15], atol=0.02)


def test_full_label_fraction():
    pop = generate_population(SynthConfig(seed=3, n_users=2000, label_fraction=1.0))
    assert np.array_equal(pop.is_labeled, pop.is_client)


def test_seed_determinism():
    a = generate(SynthConfig(seed=5, n_users=2000))
    b = generate(SynthConfig(seed=5, n_users=2000))
    c = generate(SynthConfig(seed=6, n_users=2000))
    assert a[1].tobytes() == b[1].tobytes()
    for col in ("src", "dst", "ts", "duration", "kind", "direction"):
        assert getattr(a[2], col).tobytes() == getattr(b[2], col).tobytes()
    assert a[1].tobytes() != c[1].tobytes()


def test_invalid_config():
    with pytest.raises(ValueError):
        SynthConfig(gender_shares=(0.5, 0.6))
    with pytest.raises(ValueError):
        SynthConfig(label_fraction=0.0)
    with pytest.raises(ValueError):
        SynthConfig.from_dict({"bogus": 1})


def test_no_homophily_matches_random_mixing():
    cfg = SynthConfig(seed=2, n_users=40_000, mean_degree=10, age_homophily_scale=math.inf,
                      gender_mix_bias=0.0, client_fraction=1.0, profiles=flat_sociability())
    pop = generate_population(cfg)
    edges = generate_edges(pop, cfg)
    share = np.bincount(pop.group, minlength=4) / len(pop)
    expected = float(share @ share)
    same = (pop.group[edges[:, 0]] == pop.group[edges[:, 1]]).mean()
    # binomial sd is about 0.0022 for 200k edges
    assert abs(same - expected) < 0.01
    assert abs(2 * len(edges) / len(pop) - 10) < 0.2


def test_narrow_homophily_mode_at_zero():
    cfg = SynthConfig(seed=4, n_users=20_000, age_homophily_scale=3.0)
    pop = generate_population(cfg)
    g = SocialGraph.from_edges(len(pop), generate_edges(pop, cfg))
    hist = age_diff_histogram(g, pop.age)
    assert max(hist, key=hist.get) == 0


def test_generation_bump_adds_mass_near_offset():
    base = SynthConfig(seed=4, n_users=20_000, age_homophily_scale=3.0)
    bump = dataclasses.replace(base, generation_bump_weight=0.3)
    counts = []
    for cfg in (base, bump):
        pop = generate_population(cfg)
        hist = age_diff_histogram(SocialGraph.from_edges(len(pop), generate_edges(pop, cfg)), pop.age)
        counts.append(sum(hist.get(d, 0) for d in range(19, 24)))
    assert counts[1] > 2 * counts[0]


def test_zero_degree_and_zero_rates():
    cfg = SynthConfig(seed=1, n_users=500, mean_degree=0.0)
    pop = generate_population(cfg)
    assert len(generate_edges(pop, cfg)) == 0
    cfg = SynthConfig(seed=1, n_users=500, call_rate=0.0, sms_rate=0.0)
    pop = generate_population(cfg)
    assert len(generate_cdr_events(pop, generate_edges(pop, cfg), cfg)) == 0


def test_event_count_expectation():
    cfg = SynthConfig(seed=8, n_users=20_000)
    pop, edges, events = generate(cfg)
    prof = {k: np.asarray(v) for k, v in cfg.profiles.items()}
    src = np.concatenate([edges[:, 0], edges[:, 1]])
    rate = cfg.call_rate * prof["calls"][pop.gender[src], pop.group[src]] \
        + cfg.sms_rate * prof["sms"][pop.gender[src], pop.group[src]]
    expected = rate.sum()
    assert abs(len(events) - expected) < 4 * math.sqrt(expected)


def test_timestamps_inside_window():
    cfg = SynthConfig(seed=8, n_users=3000, months=2)
    _, _, events = generate(cfg)
    start, end = cfg.window_seconds
    assert events.ts.min() >= start and events.ts.max() < end


def test_duration_gap_sign_round_trip():
    ds = build_dataset(SynthConfig(seed=9, n_users=20_000))
    clients = ds.user_sets.client_indices()
    f = extract_features(ds.events, ds.graph, clients)
    nodes, gender, _ = ds.user_sets.label_arrays()
    rows = np.searchsorted(clients, nodes)
    col = f[rows, FEATURE_INDEX["call_seconds_out_total"]] / np.maximum(f[rows, FEATURE_INDEX["calls_out_total"]], 1)
    assert col[gender == 0].mean() > col[gender == 1].mean()


def test_planted_structure_recovered():
    ds = build_dataset(SynthConfig(seed=10, n_users=30_000, age_homophily_scale=3.0, gender_mix_bias=0.3))
    nodes, gender, age = ds.user_sets.label_arrays()
    ages = np.full(ds.graph.n_nodes, -1)
    ages[nodes] = age
    band, off = age_link_matrix(ds.graph, ages).band_contrast(2)
    assert band >= 2 * off
    genders = np.full(ds.graph.n_nodes, -1)
    genders[nodes] = gender
    mix = gender_mix(ds.events, genders)
    p_male = (gender == 0).mean()
    assert mix.prob(0, 1) < p_male < mix.prob(0, 0)


def test_csv_round_trip_matches_in_memory(tmp_path, small_config, small_data_dir):
    ds = build_dataset(small_config)
    ws = Workspace(tmp_path / "work")
    info = stage_ingest(ws, small_data_dir)
    assert info["calls"]["rejected"] == {} and info["sms"]["rejected"] == {}
    ids = ws.load_user_ids()
    ev = ws.load_events()

    def keyed(events, names):
        names = np.asarray(names, dtype=object)
        return sorted(zip(names[events.src], names[events.dst], events.ts.tolist(), events.duration.tolist(),
                          events.kind.tolist(), events.direction.tolist()))

    assert keyed(ev, ids) == keyed(ds.events, [user_id(i) for i in range(small_config.n_users)])
    assert info["n_labels"] == len(ds.user_sets.ground_truth)
    assert info["n_clients"] == len(ds.user_sets.operator_clients)


def test_local_timezone_round_trip(tmp_path):
    from demograph.synth import write_synth
    cfg = SynthConfig(seed=12, n_users=800, months=1, tz="America/Mexico_City")
    write_synth(cfg, tmp_path / "d")
    info = stage_ingest(Workspace(tmp_path / "w"), tmp_path / "d")
    assert info["tz"] == "America/Mexico_City"
    assert info["calls"]["rejected"] == {}
    ds = build_dataset(cfg)
    assert info["n_events"] == len(ds.events)
    assert sorted(Workspace(tmp_path / "w").load_events().ts.tolist()) == sorted(ds.events.ts.tolist())


def test_age_distribution_normalized():
    ages, p = age_distribution(SynthConfig())
    assert ages[0] == 10 and abs(p.sum() - 1) < 1e-12
    ages, p = age_distribution(SynthConfig(age_pyramid=[0.5, 0.5]))
    assert ages.tolist() == [10, 11]
