import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cvrpxai.features import read_feature_csv
from cvrpxai.scenarios import (
    SCENARIOS,
    CorpusEntry,
    ScenarioSpec,
    build_scenario,
    class_balance,
    make_scenarios,
    scenario_by_id,
    stratified_split,
)
from cvrpxai.solvers import clarke_wright, sweep

from conftest import make_instance, random_instance

_BASE = random_instance(10, 42)
_CW = clarke_wright(_BASE)
_SW = sweep(_BASE)


def entry(k, gaps):
    """Instance copy named i<k> with near-optimal gaps (mnslite, clarke_wright, sweep)."""
    inst = make_instance(_BASE.coords, _BASE.demands[1:], _BASE.capacity, _BASE.fleet_size, name=f"i{k:03d}")
    build = lambda sol, src: type(sol).build(inst, sol.routes, src)  # noqa: E731
    opt = build(_CW, "optimal_proxy").with_gap(0.0)
    near = (build(_SW, "mnslite").with_gap(gaps[0]), build(_CW, "clarke_wright").with_gap(gaps[1]),
            build(_SW, "sweep").with_gap(gaps[2]))
    return CorpusEntry(inst, opt, near)


def random_corpus(n, seed):
    rng = np.random.default_rng(seed)
    gaps = rng.choice([0.0, 1.0, 2.0, 3.0, 5.0, 6.0, 7.0, 9.0, 10.0, 12.0, 15.0, 20.0], size=(n, 3))
    return [entry(k, g) for k, g in enumerate(gaps)]


def test_scenario_table():
    assert [s.id for s in SCENARIOS] == [f"S{k}" for k in range(1, 9)]
    assert [s.source for s in SCENARIOS[:3]] == ["mnslite", "clarke_wright", "sweep"]
    assert [s.gap_threshold for s in SCENARIOS[3:]] == [2, 5, 7, 10, 15]
    assert scenario_by_id("S6").gap_threshold == 7
    with pytest.raises(KeyError):
        scenario_by_id("S9")


def test_thresholds_must_increase():
    with pytest.raises(ValueError):
        make_scenarios((2, 5, 5, 10, 15))
    with pytest.raises(ValueError):
        ScenarioSpec("S4")


def test_empty_negative_class():
    corpus = [entry(k, (0.5, 1.0, 8.0)) for k in range(6)]
    with pytest.raises(ValueError, match="empty negative class"):
        build_scenario(corpus, scenario_by_id("S7"))


def test_threshold_is_strict():
    corpus = [entry(0, (2.0, 2.0, 2.0)), entry(1, (2.0, 3.0, 2.0))]
    ds = build_scenario(corpus, scenario_by_id("S4"))
    negatives = [fv for fv, y in ds.rows if y == 0]
    assert [(fv.instance_id, fv.solution_source) for fv in negatives] == [("i001", "clarke_wright")]


def test_s1_counts():
    corpus = random_corpus(100, 1)
    ds = build_scenario(corpus, scenario_by_id("S1"))
    n_mns = sum(e.near[0].gap_percent > 0 for e in corpus)
    assert len(ds.rows) == 100 + n_mns
    assert class_balance(ds)[:2] == (100, n_mns)


def test_zero_gap_solutions_are_never_negatives():
    corpus = [entry(0, (0.0, 4.0, 9.0)), entry(1, (0.0, 0.0, 3.0))]
    with pytest.raises(ValueError, match="empty negative class"):
        build_scenario(corpus, scenario_by_id("S1"))
    ds = build_scenario(corpus, scenario_by_id("S2"))
    assert class_balance(ds)[:2] == (2, 1)


def test_class_balance_examples():
    corpus = [entry(k, (5.0, 5.0, 5.0)) for k in range(10)]
    ds = build_scenario(corpus, scenario_by_id("S4"))
    assert class_balance(ds) == (10, 30, 0.25)
    corpus = [entry(k, (1.0, 1.0, 5.0)) for k in range(10)]
    assert class_balance(build_scenario(corpus, scenario_by_id("S3")))[2] == 0.5


def test_membership_recount():
    corpus = random_corpus(40, 2)
    total = 0
    for spec in SCENARIOS:
        try:
            ds = build_scenario(corpus, spec)
        except ValueError:
            continue
        total += class_balance(ds)[1]
    # recount straight from the gap table
    recount = sum(1 for spec in SCENARIOS for e in corpus for s in e.near
                  if s.gap_percent > 0 and (s.source == spec.source if spec.source else s.gap_percent > spec.gap_threshold))
    assert total == recount


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_dataset_invariants(seed):
    corpus = random_corpus(30, seed)
    negs = {}
    for spec in SCENARIOS:
        try:
            ds = build_scenario(corpus, spec, seed=seed)
        except ValueError:
            negs[spec.id] = set()
            continue
        ids = [fv.instance_id for fv, y in ds.rows if y == 1]
        assert sorted(ids) == sorted(e.instance_id for e in corpus)
        negs[spec.id] = {(fv.instance_id, fv.solution_source) for fv, y in ds.rows if y == 0}
        assert set(ds.train).isdisjoint(ds.test)
        assert sorted(np.concatenate((ds.train, ds.test))) == list(range(len(ds.rows)))
        again = build_scenario(corpus, spec, seed=seed)
        assert np.array_equal(again.test, ds.test)
    for a, b in zip(("S4", "S5", "S6", "S7"), ("S5", "S6", "S7", "S8")):
        assert negs[a] >= negs[b]


@settings(max_examples=50, deadline=None)
@given(n_pos=st.integers(1, 60), n_neg=st.integers(1, 60), frac=st.floats(0.05, 0.95), seed=st.integers(0, 999))
def test_split_is_stratified(n_pos, n_neg, frac, seed):
    y = np.array([1] * n_pos + [0] * n_neg)
    np.random.default_rng(seed).shuffle(y)
    train, test = stratified_split(y, frac, seed)
    for label, count in ((1, n_pos), (0, n_neg)):
        assert abs(np.sum(y[test] == label) - frac * count) <= 1


def test_persistence_round_trip():
    corpus = random_corpus(12, 3)
    ds = build_scenario(corpus, scenario_by_id("S4"), seed=5)
    back = read_feature_csv(ds.to_csv())
    assert np.array_equal(np.vstack([fv.values for fv, _ in back]), ds.X)
    assert [y for _, y in back] == ds.y.tolist()
    lines = ds.split_sidecar().splitlines()
    assert lines[0] == "test_row"
    assert [int(v) for v in lines[1:]] == ds.test.tolist()
