import csv

import numpy as np
import pytest
from scipy import stats as sps

from modsel import ModelSpec, UncertaintySet, UtilitySpec, ValidationError, solve
from modsel.diagnostics import exact_terminal_distribution
from modsel.dp import PolicyTable
from modsel.simulate import (
    SimIOError,
    SimulationConfig,
    export_histogram,
    run_rng,
    simulate_many,
    simulate_once,
)

ID = UtilitySpec.identity()


def optimal(model, p, u=ID):
    return solve(model, u, UncertaintySet.singleton(p)).policy


def test_no_defects_gives_perfect_reliability():
    model = ModelSpec.of((0, 0), (0.3, 0.2), 4)
    pol = optimal(model, (0.5, 0.5))
    for seed in range(5):
        x, r = simulate_once(model, pol, run_rng(seed, 0), (0.5, 0.5))
        assert x == (0, 0) and r == 1.0


def test_single_bernoulli_frequency():
    model = ModelSpec.of((1,), (0.99,), 1)
    st = simulate_many(model, PolicyTable(np.zeros((1, 2), dtype=np.int16)), SimulationConfig(100_000, 7, (1.0,)))
    freq = st.terminal_state_counts[(0,)] / st.runs
    assert abs(freq - 0.99) <= 0.005


def test_same_seed_same_trajectory(risk_model):
    pol = optimal(risk_model, (0.4, 0.6), UtilitySpec.exponential(1.0))
    a = simulate_once(risk_model, pol, run_rng(123, 4), (0.4, 0.6))
    b = simulate_once(risk_model, pol, run_rng(123, 4), (0.4, 0.6))
    assert a == b


def test_results_do_not_depend_on_workers(risk_model):
    pol = optimal(risk_model, (0.4, 0.6))
    cfg = SimulationConfig(2_000, 99, (0.4, 0.6))
    one = simulate_many(risk_model, pol, cfg, workers=1)
    three = simulate_many(risk_model, pol, cfg, workers=3)
    again = simulate_many(risk_model, pol, cfg, workers=1)
    for other in (three, again):
        assert one.mean == other.mean and one.variance == other.variance
        assert np.array_equal(one.counts, other.counts)
        assert np.array_equal(one.reliabilities, other.reliabilities)
        assert one.terminal_state_counts == other.terminal_state_counts


def test_stats_invariants(risk_model):
    st = simulate_many(risk_model, optimal(risk_model, (0.4, 0.6)), SimulationConfig(500, 3, (0.4, 0.6), 20))
    assert st.counts.sum() == 500
    assert sum(st.terminal_state_counts.values()) == 500
    assert 0 <= st.mean <= 1 and st.variance >= 0
    assert len(st.bin_edges) == 21 and st.bin_edges[0] == 0 and st.bin_edges[-1] == 1
    assert st.variance == pytest.approx(np.var(st.reliabilities), rel=1e-12)


@pytest.mark.parametrize(
    "N,theta,T,choice",
    [
        ((3,), (0.4,), 2, None),
        ((2, 3), (0.5, 0.3), 2, None),
        ((3, 2), (0.25, 0.6), 2, "alt"),
        ((1, 1, 2), (0.5, 0.3, 0.4), 2, None),
    ],
)
def test_terminal_distribution_chi_square(N, theta, T, choice):
    model = ModelSpec.of(N, theta, T)
    m = len(N)
    if choice == "alt":
        C = np.zeros((T, *model.shape), dtype=np.int16)
        C[1] = 1
        pol = PolicyTable(C)
    else:
        pol = optimal(model, np.full(m, 1 / m))
    exact = exact_terminal_distribution(model, pol)
    runs = 20_000
    st = simulate_many(model, pol, SimulationConfig(runs, 2024, tuple(np.full(m, 1 / m))))
    assert set(st.terminal_state_counts) <= set(exact)
    # pool cells with small expected counts into one
    keys = sorted(exact)
    obs, exp, pool_o, pool_e = [], [], 0, 0.0
    for k in keys:
        e = exact[k] * runs
        o = st.terminal_state_counts.get(k, 0)
        if e < 5:
            pool_o += o
            pool_e += e
        else:
            obs.append(o)
            exp.append(e)
    if pool_e > 0:
        obs.append(pool_o)
        exp.append(pool_e)
    exp = np.array(exp) * runs / np.sum(exp)
    if len(obs) > 1:
        assert sps.chisquare(obs, exp).pvalue > 0.001


@pytest.mark.slow
def test_mean_within_four_standard_errors_over_seeds():
    model = ModelSpec.of((10, 8), (0.2, 0.3), 6)
    p = (0.4, 0.6)
    rep = solve(model, ID, UncertaintySet.singleton(p))
    hits = 0
    for seed in range(100):
        st = simulate_many(model, rep.policy, SimulationConfig(400, seed, p))
        hits += abs(st.mean - rep.value_at_start) <= 4 * st.std_error
    assert hits >= 99


def test_single_run_histogram_has_one_bin(tmp_path, risk_model):
    st = simulate_many(risk_model, optimal(risk_model, (0.4, 0.6)), SimulationConfig(1, 1, (0.4, 0.6)))
    assert np.count_nonzero(st.counts) == 1


def test_perfect_reliability_lands_in_last_bin(tmp_path):
    model = ModelSpec.of((0, 0), (0.3, 0.2), 2)
    st = simulate_many(model, optimal(model, (0.5, 0.5)), SimulationConfig(10, 1, (0.5, 0.5)))
    assert st.counts[-1] == 10
    path = export_histogram(st, tmp_path / "h.csv")
    rows = list(csv.DictReader(open(path)))
    assert int(rows[-1]["count"]) == 10 and float(rows[-1]["frequency"]) == 1.0


def test_histogram_csv_reaggregates_mean(tmp_path, risk_model):
    pol = optimal(risk_model, (0.4, 0.6), UtilitySpec.exponential(0.001))
    st = simulate_many(risk_model, pol, SimulationConfig(10_000, 20131015, (0.4, 0.6)))
    path = export_histogram(st, tmp_path / "h.csv", header="seed=20131015")
    lines = open(path).read().splitlines()
    assert lines[0] == "# seed=20131015"
    rows = list(csv.DictReader(lines[1:]))
    assert len(rows) == 50
    assert [k for k in rows[0]] == ["bin_lo", "bin_hi", "count", "frequency"]
    mids = np.array([(float(r["bin_lo"]) + float(r["bin_hi"])) / 2 for r in rows])
    freq = np.array([float(r["frequency"]) for r in rows])
    assert sum(int(r["count"]) for r in rows) == 10_000
    assert abs(np.dot(mids, freq) - st.mean) <= 1 / 50
    # bit-stable rewrite
    again = export_histogram(st, tmp_path / "h2.csv", header="seed=20131015")
    assert open(again).read() == open(path).read()


def test_histogram_io_error(tmp_path, risk_model):
    st = simulate_many(risk_model, optimal(risk_model, (0.4, 0.6)), SimulationConfig(3, 1, (0.4, 0.6)))
    with pytest.raises(SimIOError) as ei:
        export_histogram(st, tmp_path / "missing" / "h.csv")
    assert "missing" in str(ei.value.path)


def test_config_validation(risk_model):
    with pytest.raises(ValidationError):
        SimulationConfig(0, 1, (0.4, 0.6))
    with pytest.raises(ValidationError):
        SimulationConfig(10, -1, (0.4, 0.6))
    with pytest.raises(ValidationError):
        SimulationConfig(10, 1, (0.4, 0.7))
    with pytest.raises(ValidationError):
        simulate_many(risk_model, optimal(risk_model, (0.4, 0.6)), SimulationConfig(10, 1, (0.2, 0.3, 0.5)))
