import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import chisquare

from conftest import path3, single, subspace
from rydmis.measure import (
    HISTORY_COLUMNS,
    M_MIN,
    MeasurementLog,
    average_curves,
    best_is_curve,
    estimate_objective,
    experiment_rngs,
    run_noisy_qaa_experiment,
    run_noisy_qaoa_experiment,
    sample_measurement,
    write_history_csv,
)
from rydmis.qaoa import QAOAParams, qaoa_state
from rydmis.udgraph import generate_random_udgraph


def plus_state():
    return np.array([1.0, 1.0]) / math.sqrt(2)


# -- single shots ---------------------------------------------------------------


def test_sample_basis_state(rng):
    b, _ = subspace(path3())
    psi = np.zeros(5)
    psi[4] = 1.0
    rec = sample_measurement(psi, b, rng)
    assert rec.outcome == 0b101 and rec.is_size == 2 and rec.vertices == [0, 2]
    assert rec.sequence_index == 1


def test_sample_unnormalised_state(rng):
    b, _ = subspace(single())
    assert sample_measurement(np.array([0.0, 3.0]), b, rng).outcome == 1
    with pytest.raises(ValueError):
        sample_measurement(np.zeros(2), b, rng)


def test_born_chi_square_path3(rng):
    b, _ = subspace(path3())
    amp = np.array([0.1, 0.5, 0.3j, 0.6, -0.4])
    probs = np.abs(amp) ** 2 / np.sum(np.abs(amp) ** 2)
    index = {int(s): i for i, s in enumerate(b.states)}
    counts = np.zeros(5)
    for _ in range(10_000):
        counts[index[sample_measurement(amp, b, rng).outcome]] += 1
    assert chisquare(counts, probs * 10_000).pvalue > 1e-3


@pytest.mark.parametrize("seed", range(3))
def test_born_chi_square_random_states(seed):
    b, h = subspace(generate_random_udgraph(8, 1.2, seed))
    assert b.dim <= 50
    r = np.random.default_rng(seed)
    psi = qaoa_state(b, h, QAOAParams((0.7,), (0.9, 0.4)))
    probs = np.abs(psi) ** 2
    index = {int(s): i for i, s in enumerate(b.states)}
    counts = np.zeros(b.dim)
    for _ in range(10_000):
        counts[index[sample_measurement(psi, b, r).outcome]] += 1
    # pool outcomes with small expected counts so the chi-square approximation holds
    expected = probs * 10_000
    keep = expected >= 5
    obs = np.append(counts[keep], counts[~keep].sum())
    exp = np.append(expected[keep], expected[~keep].sum())
    if exp[-1] < 5:
        obs[-2] += obs[-1]
        exp[-2] += exp[-1]
        obs, exp = obs[:-1], exp[:-1]
    assert chisquare(obs, exp * obs.sum() / exp.sum()).pvalue > 1e-3


# -- objective estimates -------------------------------------------------------------


def test_deterministic_state_uses_floor(rng):
    b, _ = subspace(path3())
    psi = np.zeros(5)
    psi[4] = 1.0
    est = estimate_objective(psi, b, 0.05, rng)
    assert est.m_used == M_MIN == 10 and est.sem == 0 and est.mean == -2 and not est.capped


def test_huge_eps_uses_floor(rng):
    b, _ = subspace(single())
    est = estimate_objective(plus_state(), b, 1e6, rng)
    assert est.m_used == 10


def test_sample_count_scales_with_variance():
    # variance 1/4 and eps 0.05 need about (0.5 / 0.05)^2 = 100 shots
    b, _ = subspace(single())
    r = np.random.default_rng(5)
    used = [estimate_objective(plus_state(), b, 0.05, r).m_used for _ in range(100)]
    assert 50 <= np.median(used) <= 200
    assert min(used) >= 10


def test_estimate_unbiased():
    b, h = subspace(path3())
    psi = qaoa_state(b, h, QAOAParams((0.4,), (0.8, 0.5)))
    truth = -float(np.abs(psi) ** 2 @ b.sizes)
    r = np.random.default_rng(9)
    ests = [estimate_objective(psi, b, 0.05, r) for _ in range(200)]
    mean = np.mean([e.mean for e in ests])
    pooled = math.sqrt(sum(e.sem ** 2 for e in ests)) / len(ests)
    assert abs(mean - truth) <= 4 * pooled


def test_budget_cap_flagged(rng):
    b, _ = subspace(single())
    est = estimate_objective(plus_state(), b, 1e-4, rng, budget_cap=25)
    assert est.capped and est.m_used == 25
    log = MeasurementLog(budget=7)
    est = estimate_objective(plus_state(), b, 1e-4, rng, log=log)
    assert est.capped and est.m_used == 7 and len(log.records) == 7 and log.remaining == 0


def test_eps_validation(rng):
    b, _ = subspace(single())
    with pytest.raises(ValueError):
        estimate_objective(plus_state(), b, 0.0, rng)


def test_log_counts_every_shot(rng):
    b, _ = subspace(single())
    log = MeasurementLog()
    est = estimate_objective(plus_state(), b, 0.1, rng, log=log, tag="x", level=4)
    assert len(log.records) == est.m_used
    assert [r.sequence_index for r in log.records] == list(range(1, est.m_used + 1))
    assert all(r.phase_tag == "x" and r.level_p == 4 for r in log.records)


# -- curves ------------------------------------------------------------------------


@given(st.lists(st.integers(0, 6), min_size=1, max_size=60))
def test_best_curve_monotone(sizes):
    from rydmis.measure import MeasurementRecord

    hist = [MeasurementRecord(0, s, i + 1) for i, s in enumerate(sizes)]
    c = best_is_curve(hist)
    assert len(c) == len(sizes) and np.all(np.diff(c) >= 0)
    assert c[-1] == max(sizes) and c[0] == sizes[0]


def test_average_curves_extends_short_curves():
    out = average_curves([np.array([1, 2]), np.array([0, 1, 3, 3])])
    np.testing.assert_allclose(out, [0.5, 1.5, 2.5, 2.5])
    assert len(average_curves([])) == 0
    np.testing.assert_allclose(average_curves([np.array([1, 2, 3])], length=2), [1, 2])


# -- closed loops ------------------------------------------------------------------


def test_noisy_qaoa_single_vertex(rng):
    res = run_noisy_qaoa_experiment(single(), rng, 500)
    assert len(res.history) == 500
    assert res.measurements_to_mis is not None and res.measurements_to_mis <= 100
    assert res.best_curve[-1] == 1


def test_noisy_qaoa_tiny_budget(rng):
    res = run_noisy_qaoa_experiment(path3(), rng, 10)
    assert len(res.history) == 10 and res.budget_exhausted
    with pytest.raises(ValueError):
        run_noisy_qaoa_experiment(path3(), rng, 0)


def test_noisy_qaoa_deterministic():
    g = generate_random_udgraph(8, 1.5, 2)
    a = run_noisy_qaoa_experiment(g, np.random.default_rng(3), 400)
    b = run_noisy_qaoa_experiment(g, np.random.default_rng(3), 400)
    assert a.history == b.history


@pytest.mark.parametrize("mode", ["heuristic", "random"])
def test_noisy_qaoa_curve_bounded(mode):
    g = generate_random_udgraph(9, 2.0, 4)
    res = run_noisy_qaoa_experiment(g, np.random.default_rng(1), 600, seed_mode=mode)
    c = res.best_curve
    assert np.all(np.diff(c) >= 0) and c[-1] <= res.mis_size
    assert [r.sequence_index for r in res.history] == list(range(1, len(res.history) + 1))


def test_noisy_qaoa_validation(rng):
    with pytest.raises(ValueError):
        run_noisy_qaoa_experiment(path3(), rng, 100, seed_mode="bogus")
    with pytest.raises(ValueError):
        run_noisy_qaoa_experiment(path3(), rng, 100, p_start=2)


def test_noisy_qaa_single_vertex(rng):
    res = run_noisy_qaa_experiment(single(), 100.0, 200, rng)
    assert len(res.history) == 200
    assert sum(r.is_size for r in res.history) >= 190


def test_noisy_qaa_zero_time_stays_empty(rng):
    res = run_noisy_qaa_experiment(path3(), 0.0, 50, rng)
    assert all(r.outcome == 0 for r in res.history)
    assert res.measurements_to_mis is None


def test_noisy_qaa_path3(rng):
    res = run_noisy_qaa_experiment(path3(), 200.0, 100, rng)
    assert sum(r.outcome == 0b101 for r in res.history) >= 95


def test_experiment_streams_independent():
    a = [r.random() for r in experiment_rngs(0, 3)]
    b = [r.random() for r in experiment_rngs(0, 3)]
    assert a == b and len(set(a)) == 3


def test_history_csv(rng):
    res = run_noisy_qaa_experiment(path3(), 200.0, 5, rng)
    buf = io.StringIO()
    write_history_csv(buf, [res, res])
    lines = buf.getvalue().splitlines()
    assert lines[0] == ",".join(HISTORY_COLUMNS)
    assert len(lines) == 11 and lines[-1].endswith(",1")
