import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import ode_anneal, path3, single, subspace
from rydmis.anneal import (
    DegenerateFitError,
    TMaxExceeded,
    approximation_ratio,
    extract_t_lz,
    fit_landau_zener,
    hardness_sweep,
    instance_seed,
    lz_protocol,
    mis_probability,
    run_qaa,
    sweep_instance,
)
from rydmis.udgraph import generate_random_udgraph


def test_single_vertex_qaa():
    b, h = subspace(single())
    res = run_qaa(b, h, 1.0, 6.0, 100.0)
    ref = abs(ode_anneal(h, 1.0, 6.0, 100.0)[1]) ** 2
    assert res.p_mis >= 0.99
    assert res.approx_ratio == pytest.approx(res.p_mis, abs=1e-14)
    assert res.p_mis == pytest.approx(ref, abs=1e-8)


def test_short_sweep_stays_empty():
    b, h = subspace(path3())
    res = run_qaa(b, h, 1.0, 6.0, 1e-6)
    assert abs(res.final_state[0]) ** 2 > 1 - 1e-9
    assert res.p_mis < 1e-9 and res.approx_ratio < 1e-9


def test_path3_qaa():
    b, h = subspace(path3())
    res = run_qaa(b, h, 1.0, 6.0, 200.0)
    assert res.p_mis >= 0.99
    assert b.states[b.mis_indices()].tolist() == [5]


def test_degenerate_mis_summed():
    # two disjoint edges: four maximum sets of size 2
    from rydmis.udgraph import Graph

    b, h = subspace(Graph.from_edges(4, [(0, 1), (2, 3)]))
    assert len(b.mis_indices()) == 4
    psi = np.zeros(b.dim)
    psi[b.mis_indices()] = 0.5
    assert mis_probability(psi, b) == pytest.approx(1.0)
    assert approximation_ratio(psi, b) == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(3))
def test_probability_identities(seed):
    b, h = subspace(generate_random_udgraph(11, 1.0, seed))
    res = run_qaa(b, h, 1.0, 6.0, 8.0)
    probs = np.abs(res.final_state) ** 2
    rest = probs[b.sizes < b.mis_size].sum()
    assert res.p_mis + rest == pytest.approx(1.0, abs=1e-9)
    assert res.approx_ratio >= res.p_mis - 1e-9
    assert 0 <= res.approx_ratio <= 1 + 1e-12


def test_fit_synthetic_model():
    t, a, r2, ok, clamped = fit_landau_zener([5, 7.5, 10, 12.5], [1 - math.exp(0.2 - x / 7) for x in (5, 7.5, 10, 12.5)])
    assert t == pytest.approx(7, rel=1e-9) and a == pytest.approx(0.2, rel=1e-9)
    assert r2 == pytest.approx(1.0) and ok and not clamped


def test_protocol_synthetic():
    fit = lz_protocol(lambda T: 1 - math.exp(0.2 - T / 7))
    # first doubling with P > 0.9: T = 20 (P(10) = 0.71)
    assert fit.t_star == 20
    assert [p[0] for p in fit.fit_points] == [20, 30, 40, 50]
    assert fit.t_lz == pytest.approx(7, rel=1e-6) and fit.a == pytest.approx(0.2, rel=1e-6)
    assert fit.accepted


@given(st.floats(1.0, 200.0), st.floats(-1.0, 1.0))
def test_protocol_recovers_parameters(t_lz, a):
    fit = lz_protocol(lambda T: 1 - math.exp(a - T / t_lz), t_max=1e6)
    assert fit.t_lz == pytest.approx(t_lz, rel=1e-6)
    if not fit.clamped:
        assert fit.a == pytest.approx(a, rel=1e-6, abs=1e-9)
        assert fit.accepted


def test_protocol_t_max():
    with pytest.raises(TMaxExceeded):
        lz_protocol(lambda T: 0.5, t_max=100)


def test_degenerate_fit():
    with pytest.raises(DegenerateFitError):
        lz_protocol(lambda T: 1.0)


def test_clamp_flagged():
    t, a, r2, ok, clamped = fit_landau_zener([1, 2, 3, 4], [0.95, 0.999, 1.0, 1.0])
    assert clamped


def test_single_vertex_lz_against_oracle():
    b, h = subspace(single())
    fit = extract_t_lz(b, h, 1.0, 6.0)
    assert fit.t_star == 5.0 and fit.n_sweeps == 4
    oracle = [abs(ode_anneal(h, 1.0, 6.0, T)[1]) ** 2 for T in (5.0, 7.5, 10.0, 12.5)]
    for (T, p), q in zip(fit.fit_points, oracle):
        assert p == pytest.approx(q, abs=1e-9)
    t_ref, a_ref, r2_ref, ok_ref, _ = fit_landau_zener([5, 7.5, 10, 12.5], oracle)
    assert fit.t_lz == pytest.approx(t_ref, rel=1e-5)
    assert fit.r_squared == pytest.approx(r2_ref, abs=1e-6)
    # small timescale of order 1/omega0, but the four points are not log-linear
    assert 0.5 < fit.t_lz < 1.0
    assert fit.accepted == ok_ref is False


@pytest.mark.parametrize("seed", range(3))
def test_fit_points_monotone(seed):
    b, h = subspace(generate_random_udgraph(10, 1.0, 20 + seed))
    fit = extract_t_lz(b, h)
    assert fit.fit_points[0][1] <= fit.fit_points[-1][1] + 1e-2
    assert fit.fit_points[0][1] > 0.9


def test_instance_seed_stable():
    assert instance_seed(0, 12, 0.8, 3) == instance_seed(0, 12, 0.8, 3)
    assert instance_seed(0, 12, 0.8, 3) != instance_seed(0, 12, 0.8, 4)
    assert instance_seed(0, 12, 0.8, 3) != instance_seed(1, 12, 0.8, 3)


def test_sweep_instance_status_rows():
    r = sweep_instance(12, 1.0, 5, "p_mis_at_fixed_T", dim_cap=10)
    assert r.status == "dim_cap" and not r.usable
    r = sweep_instance(4, 9.0, 5, "t_lz")
    assert r.status == "invalid_instance"
    r = sweep_instance(10, 1.0, 5, "t_lz", t_max=5.0)
    assert r.status == "t_max_exceeded"
    with pytest.raises(ValueError):
        sweep_instance(4, 1.0, 5, "bogus")


def test_sweep_single_vertex_matches_extract():
    table = hardness_sweep([1], [1.0], 2, "t_lz")
    b, h = subspace(single())
    fit = extract_t_lz(b, h)
    assert all(r.t_lz == pytest.approx(fit.t_lz, rel=1e-12) for r in table.records)
    # rejected fits are excluded from the median
    cell = table.cell(1, 1.0)
    assert cell.n_skipped == 2 and math.isnan(cell.median)


def test_sweep_empty_rho_list():
    t = hardness_sweep([8], [], 3, "p_mis_at_fixed_T")
    assert t.records == [] and t.cells == []


def test_sweep_deterministic_and_sorted():
    a = hardness_sweep([6, 8], [1.0, 2.0], 3, "approx_ratio_at_fixed_T", fixed_T=5.0, master_seed=4)
    b = hardness_sweep([6, 8], [1.0, 2.0], 3, "approx_ratio_at_fixed_T", fixed_T=5.0, master_seed=4)
    strip = lambda t: [r.__dict__ | {"wall_time_s": 0} for r in t.records]  # noqa: E731
    assert strip(a) == strip(b)
    keys = [(r.n, r.rho, r.seed) for r in a.records]
    assert keys == sorted(keys)
    for c in a.cells:
        vals = sorted(r.approx_ratio for r in a.records if (r.n, r.rho) == (c.n, c.rho))
        assert c.median == pytest.approx(float(np.median(vals)))


def test_sweep_p_mis_direction_small():
    # easy/hard direction on a size where the high-density cell is not trivially complete
    t = hardness_sweep([16], [0.8, 3.0], 10, "p_mis_at_fixed_T", fixed_T=10.0)
    assert t.cell(16, 0.8).median > t.cell(16, 3.0).median
