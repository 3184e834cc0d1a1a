import numpy as np
import pytest

from effdim.balance import (MapKind, build_map, build_max_dim_curve,
                            curve_to_csv, g_feasibility, g_optimal, g_sir,
                            g_strong, general_sufficient_conditions, log_grid,
                            map_to_csv, map_to_dict, max_dimension)
from effdim.kalman import isotropic_steady_p
from effdim.model import LinearGaussianProblem

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def test_g_feasibility_values():
    assert g_feasibility(1.0, 1.0) == pytest.approx(GOLDEN, abs=1e-14)
    assert g_feasibility(0.0, 5.0) == 0.0
    # same function as the isotropic steady variance
    for q, r in ((0.3, 2.0), (10.0, 0.01), (1e-4, 1e2)):
        assert g_feasibility(q, r) == pytest.approx(isotropic_steady_p(q, r),
                                                    rel=1e-14)


def test_g_feasibility_boundary_identity():
    # level g = L inverts to r = L + L^2/q; at L = 0.1 (m = 100)
    for q in (0.01, 1.0, 100.0):
        r = 0.1 + 1.0 / (100.0 * q)
        assert g_feasibility(q, r) == pytest.approx(0.1, abs=1e-12)


def test_g_optimal_values():
    assert g_optimal(1.0, 1.0) == pytest.approx((np.sqrt(5) - 1) / 4,
                                                abs=1e-14)
    assert g_optimal(0.0, 2.0) == 0.0
    assert g_optimal(2.0, 3.0) == pytest.approx(g_optimal(20.0, 30.0),
                                                abs=1e-12)


def test_g_sir_values():
    assert g_sir(1.0, 1.0) == pytest.approx((np.sqrt(5) + 1) / 2, abs=1e-14)
    assert g_sir(0.0, 1.0) == 0.0
    assert g_sir(1e-4, 1.0) == pytest.approx(0.0100504, abs=5e-7)


def test_g_domain_errors():
    for g in (g_feasibility, g_optimal, g_sir):
        with pytest.raises(ValueError):
            g(-1.0, 1.0)
        with pytest.raises(ValueError):
            g(1.0, 0.0)
    with pytest.raises(ValueError):
        g_strong(0.0, 1.0)


def test_filter_criteria_scale_invariance():
    rng = np.random.default_rng(8)
    for _ in range(50):
        q = float(10 ** rng.uniform(-4, 2))
        r = float(10 ** rng.uniform(-4, 2))
        c = float(10 ** rng.uniform(-2, 2))
        assert g_optimal(q, r) == pytest.approx(g_optimal(c * q, c * r),
                                                rel=1e-12)
        assert g_sir(q, r) == pytest.approx(g_sir(c * q, c * r), rel=1e-12)


def test_g_optimal_below_g_sir_on_log_grid():
    grid = np.logspace(-4, 2, 30)
    for q in grid:
        for r in grid:
            assert g_optimal(q, r) <= g_sir(q, r) + 1e-15


def test_g_feasibility_monotone_in_q_and_r():
    grid = np.logspace(-4, 2, 25)
    V = g_feasibility(grid[:, None], grid[None, :])
    assert np.all(np.diff(V, axis=0) > 0)  # increasing in q
    assert np.all(np.diff(V, axis=1) > 0)  # increasing in r


def test_max_dimension_values():
    assert max_dimension(1.0, MapKind.OPTIMAL) == pytest.approx(10.47,
                                                                abs=0.01)
    assert max_dimension(1.0, MapKind.SIR) == pytest.approx(0.382, abs=0.001)
    assert max_dimension(100.0, MapKind.OPTIMAL) == pytest.approx(1.04e4,
                                                                  rel=0.01)
    with pytest.raises(ValueError):
        max_dimension(0.0, MapKind.OPTIMAL)
    with pytest.raises(ValueError):
        max_dimension(1.0, MapKind.FEASIBILITY)


def test_max_dimension_optimal_dominates_sir():
    for eps in np.logspace(-3, 3, 25):
        assert (max_dimension(float(eps), MapKind.OPTIMAL)
                >= max_dimension(float(eps), MapKind.SIR))


def test_max_dim_curve_unimodal_reciprocal():
    curve = build_max_dim_curve(np.logspace(-4, 4, 200), MapKind.OPTIMAL)
    assert np.all(curve.m_max > 0)
    recip = 1.0 / curve.m_max
    peak = int(np.argmax(recip))
    assert 0 < peak < len(recip) - 1
    assert np.all(np.diff(recip[:peak + 1]) > 0)
    assert np.all(np.diff(recip[peak:]) < 0)
    # large m_max toward both ends
    assert curve.m_max[0] > 100 and curve.m_max[-1] > 100


def test_build_map_feasibility_level_sets():
    grid = log_grid(1e-4, 1e2, 120)
    bm = build_map(MapKind.FEASIBILITY, grid, grid, dims=[5, 10, 100])
    assert bm.values.shape == (120, 120)
    assert np.all(bm.values >= 0)
    assert {ls.m for ls in bm.level_sets} == {5, 10, 100}
    for ls in bm.level_sets:
        level = 1.0 / np.sqrt(ls.m)
        for q, r in ls.points:
            assert abs(g_feasibility(q, r) - level) <= 1e-6


def test_build_map_optimal_rays_are_straight():
    grid = log_grid(1e-4, 1e2, 80)
    bm = build_map(MapKind.OPTIMAL, grid, grid, dims=[100])
    assert bm.level_sets, "m=100 must intersect the optimal criterion"
    for ls in bm.level_sets:
        q = ls.points[:, 0]
        r = ls.points[:, 1]
        slope = q / r
        assert np.ptp(slope) <= 1e-8 * slope[0]  # a ray through the origin
        for qi, ri in ls.points:
            assert abs(g_optimal(qi, ri) - ls.level) <= 1e-6


def test_build_map_optimal_no_level_set_below_peak():
    # the optimal criterion peaks at 1/3 (eps = 1/2); m = 5 gives
    # 1/sqrt(5) ~ 0.447 > 1/3, so no boundary exists
    grid = log_grid(1e-3, 1e3, 50)
    bm = build_map(MapKind.OPTIMAL, grid, grid, dims=[5])
    assert bm.level_sets == []


def test_build_map_sir_inside_optimal_region():
    grid = log_grid(1e-4, 1e2, 60)
    sir = build_map(MapKind.SIR, grid, grid, dims=[100])
    opt = build_map(MapKind.OPTIMAL, grid, grid, dims=[100])
    level = 0.1
    inside_sir = sir.values <= level
    assert inside_sir.any()
    assert np.all(opt.values[inside_sir] <= level)


def test_build_map_strong_kind():
    grid = log_grid(1e-3, 1e3, 60)
    bm = build_map(MapKind.STRONG, grid, grid, dims=[10, 100])
    assert g_strong(1.0, 1.0) == 0.5
    assert g_strong(2.0, 3.0) == g_strong(3.0, 2.0)
    for ls in bm.level_sets:
        for s, r in ls.points:
            assert abs(g_strong(s, r) - ls.level) <= 1e-6
    # m = 100: level 0.1 passes through (0.2, 0.2)
    assert g_strong(0.2, 0.2) == pytest.approx(0.1, abs=1e-15)


def test_build_map_validates_grids():
    with pytest.raises(ValueError):
        build_map(MapKind.FEASIBILITY, np.array([]), np.array([1.0]), [5])
    with pytest.raises(ValueError):
        build_map(MapKind.FEASIBILITY, np.array([1.0, 0.5]),
                  np.array([1.0, 2.0]), [5])
    with pytest.raises(ValueError):
        build_map(MapKind.FEASIBILITY, np.array([-1.0, 1.0]),
                  np.array([1.0, 2.0]), [5])


def test_general_conditions_small_q():
    problem = LinearGaussianProblem.isotropic(2, 1e-3, 1.0)
    conds = general_sufficient_conditions(problem)
    assert conds.optimal_filter.holds
    assert conds.feasibility.holds


def test_general_conditions_zero_q_trivial():
    problem = LinearGaussianProblem.isotropic(3, 0.0, 1.0)
    conds = general_sufficient_conditions(problem, tol=1e-8)
    assert conds.optimal_filter.holds
    assert conds.optimal_filter.lhs == pytest.approx(0.0, abs=1e-2)


def test_general_conditions_sir_unrealistic_at_unit_noise():
    problem = LinearGaussianProblem.isotropic(100, 1.0, 1.0)
    conds = general_sufficient_conditions(problem)
    assert not conds.sir_filter.holds
    # lhs = m(q sqrt(m) + m ||P||_F), rhs = sqrt(m) r
    assert conds.sir_filter.lhs > conds.sir_filter.rhs


def test_map_exports():
    grid = log_grid(1e-2, 1e2, 10)
    bm = build_map(MapKind.FEASIBILITY, grid, grid, dims=[10])
    csv = map_to_csv(bm)
    lines = csv.strip().split("\n")
    assert lines[0] == "q,r,g"
    assert len(lines) == 1 + 100
    q, r, g = (float(tok) for tok in lines[1].split(","))
    assert g == pytest.approx(g_feasibility(q, r), rel=1e-15)
    doc = map_to_dict(bm)
    assert doc["kind"] == "feasibility"
    assert doc["level_sets"][0]["m"] == 10
    curve = build_max_dim_curve(grid, MapKind.SIR)
    lines = curve_to_csv(curve).strip().split("\n")
    assert lines[0] == "eps,m_max"
    assert len(lines) == 11
