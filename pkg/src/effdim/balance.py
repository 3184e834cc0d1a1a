"""Balance conditions between model noise and data noise.

For the isotropic family A = H = I, Q = qI, R = rI every criterion in
this package reduces to a scalar function g(q, r) compared against
c / sqrt(m) (the O(1) constant c defaults to 1):

    feasibility   g = (sqrt(q^2 + 4qr) - q) / 2          (per-component steady P)
    optimal       g = (sqrt(q^2 + 4qr) - q) / (2 (q+r))  (optimal-filter collapse)
    sir           g = (sqrt(q^2 + 4qr) + q) / (2 r)      (SIR-filter collapse)
    strong        g = s r / (s + r)                      (one-shot smoothing, prior s)

The filter criteria depend only on the ratio eps = q/r, so their level
sets are rays through the origin; the feasibility and strong criteria
are monotone in r, so their level sets are extracted by per-column
bisection.  ``max_dimension`` inverts g <= c/sqrt(m) for m.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np

from ._util import fmt17
from .model import LinearGaussianProblem, frobenius
from .kalman import DARE_MAX_ITER, DARE_TOL, solve_dare

LEVEL_TOL = 1e-7  # |g - level| guaranteed at emitted level-set points
DEFAULT_GRID_MIN = 1e-4
DEFAULT_GRID_MAX = 1e2
DEFAULT_GRID_POINTS = 200


class MapKind(str, enum.Enum):
    FEASIBILITY = "feasibility"
    OPTIMAL = "optimal"
    SIR = "sir"
    STRONG = "strong"


def _check_domain(q, r) -> None:
    if np.any(np.asarray(q) < 0):
        raise ValueError("q must be nonnegative")
    if np.any(np.asarray(r) <= 0):
        raise ValueError("r must be positive")


def _maybe_scalar(value, q, r):
    if np.ndim(q) == 0 and np.ndim(r) == 0:
        return float(value)
    return value


def g_feasibility(q, r):
    """Per-component steady posterior std scale; feasible when <= c/sqrt(m)."""
    _check_domain(q, r)
    qa = np.asarray(q, dtype=float)
    ra = np.asarray(r, dtype=float)
    den = np.sqrt(qa * qa + 4.0 * qa * ra) + qa
    out = np.divide(2.0 * qa * ra, den,
                    out=np.zeros(np.broadcast(qa, ra).shape), where=den > 0)
    return _maybe_scalar(out, q, r)


def g_optimal(q, r):
    """Collapse scale of the optimal particle filter; depends only on q/r."""
    _check_domain(q, r)
    qa = np.asarray(q, dtype=float)
    ra = np.asarray(r, dtype=float)
    den = (np.sqrt(qa * qa + 4.0 * qa * ra) + qa) * (qa + ra)
    out = np.divide(2.0 * qa * ra, den,
                    out=np.zeros(np.broadcast(qa, ra).shape), where=den > 0)
    return _maybe_scalar(out, q, r)


def g_sir(q, r):
    """Collapse scale of the SIR filter; depends only on q/r."""
    _check_domain(q, r)
    qa = np.asarray(q, dtype=float)
    ra = np.asarray(r, dtype=float)
    out = (np.sqrt(qa * qa + 4.0 * qa * ra) + qa) / (2.0 * ra)
    return _maybe_scalar(out, q, r)


def g_strong(sigma0, r):
    """One-data-set strong-constraint posterior scale sigma0 r/(sigma0 + r)."""
    if np.any(np.asarray(sigma0) <= 0):
        raise ValueError("sigma0 must be positive")
    if np.any(np.asarray(r) <= 0):
        raise ValueError("r must be positive")
    sa = np.asarray(sigma0, dtype=float)
    ra = np.asarray(r, dtype=float)
    return _maybe_scalar(sa * ra / (sa + ra), sigma0, r)


_G_FUNCS = {
    MapKind.FEASIBILITY: g_feasibility,
    MapKind.OPTIMAL: g_optimal,
    MapKind.SIR: g_sir,
    MapKind.STRONG: g_strong,
}

# Level sets of the filter criteria are rays; the others are monotone in r.
_RAY_KINDS = (MapKind.OPTIMAL, MapKind.SIR)


def max_dimension(eps: float, kind, constant: float = 1.0) -> float:
    """Largest state dimension for which the filter criterion holds at ratio eps.

    Solves g(eps, 1) <= constant / sqrt(m) for m.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    kind = MapKind(kind)
    if kind not in _RAY_KINDS:
        raise ValueError("max_dimension applies to the optimal and sir criteria")
    g = _G_FUNCS[kind](float(eps), 1.0)
    return (constant / g) ** 2


@dataclass(frozen=True)
class LevelSet:
    m: int
    level: float
    points: np.ndarray  # rows (q, r), each satisfying |g - level| <= LEVEL_TOL


@dataclass(frozen=True)
class BalanceMap:
    kind: MapKind
    q_grid: np.ndarray
    r_grid: np.ndarray
    values: np.ndarray  # shape (len(q_grid), len(r_grid))
    level_sets: list[LevelSet]


@dataclass(frozen=True)
class MaxDimCurve:
    eps_grid: np.ndarray
    m_max: np.ndarray
    kind: MapKind


def log_grid(lo: float = DEFAULT_GRID_MIN, hi: float = DEFAULT_GRID_MAX,
             n: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    if lo <= 0 or hi <= lo or n < 2:
        raise ValueError("need 0 < lo < hi and n >= 2")
    return np.logspace(np.log10(lo), np.log10(hi), n)


def _bisect_in_r(g, q: float, level: float, r_lo: float, r_hi: float):
    """Root of g(q, r) = level for g increasing in r, by log-space bisection."""
    g_lo = g(q, r_lo)
    g_hi = g(q, r_hi)
    if g_lo > level or g_hi < level:
        return None
    lo, hi = np.log(r_lo), np.log(r_hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(q, float(np.exp(mid))) < level:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    r = float(np.exp(0.5 * (lo + hi)))
    if abs(g(q, r) - level) > LEVEL_TOL:
        return None
    return r


def _bisect_in_eps(g, level: float, lo: float, hi: float, increasing: bool):
    """Root of g(eps, 1) = level on a monotone bracket, log-space bisection."""
    lo, hi = np.log(lo), np.log(hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        below = g(float(np.exp(mid)), 1.0) < level
        if below == increasing:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    eps = float(np.exp(0.5 * (lo + hi)))
    if abs(g(eps, 1.0) - level) > LEVEL_TOL:
        return None
    return eps


def _ray_roots(kind: MapKind, level: float) -> list[float]:
    """All eps with g(eps, 1) = level for the ray criteria."""
    g = _G_FUNCS[kind]
    lo, hi = 1e-14, 1e14
    if kind is MapKind.SIR:
        # strictly increasing in eps
        if not g(lo, 1.0) <= level <= g(hi, 1.0):
            return []
        root = _bisect_in_eps(g, level, lo, hi, increasing=True)
        return [root] if root is not None else []
    # optimal: unimodal with an interior peak; golden-section for the peak
    phi = 0.5 * (np.sqrt(5.0) - 1.0)
    a, b = np.log(lo), np.log(hi)
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    for _ in range(200):
        if g(float(np.exp(c)), 1.0) < g(float(np.exp(d)), 1.0):
            a = c
        else:
            b = d
        c = b - phi * (b - a)
        d = a + phi * (b - a)
    eps_peak = float(np.exp(0.5 * (a + b)))
    g_peak = g(eps_peak, 1.0)
    if level > g_peak + LEVEL_TOL:
        return []  # criterion holds for every ratio; no boundary
    if level >= g_peak - LEVEL_TOL:
        return [eps_peak]
    roots = []
    left = _bisect_in_eps(g, level, lo, eps_peak, increasing=True)
    right = _bisect_in_eps(g, level, eps_peak, hi, increasing=False)
    for root in (left, right):
        if root is not None:
            roots.append(root)
    return roots


def build_map(kind, q_grid, r_grid, dims, constant: float = 1.0) -> BalanceMap:
    """Evaluate the criterion on the grid and extract its c/sqrt(m) level sets."""
    kind = MapKind(kind)
    q_grid = np.asarray(q_grid, dtype=float)
    r_grid = np.asarray(r_grid, dtype=float)
    for name, grid in (("q_grid", q_grid), ("r_grid", r_grid)):
        if grid.size == 0:
            raise ValueError(f"{name} is empty")
        if np.any(grid <= 0):
            raise ValueError(f"{name} must be positive")
        if np.any(np.diff(grid) <= 0):
            raise ValueError(f"{name} must be strictly increasing")
    g = _G_FUNCS[kind]
    values = g(q_grid[:, None], r_grid[None, :])
    level_sets: list[LevelSet] = []
    for m in dims:
        level = constant / np.sqrt(m)
        if kind in _RAY_KINDS:
            for eps in _ray_roots(kind, level):
                q_pts = eps * r_grid
                keep = (q_pts >= q_grid[0]) & (q_pts <= q_grid[-1])
                if not np.any(keep):
                    continue
                points = np.column_stack([q_pts[keep], r_grid[keep]])
                level_sets.append(LevelSet(m=int(m), level=float(level),
                                           points=points))
        else:
            points = []
            for q in q_grid:
                r = _bisect_in_r(g, float(q), level, float(r_grid[0]),
                                 float(r_grid[-1]))
                if r is not None:
                    points.append((float(q), r))
            if points:
                level_sets.append(LevelSet(m=int(m), level=float(level),
                                           points=np.asarray(points)))
    return BalanceMap(kind=kind, q_grid=q_grid, r_grid=r_grid, values=values,
                      level_sets=level_sets)


def build_max_dim_curve(eps_grid, kind, constant: float = 1.0) -> MaxDimCurve:
    kind = MapKind(kind)
    eps_grid = np.asarray(eps_grid, dtype=float)
    m_max = np.array([max_dimension(float(e), kind, constant)
                      for e in eps_grid])
    return MaxDimCurve(eps_grid=eps_grid, m_max=m_max, kind=kind)


@dataclass(frozen=True)
class ConditionCheck:
    name: str
    lhs: float
    rhs: float
    holds: bool


@dataclass(frozen=True)
class SufficientConditions:
    feasibility: ConditionCheck
    optimal_filter: ConditionCheck
    sir_filter: ConditionCheck
    eff_dim: float


def general_sufficient_conditions(problem: LinearGaussianProblem,
                                  constant: float = 1.0,
                                  tol: float = DARE_TOL,
                                  max_iter: int = DARE_MAX_ITER
                                  ) -> SufficientConditions:
    """Evaluate the three Frobenius-norm balance inequalities for any (A,Q,H,R).

    feasibility:  ||P||_F <= c
    optimal:      ||A||_F^2 ||H||_F^2 ||P||_F <= ||H||_F^2 ||Q||_F + ||R||_F
    sir:          ||H||_F^2 (||Q||_F + ||A||_F^2 ||P||_F) <= ||R||_F

    P is the steady-state posterior covariance; DARE failures propagate.
    """
    state = solve_dare(problem, tol=tol, max_iter=max_iter)
    p_f = state.eff_dim
    a2 = frobenius(problem.A) ** 2
    h2 = frobenius(problem.H) ** 2
    q_f = frobenius(problem.Q)
    r_f = frobenius(problem.R)
    feas = ConditionCheck("feasibility", p_f, constant, p_f <= constant)
    opt_lhs = a2 * h2 * p_f
    opt_rhs = h2 * q_f + r_f
    opt = ConditionCheck("optimal_filter", opt_lhs, opt_rhs, opt_lhs <= opt_rhs)
    sir_lhs = h2 * (q_f + a2 * p_f)
    sir = ConditionCheck("sir_filter", sir_lhs, r_f, sir_lhs <= r_f)
    return SufficientConditions(feasibility=feas, optimal_filter=opt,
                                sir_filter=sir, eff_dim=p_f)


# ---------------------------------------------------------------------------
# Export: CSV carries the grid (columns q, r, g), JSON the level-set polylines.

def map_to_csv(bm: BalanceMap) -> str:
    lines = ["q,r,g"]
    for i, q in enumerate(bm.q_grid):
        for j, r in enumerate(bm.r_grid):
            lines.append(f"{fmt17(q)},{fmt17(r)},{fmt17(bm.values[i, j])}")
    return "\n".join(lines) + "\n"


def map_to_dict(bm: BalanceMap) -> dict:
    return {
        "kind": bm.kind.value,
        "q_grid": bm.q_grid.tolist(),
        "r_grid": bm.r_grid.tolist(),
        "values": bm.values.tolist(),
        "level_sets": [
            {"m": ls.m, "level": ls.level, "points": ls.points.tolist()}
            for ls in bm.level_sets
        ],
    }


def map_to_json(bm: BalanceMap, indent: int = 2) -> str:
    return json.dumps(map_to_dict(bm), indent=indent)


def curve_to_csv(curve: MaxDimCurve) -> str:
    lines = ["eps,m_max"]
    for eps, m in zip(curve.eps_grid, curve.m_max):
        lines.append(f"{fmt17(eps)},{fmt17(m)}")
    return "\n".join(lines) + "\n"


def curve_to_dict(curve: MaxDimCurve) -> dict:
    return {"kind": curve.kind.value, "eps_grid": curve.eps_grid.tolist(),
            "m_max": curve.m_max.tolist()}


def conditions_to_dict(conds: SufficientConditions) -> dict:
    def one(c: ConditionCheck) -> dict:
        return {"lhs": c.lhs, "rhs": c.rhs, "holds": c.holds}

    return {
        "eff_dim": conds.eff_dim,
        "feasibility": one(conds.feasibility),
        "optimal_filter": one(conds.optimal_filter),
        "sir_filter": one(conds.sir_filter),
    }
