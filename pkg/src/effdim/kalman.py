"""Kalman covariance recursion, steady state, and the effective dimension.

The posterior covariance of the state given all data so far evolves as

    X[n]   = A P[n] A' + Q
    K[n]   = X[n] H' (H X[n] H' + R)^{-1}
    P[n+1] = (I - K[n] H) X[n]

For detectable/stabilizable problems the recursion reaches a steady state
P, with prior X solving the discrete algebraic Riccati equation.  The
Frobenius norm ||P||_F is the effective dimension of the assimilation
problem: it controls the radius and thickness of the shell on which
posterior samples concentrate (see :func:`spread_stats`).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .model import (LinearGaussianProblem, SymMatrix, as_matrix, frobenius,
                    sym)

DARE_TOL = 1e-10
DARE_MAX_ITER = 100_000
INNOVATION_COND_LIMIT = 1e14


class DareConvergenceError(RuntimeError):
    """Fixed-point iteration failed to reach the requested tolerance.

    Operationally this is the signal for an undetectable or
    unstabilizable (A, Q, H) combination; no algebraic pre-check is done.
    """

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class SteadyState:
    """Converged covariances: DARE solution X, gain K, posterior P.

    ``eff_dim`` is ||P||_F; ``residual`` the final Frobenius change of
    the fixed-point iteration.
    """

    X: SymMatrix
    K: np.ndarray
    P: SymMatrix
    eff_dim: float
    iterations: int
    residual: float


@dataclass(frozen=True)
class SpreadStats:
    """Shell statistics of samples drawn from N(mu, P).

    With eigenvalues lam_j of P, the squared distance y = |x - mu|^2 has
    mean sum(lam) and variance 2 sum(lam^2); the distance r = sqrt(y)
    concentrates at radius e_hat with thickness v_hat:

        e_hat = (4 (sum lam)^2 - 2 sum lam^2) / (4 (sum lam)^1.5)
        v_hat = sum lam^2 / (2 sum lam)
    """

    eigenvalues: np.ndarray
    mean_y: float
    var_y: float
    e_hat: float
    v_hat: float


def _innovation_inverse(S: np.ndarray):
    """Inverse of the innovation covariance via symmetric factorization."""
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    if w[0] <= 0.0 or w[-1] / w[0] > INNOVATION_COND_LIMIT:
        raise np.linalg.LinAlgError("innovation covariance singular")
    return (V / w) @ V.T


def kalman_cov_step(problem: LinearGaussianProblem, P_n) -> SymMatrix:
    """One covariance update P[n] -> P[n+1]; the result is symmetrized."""
    P = as_matrix(P_n)
    A, Q, H, R = problem.A, problem.Q, problem.H, problem.R
    X = A @ P @ A.T + Q
    S = H @ X @ H.T + R
    S_inv = _innovation_inverse(S)
    HX = H @ X
    P_next = X - HX.T @ S_inv @ HX
    return SymMatrix(sym(P_next, rtol=np.inf))


def solve_dare(problem: LinearGaussianProblem, tol: float = DARE_TOL,
               max_iter: int = DARE_MAX_ITER, start=None) -> SteadyState:
    """Steady-state covariances by fixed-point iteration from Sigma0.

    Iterates :func:`kalman_cov_step` until the Frobenius change drops
    below ``tol * (1 + ||P||_F)``; the converged limit is independent of
    the start.  X is recomputed as A P A' + Q.  Raises
    DareConvergenceError after ``max_iter`` sweeps, carrying the last
    residual.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    P0 = np.ascontiguousarray(as_matrix(start if start is not None
                                        else problem.Sigma0))
    A = np.ascontiguousarray(problem.A)
    Q = np.ascontiguousarray(problem.Q)
    H = np.ascontiguousarray(problem.H)
    R = np.ascontiguousarray(problem.R)
    try:
        P, iterations, change = _kernels.dare_fixed_point(
            A, Q, H, R, P0, tol, max_iter)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            "innovation covariance singular during DARE iteration") from exc
    if not np.all(np.isfinite(P)):
        raise DareConvergenceError(
            "DARE iteration diverged (non-finite covariance)",
            residual=float(change), iterations=int(iterations))
    if change > tol * (1.0 + np.linalg.norm(P)):
        raise DareConvergenceError(
            f"DARE iteration did not converge in {max_iter} sweeps "
            f"(last change {change:.3e})",
            residual=float(change), iterations=int(iterations))
    X = 0.5 * ((A @ P @ A.T + Q) + (A @ P @ A.T + Q).T)
    S = H @ X @ H.T + R
    K = np.linalg.solve(S, H @ X).T
    P_sym = SymMatrix(sym(P, rtol=np.inf))
    return SteadyState(X=SymMatrix(sym(X, rtol=np.inf)), K=K, P=P_sym,
                       eff_dim=frobenius(P_sym), iterations=int(iterations),
                       residual=float(change))


def dare_residual(problem: LinearGaussianProblem, X) -> float:
    """||X - (A X A' - A X H'(H X H' + R)^{-1} H X A' + Q)||_F."""
    Xa = as_matrix(X)
    A, Q, H, R = problem.A, problem.Q, problem.H, problem.R
    S = H @ Xa @ H.T + R
    HXA = H @ Xa @ A.T
    rhs = A @ Xa @ A.T - HXA.T @ np.linalg.solve(S, HXA) + Q
    return float(np.linalg.norm(Xa - rhs))


def isotropic_steady_p(q: float, r: float) -> float:
    """Per-component steady posterior variance for A = H = I, Q = qI, R = rI.

    Closed form (sqrt(q^2 + 4 q r) - q) / 2; the isotropic effective
    dimension is sqrt(m) times this value.
    """
    if q < 0:
        raise ValueError("q must be nonnegative")
    if r <= 0:
        raise ValueError("r must be positive")
    if q == 0.0:
        return 0.0
    # algebraically equal to (sqrt(q^2+4qr) - q)/2, stable for q >> r
    return 2.0 * q * r / (np.sqrt(q * q + 4.0 * q * r) + q)


def spread_stats(P) -> SpreadStats:
    """Shell radius/thickness statistics from the eigenvalues of P."""
    if isinstance(P, SymMatrix):
        eigs = P.eigenvalues()
    else:
        eigs = np.linalg.eigvalsh(sym(as_matrix(P), rtol=np.inf))
    s1 = float(np.sum(eigs))
    s2 = float(np.sum(eigs ** 2))
    if s1 <= 0.0:
        return SpreadStats(eigenvalues=eigs, mean_y=0.0, var_y=0.0,
                           e_hat=0.0, v_hat=0.0)
    e_hat = (4.0 * s1 * s1 - 2.0 * s2) / (4.0 * s1 ** 1.5)
    v_hat = s2 / (2.0 * s1)
    return SpreadStats(eigenvalues=eigs, mean_y=s1, var_y=2.0 * s2,
                       e_hat=e_hat, v_hat=v_hat)


def effective_dimension(problem: LinearGaussianProblem, tol: float = DARE_TOL,
                        max_iter: int = DARE_MAX_ITER) -> float:
    """||P||_F at steady state; propagates DARE failures."""
    return solve_dare(problem, tol=tol, max_iter=max_iter).eff_dim


def steady_state_to_dict(state: SteadyState) -> dict:
    return {
        "X": state.X.a.tolist(),
        "K": state.K.tolist(),
        "P": state.P.a.tolist(),
        "eff_dim": state.eff_dim,
        "iterations": state.iterations,
        "residual": state.residual,
    }


def steady_state_to_json(state: SteadyState, indent: int = 2) -> str:
    return json.dumps(steady_state_to_dict(state), indent=indent)
