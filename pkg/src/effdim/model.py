"""Domain types for linear-Gaussian state-space problems.

The model is the pair of recursions

    x[n+1] = A x[n] + w[n],      w[n] ~ N(0, Q)
    z[n+1] = H x[n+1] + v[n+1],  v[n+1] ~ N(0, R)

with Gaussian initial condition x[0] ~ N(mu0, Sigma0).  This module holds
the problem container, a thin symmetric-matrix wrapper, the Loewner-order
comparison used throughout, and JSON round-tripping.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np

# Tolerances (module-wide defaults; every consumer takes them as keyword
# overrides where it matters).
SYM_RTOL = 1e-12        # relative asymmetry accepted before rejection
PSD_TOL_SCALE = 1e-10   # Loewner slack: tol = PSD_TOL_SCALE * (1 + ||D - C||_F)
PSD_FACTOR_RTOL = 1e-10 # eigenvalue clip threshold for PSD square roots


def as_matrix(M) -> np.ndarray:
    """Unwrap a SymMatrix (or coerce anything array-like) to a float ndarray."""
    if isinstance(M, SymMatrix):
        return M.a
    return np.asarray(M, dtype=float)


def sym(M, rtol: float = SYM_RTOL) -> np.ndarray:
    """Return the symmetrized matrix (M + M.T)/2.

    Asymmetry below ``rtol * (1 + ||M||_F)`` is treated as roundoff and
    silently folded; anything larger raises ValueError.  Symmetrizing up
    front keeps every downstream eigendecomposition real.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    gap = np.linalg.norm(M - M.T)
    if gap > rtol * (1.0 + np.linalg.norm(M)):
        raise ValueError("matrix is not symmetric within tolerance")
    out = 0.5 * (M + M.T)
    out.setflags(write=False)
    return out


def _is_symmetric(M: np.ndarray, rtol: float = SYM_RTOL) -> bool:
    return np.linalg.norm(M - M.T) <= rtol * (1.0 + np.linalg.norm(M))


@dataclass(frozen=True)
class SymMatrix:
    """A square matrix stored symmetric.

    Construct through :meth:`from_array`, which enforces the symmetry
    tolerance.  ``eigenvalues`` returns the nondecreasing real spectrum.
    """

    a: np.ndarray

    @classmethod
    def from_array(cls, M, rtol: float = SYM_RTOL) -> "SymMatrix":
        return cls(sym(as_matrix(M), rtol))

    @property
    def order(self) -> int:
        return self.a.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.a)

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.a
        return self.a.astype(dtype)


class PsdVerdict(str, enum.Enum):
    LESS_OR_EQUAL = "LessOrEqual"
    GREATER_OR_EQUAL = "GreaterOrEqual"
    INCOMPARABLE = "Incomparable"
    EQUAL = "Equal"


@dataclass(frozen=True)
class PsdOrder:
    """Outcome of comparing (C, D) in the Loewner (PSD) order.

    ``min_eig_diff`` is the smallest eigenvalue of D - C; the verdict is
    LESS_OR_EQUAL exactly when it is >= -tol with
    tol = PSD_TOL_SCALE * (1 + ||D - C||_F).
    """

    verdict: PsdVerdict
    min_eig_diff: float


def psd_compare(C, D, tol_scale: float = PSD_TOL_SCALE) -> PsdOrder:
    """Classify the Loewner order of two symmetric matrices."""
    Ca = as_matrix(C)
    Da = as_matrix(D)
    if Ca.shape != Da.shape:
        raise ValueError(f"order mismatch: {Ca.shape} vs {Da.shape}")
    E = 0.5 * ((Da - Ca) + (Da - Ca).T)
    tol = tol_scale * (1.0 + np.linalg.norm(E))
    eigs = np.linalg.eigvalsh(E)
    le = eigs[0] >= -tol
    ge = eigs[-1] <= tol
    if le and ge:
        verdict = PsdVerdict.EQUAL
    elif le:
        verdict = PsdVerdict.LESS_OR_EQUAL
    elif ge:
        verdict = PsdVerdict.GREATER_OR_EQUAL
    else:
        verdict = PsdVerdict.INCOMPARABLE
    return PsdOrder(verdict, float(eigs[0]))


def frobenius(M) -> float:
    """Frobenius norm (sum of squared entries, square-rooted)."""
    return float(np.linalg.norm(as_matrix(M)))


def psd_factor(M, rtol: float = PSD_FACTOR_RTOL) -> np.ndarray:
    """A factor L with L @ L.T = M for symmetric PSD M.

    Built from the eigendecomposition so that singular (rank-deficient)
    covariances factor cleanly; eigenvalues below -rtol*(1+lambda_max)
    mean M is not PSD and raise LinAlgError.
    """
    Ma = as_matrix(M)
    Ms = 0.5 * (Ma + Ma.T)
    w, V = np.linalg.eigh(Ms)
    if w[0] < -rtol * (1.0 + max(w[-1], 0.0)):
        raise np.linalg.LinAlgError("matrix is not positive semi-definite within tolerance")
    return V * np.sqrt(np.clip(w, 0.0, None))


@dataclass(frozen=True)
class LinearGaussianProblem:
    """The tuple (A, Q, H, R, mu0, Sigma0) defining the model and data stream.

    Shape consistency is enforced at construction; statistical invariants
    (symmetry, definiteness, k <= m, finiteness) are report-checked by
    :func:`validate` so that deliberately broken instances can be built
    and diagnosed.
    """

    A: np.ndarray
    Q: np.ndarray
    H: np.ndarray
    R: np.ndarray
    mu0: np.ndarray
    Sigma0: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        mu0 = np.atleast_1d(np.asarray(self.mu0, dtype=float))
        Sigma0 = np.atleast_2d(np.asarray(self.Sigma0, dtype=float))
        m = A.shape[0]
        k = H.shape[0]
        if A.shape != (m, m):
            raise ValueError(f"A must be square, got {A.shape}")
        if Q.shape != (m, m):
            raise ValueError(f"Q must be {m}x{m}, got {Q.shape}")
        if H.shape != (k, m):
            raise ValueError(f"H must have {m} columns, got {H.shape}")
        if R.shape != (k, k):
            raise ValueError(f"R must be {k}x{k}, got {R.shape}")
        if mu0.shape != (m,):
            raise ValueError(f"mu0 must have length {m}, got {mu0.shape}")
        if Sigma0.shape != (m, m):
            raise ValueError(f"Sigma0 must be {m}x{m}, got {Sigma0.shape}")
        for name, arr in (("A", A), ("Q", Q), ("H", H), ("R", R),
                          ("mu0", mu0), ("Sigma0", Sigma0)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def k(self) -> int:
        return self.H.shape[0]

    @classmethod
    def isotropic(cls, m: int, q: float, r: float, sigma0: float = 1.0,
                  mu0=None) -> "LinearGaussianProblem":
        """A = H = I_m, Q = q I, R = r I, Sigma0 = sigma0 I."""
        eye = np.eye(m)
        if mu0 is None:
            mu0 = np.zeros(m)
        return cls(A=eye, Q=q * eye, H=eye, R=r * eye, mu0=mu0,
                   Sigma0=sigma0 * eye)


def _psd_report(name: str, M: np.ndarray, strict: bool,
                tol_scale: float) -> list[str]:
    w = np.linalg.eigvalsh(0.5 * (M + M.T))
    tol = tol_scale * (1.0 + max(abs(w[0]), abs(w[-1])))
    if strict:
        if w[0] <= tol:
            return [f"{name} not positive definite"]
    elif w[0] < -tol:
        return [f"{name} not positive semi-definite"]
    return []


def validate(problem: LinearGaussianProblem, rtol: float = SYM_RTOL,
             tol_scale: float = PSD_TOL_SCALE) -> list[str]:
    """Check every type invariant; return one message per violated check.

    An empty list means the problem is well posed.
    """
    report: list[str] = []
    for name in ("A", "Q", "H", "R", "mu0", "Sigma0"):
        if not np.all(np.isfinite(getattr(problem, name))):
            report.append(f"{name} has non-finite entries")
    if problem.k > problem.m:
        report.append(f"k > m ({problem.k} > {problem.m})")
    for name in ("Q", "R", "Sigma0"):
        M = getattr(problem, name)
        if not _is_symmetric(M, rtol):
            report.append(f"{name} not symmetric")
    if not any(r.startswith("Q ") for r in report):
        report += _psd_report("Q", problem.Q, strict=False, tol_scale=tol_scale)
    if not any(r.startswith("R ") for r in report):
        report += _psd_report("R", problem.R, strict=True, tol_scale=tol_scale)
    if not any(r.startswith("Sigma0 ") for r in report):
        report += _psd_report("Sigma0", problem.Sigma0, strict=False,
                              tol_scale=tol_scale)
    return report


# ---------------------------------------------------------------------------
# JSON interchange: {"A": [[...]], "Q": ..., "H": ..., "R": ..., "mu0": [...],
# "Sigma0": [[...]]} with row-major nested arrays.

_PROBLEM_KEYS = ("A", "Q", "H", "R", "mu0", "Sigma0")


def problem_to_json(problem: LinearGaussianProblem, indent: int = 2) -> str:
    doc = {key: getattr(problem, key).tolist() for key in _PROBLEM_KEYS}
    return json.dumps(doc, indent=indent)


def problem_from_json(text: str) -> LinearGaussianProblem:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValueError("invalid JSON: expected a top-level object")
    missing = [key for key in _PROBLEM_KEYS if key not in doc]
    if missing:
        raise ValueError(f"problem JSON missing key: {missing[0]}")
    try:
        return LinearGaussianProblem(**{key: doc[key] for key in _PROBLEM_KEYS})
    except (TypeError, ValueError) as exc:
        raise ValueError(f"problem JSON malformed: {exc}") from exc


def load_problem(path) -> LinearGaussianProblem:
    with open(path, "r", encoding="utf-8") as fh:
        return problem_from_json(fh.read())


def save_problem(problem: LinearGaussianProblem, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(problem_to_json(problem))
        fh.write("\n")
