import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from effdim.model import (LinearGaussianProblem, PsdVerdict, SymMatrix,
                          frobenius, problem_from_json, problem_to_json,
                          psd_compare, psd_factor, validate)
from util import random_orthogonal, random_spd


def test_validate_identity_problem_clean():
    problem = LinearGaussianProblem.isotropic(2, 1.0, 1.0)
    assert validate(problem) == []


def test_validate_zero_r_not_positive_definite():
    eye = np.eye(2)
    problem = LinearGaussianProblem(A=eye, Q=eye, H=eye, R=np.zeros((2, 2)),
                                    mu0=np.zeros(2), Sigma0=eye)
    report = validate(problem)
    assert any("R not positive definite" in line for line in report)


def test_validate_asymmetric_q():
    eye = np.eye(2)
    Q = np.array([[1.0, 1.0], [0.0, 1.0]])
    problem = LinearGaussianProblem(A=eye, Q=Q, H=eye, R=eye,
                                    mu0=np.zeros(2), Sigma0=eye)
    report = validate(problem)
    assert any("Q not symmetric" in line for line in report)


def test_validate_k_greater_than_m():
    problem = LinearGaussianProblem(A=np.eye(1), Q=np.eye(1),
                                    H=np.ones((2, 1)), R=np.eye(2),
                                    mu0=np.zeros(1), Sigma0=np.eye(1))
    assert any("k > m" in line for line in validate(problem))


def test_validate_nonfinite_entries():
    eye = np.eye(2)
    A = np.array([[1.0, np.nan], [0.0, 1.0]])
    problem = LinearGaussianProblem(A=A, Q=eye, H=eye, R=eye,
                                    mu0=np.zeros(2), Sigma0=eye)
    assert any("A has non-finite entries" in line for line in validate(problem))


def test_frobenius_identity():
    for m in (1, 4, 9):
        assert frobenius(np.eye(m)) == pytest.approx(np.sqrt(m), abs=1e-14)


def test_frobenius_three_four_five():
    assert frobenius(np.diag([3.0, 4.0])) == pytest.approx(5.0, abs=1e-14)


def test_frobenius_matches_eigenvalue_form():
    rng = np.random.default_rng(7)
    M = random_spd(rng, 5) - 0.3 * np.eye(5)
    eigs = np.linalg.eigvalsh(M)
    assert abs(frobenius(M) - np.sqrt(np.sum(eigs ** 2))) < 1e-10


def test_psd_compare_scaled_identity():
    out = psd_compare(np.eye(3), 2 * np.eye(3))
    assert out.verdict is PsdVerdict.LESS_OR_EQUAL
    assert out.min_eig_diff == pytest.approx(1.0)


def test_psd_compare_incomparable():
    out = psd_compare(np.diag([1.0, 3.0]), np.diag([3.0, 1.0]))
    assert out.verdict is PsdVerdict.INCOMPARABLE


def test_psd_compare_equal():
    rng = np.random.default_rng(3)
    C = random_spd(rng, 4)
    out = psd_compare(C, C.copy())
    assert out.verdict is PsdVerdict.EQUAL


def test_psd_compare_greater():
    out = psd_compare(2 * np.eye(2), np.eye(2))
    assert out.verdict is PsdVerdict.GREATER_OR_EQUAL


def test_psd_compare_dimension_mismatch():
    with pytest.raises(ValueError):
        psd_compare(np.eye(2), np.eye(3))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_loewner_order_implies_frobenius_order(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 7))
    C = random_spd(rng, m)
    L = rng.standard_normal((m, m))
    D = C + L @ L.T
    assert psd_compare(C, D).verdict in (PsdVerdict.LESS_OR_EQUAL,
                                         PsdVerdict.EQUAL)
    assert frobenius(C) <= frobenius(D) + 1e-8


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_frobenius_orthogonal_invariance(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 8))
    M = random_spd(rng, m) - 0.5 * np.eye(m)
    U = random_orthogonal(rng, m)
    assert abs(frobenius(U.T @ M @ U) - frobenius(M)) <= 1e-9


def test_sym_matrix_rejects_large_asymmetry():
    with pytest.raises(ValueError):
        SymMatrix.from_array(np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_sym_matrix_folds_roundoff_asymmetry():
    M = np.array([[1.0, 0.5 + 1e-15], [0.5, 1.0]])
    S = SymMatrix.from_array(M)
    assert np.allclose(S.a, S.a.T)
    eigs = S.eigenvalues()
    assert np.all(np.diff(eigs) >= 0)


def test_psd_factor_roundtrip_and_rejection():
    rng = np.random.default_rng(11)
    M = random_spd(rng, 4)
    L = psd_factor(M)
    assert np.allclose(L @ L.T, M, atol=1e-12)
    zero = psd_factor(np.zeros((3, 3)))
    assert np.all(zero == 0.0)
    with pytest.raises(np.linalg.LinAlgError):
        psd_factor(-np.eye(2))


def test_problem_json_roundtrip():
    rng = np.random.default_rng(5)
    problem = LinearGaussianProblem(
        A=rng.standard_normal((3, 3)), Q=random_spd(rng, 3),
        H=rng.standard_normal((2, 3)), R=random_spd(rng, 2),
        mu0=rng.standard_normal(3), Sigma0=random_spd(rng, 3))
    back = problem_from_json(problem_to_json(problem))
    for name in ("A", "Q", "H", "R", "mu0", "Sigma0"):
        np.testing.assert_array_equal(getattr(problem, name),
                                      getattr(back, name))


def test_problem_json_missing_key_named():
    doc = json.loads(problem_to_json(LinearGaussianProblem.isotropic(2, 1, 1)))
    del doc["R"]
    with pytest.raises(ValueError, match="missing key: R"):
        problem_from_json(json.dumps(doc))


def test_problem_json_invalid_text():
    with pytest.raises(ValueError, match="invalid JSON"):
        problem_from_json("{not json")


def test_problem_shape_mismatch_raises():
    with pytest.raises(ValueError):
        LinearGaussianProblem(A=np.eye(2), Q=np.eye(3), H=np.eye(2),
                              R=np.eye(2), mu0=np.zeros(2), Sigma0=np.eye(2))
