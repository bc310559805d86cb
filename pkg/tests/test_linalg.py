import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import jacobi_svd, projector_normal_equations
from sonmf_kit.linalg import (IllConditionedError, RankDeficientError, as_matrix,
                              invert_small, kmeans_columns, qr_orthonormalize,
                              random_matrix, truncated_svd)


def test_svd_identity():
    s = truncated_svd(np.eye(3), 2)
    np.testing.assert_allclose(s.D, [1.0, 1.0])
    np.testing.assert_allclose(s.U.T @ s.U, np.eye(2), atol=1e-14)


def test_svd_diagonal():
    s = truncated_svd(np.array([[2.0, 0.0], [0.0, 0.0]]), 1)
    np.testing.assert_allclose(s.D, [2.0])
    np.testing.assert_allclose(s.U[:, 0], [1.0, 0.0])


def test_svd_matches_jacobi_oracle(rng):
    X = rng.normal(size=(20, 15))
    _, s_ref, _ = jacobi_svd(X)
    np.testing.assert_allclose(truncated_svd(X, 5).D, s_ref[:5], atol=1e-8)


def test_svd_power_iteration_path_matches_oracle(rng):
    # min dimension above the dense cutoff exercises the block power iteration
    X = rng.normal(size=(90, 70)) + 3 * np.outer(rng.normal(size=90), rng.normal(size=70))
    s = truncated_svd(X, 6)
    _, s_ref, _ = jacobi_svd(X, sweeps=60)
    # 1e-9 bounds the per-sweep change, not the error; with a small spectral gap the
    # error can be a few times larger
    np.testing.assert_allclose(s.D, s_ref[:6], rtol=1e-7)
    np.testing.assert_allclose(s.U.T @ s.U, np.eye(6), atol=1e-10)
    np.testing.assert_allclose(s.V.T @ s.V, np.eye(6), atol=1e-10)


@given(st.integers(2, 30), st.integers(2, 30), st.integers(0, 2**31 - 1))
def test_svd_is_best_rank_k(p, n, seed):
    X = np.random.default_rng(seed).normal(size=(p, n))
    k = max(1, min(p, n) // 2)
    s = truncated_svd(X, k)
    assert np.all(np.diff(s.D) <= 1e-12) and np.all(s.D >= 0)
    U, sv, V = jacobi_svd(X)
    best = U[:, :k] * sv[:k] @ V[:, :k].T
    ours = s.U * s.D @ s.V.T
    assert np.sum((X - ours) ** 2) <= np.sum((X - best) ** 2) + 1e-6


def test_svd_sign_convention(rng):
    s = truncated_svd(rng.normal(size=(12, 9)), 4)
    idx = np.argmax(np.abs(s.U), axis=0)
    assert np.all(s.U[idx, np.arange(4)] > 0)


@pytest.mark.parametrize("k", [0, 4])
def test_svd_rank_out_of_range(k):
    with pytest.raises(ValueError):
        truncated_svd(np.ones((3, 3)), k)


def test_svd_rejects_nonfinite():
    X = np.ones((3, 3))
    X[1, 1] = np.nan
    with pytest.raises(ValueError):
        truncated_svd(X, 1)


def test_as_matrix_shapes():
    with pytest.raises(ValueError):
        as_matrix(np.ones(3))
    assert as_matrix([[1, 2]]).dtype == np.float64


def test_qr_on_orthonormal_input_is_identity_up_to_sign(rng):
    A = np.linalg.qr(rng.normal(size=(8, 3)))[0]
    Q = qr_orthonormalize(A)
    np.testing.assert_allclose(np.abs(Q), np.abs(A), atol=1e-12)


def test_qr_small():
    Q = qr_orthonormalize(np.array([[1.0, 1.0], [0.0, 1.0]]))
    np.testing.assert_allclose(Q.T @ Q, np.eye(2), atol=1e-14)


def test_qr_preserves_span(rng):
    A = rng.normal(size=(50, 10))
    Q = qr_orthonormalize(A)
    np.testing.assert_allclose(Q.T @ Q, np.eye(10), atol=1e-12)
    np.testing.assert_allclose(Q @ Q.T, projector_normal_equations(A), atol=1e-10)
    assert np.linalg.norm(A - Q @ (Q.T @ A)) < 1e-10


def test_qr_rank_deficient():
    A = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])
    with pytest.raises(RankDeficientError):
        qr_orthonormalize(A)
    with pytest.raises(RankDeficientError):
        qr_orthonormalize(np.ones((2, 3)))


def test_invert_small_examples(rng):
    np.testing.assert_array_equal(invert_small(np.eye(4)), np.eye(4))
    np.testing.assert_allclose(invert_small(np.diag([2.0, 4.0])), np.diag([0.5, 0.25]))
    M = rng.normal(size=(10, 10)) + 10 * np.eye(10)
    assert np.linalg.norm(M @ invert_small(M) - np.eye(10)) < 1e-9


def test_invert_small_ill_conditioned():
    with pytest.raises(IllConditionedError):
        invert_small(np.array([[1.0, 1.0], [1.0, 1.0 + 1e-15]]))
    with pytest.raises(ValueError):
        invert_small(np.ones((2, 3)))


def test_random_matrix_deterministic():
    a = random_matrix(5, 4, "uniform", seed=7)
    b = random_matrix(5, 4, "uniform", seed=7)
    np.testing.assert_array_equal(a, b)
    assert a.min() >= 0 and a.max() < 1


def test_random_orthonormal():
    F = random_matrix(500, 10, "orthonormal", seed=1)
    assert np.sum((F.T @ F - np.eye(10)) ** 2) < 1e-20


def test_random_normal_moments():
    E = random_matrix(500, 500, "normal", (0.0, 0.3), seed=3)
    assert abs(E.mean()) < 0.01
    assert abs(E.var() - 0.09) < 0.01


@pytest.mark.parametrize("args", [(0, 3, "uniform"), (3, 5, "orthonormal"),
                                  (3, 3, "cauchy"), (3, 3, "uniform", (1, 0))])
def test_random_matrix_invalid(args):
    with pytest.raises(ValueError):
        random_matrix(*args)


def test_kmeans_perfect_clusters(rng):
    base = rng.normal(size=(6, 3))
    X = np.repeat(base, 4, axis=1)
    centroids, labels = kmeans_columns(X, 3, seed=0)
    got = sorted(map(tuple, np.round(centroids.T, 12)))
    want = sorted(map(tuple, np.round(base.T, 12)))
    np.testing.assert_allclose(got, want)
    assert len(set(labels)) == 3
