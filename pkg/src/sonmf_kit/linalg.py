"""Dense matrix primitives shared by every factorizer.

Matrices are plain 2-D ``float64`` numpy arrays throughout the package.
"""

import warnings
from typing import NamedTuple, Optional

import numpy as np
from scipy.cluster.vq import ClusterError, kmeans2

DENSE_SVD_CUTOFF = 64
SVD_TOL = 1e-9
SVD_MAX_SWEEPS = 1000
SVD_OVERSAMPLE = 10
RANK_TOL = 1e-12
COND_LIMIT = 1e12


class RankDeficientError(np.linalg.LinAlgError):
    pass


class IllConditionedError(np.linalg.LinAlgError):
    pass


class SvdTruncation(NamedTuple):
    U: np.ndarray
    D: np.ndarray
    V: np.ndarray


def as_matrix(A, name="matrix"):
    """Coerce to a finite 2-D float64 array or raise ``ValueError``."""
    M = np.asarray(A, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {M.shape}")
    if M.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains NaN or Inf")
    return M


def _fix_signs(U, V):
    # largest-magnitude entry of each U column made positive
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs, V * signs


def _orth(A):
    Q, _ = np.linalg.qr(A)
    return Q


def truncated_svd(X, k, *, tol=SVD_TOL, max_sweeps=SVD_MAX_SWEEPS,
                  dense_cutoff=DENSE_SVD_CUTOFF):
    """Top-``k`` singular triplets of ``X``.

    Small problems (``min(p, n) <= dense_cutoff``) use a full LAPACK
    decomposition. Larger ones use block power (subspace) iteration with
    ``k + 10`` oversampled columns, QR re-orthonormalization on every half
    sweep and a Rayleigh-Ritz extraction; iteration stops once the leading
    ``k`` singular values move by less than ``tol`` relative to the largest.
    The starting block is drawn from a fixed seed so results are
    deterministic.

    Columns are sign-normalized so that the largest-magnitude entry of each
    left singular vector is positive.
    """
    X = as_matrix(X, "X")
    p, n = X.shape
    k = int(k)
    if not 1 <= k <= min(p, n):
        raise ValueError(f"k={k} out of range for a {p}x{n} matrix")

    if min(p, n) <= dense_cutoff:
        U, s, Vt = np.linalg.svd(X, full_matrices=False)
        U, V = _fix_signs(U[:, :k], Vt[:k].T)
        return SvdTruncation(U, s[:k].copy(), V)

    b = min(k + SVD_OVERSAMPLE, min(p, n))
    rng = np.random.default_rng(0)
    Q = _orth(X @ rng.standard_normal((n, b)))
    s_old = None
    for _ in range(max_sweeps):
        Z = _orth(X.T @ Q)
        Q = _orth(X @ Z)
        Ub, s, Vbt = np.linalg.svd(Q.T @ X, full_matrices=False)
        if s_old is not None and np.max(np.abs(s[:k] - s_old)) <= tol * max(s[0], 1e-300):
            break
        s_old = s[:k]
    else:
        warnings.warn(f"truncated_svd: block power iteration did not reach tol={tol} "
                      f"in {max_sweeps} sweeps", RuntimeWarning, stacklevel=2)
    U = Q @ Ub[:, :k]
    V = Vbt[:k].T
    U, V = _fix_signs(U, V)
    return SvdTruncation(U, s[:k].copy(), V)


def qr_orthonormalize(A):
    """Orthonormal basis ``Q`` for the column space of ``A``.

    Signs are chosen so that ``R`` has a positive diagonal, which makes the
    map idempotent on inputs that already have orthonormal columns.
    Raises ``RankDeficientError`` if a diagonal entry of ``R`` falls below
    ``1e-12`` times the largest column norm of ``A``.
    """
    A = as_matrix(A, "A")
    p, k = A.shape
    if k > p:
        raise RankDeficientError(f"{k} columns cannot be orthonormal in R^{p}")
    Q, R = np.linalg.qr(A)
    d = np.diag(R)
    scale = np.max(np.linalg.norm(A, axis=0))
    if scale == 0 or np.min(np.abs(d)) <= RANK_TOL * scale:
        raise RankDeficientError("matrix is numerically rank deficient")
    signs = np.where(d < 0, -1.0, 1.0)
    return Q * signs


def invert_small(M, cond_limit=COND_LIMIT):
    """Inverse of a small square matrix.

    Raises ``IllConditionedError`` when the 2-norm condition number exceeds
    ``cond_limit``; in the Cayley step this means the step size is too large.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise IllConditionedError("matrix contains NaN or Inf")
    c = np.linalg.cond(M)
    if not np.isfinite(c) or c > cond_limit:
        raise IllConditionedError(f"condition number {c:.3g} exceeds {cond_limit:.0e}")
    return np.linalg.inv(M)


LAWS = ("uniform", "normal", "orthonormal")


def random_matrix(rows, cols, law="uniform", params=None, seed=None,
                  rng: Optional[np.random.Generator] = None):
    """Draw a ``rows x cols`` matrix.

    ``law`` is ``"uniform"`` (``params=(a, b)``, default ``(0, 1)``),
    ``"normal"`` (``params=(mean, sd)``, default ``(0, 1)``) or
    ``"orthonormal"`` (QR of a standard normal draw, ``cols <= rows``).
    Pass either ``seed`` or an existing generator ``rng``.
    """
    rows, cols = int(rows), int(cols)
    if rows < 1 or cols < 1:
        raise ValueError(f"invalid dimensions {rows}x{cols}")
    if rng is None:
        rng = np.random.default_rng(seed)
    if law == "uniform":
        a, b = params if params is not None else (0.0, 1.0)
        if not b > a:
            raise ValueError(f"uniform law needs a < b, got ({a}, {b})")
        return rng.uniform(a, b, size=(rows, cols))
    if law == "normal":
        mu, sd = params if params is not None else (0.0, 1.0)
        if sd < 0:
            raise ValueError(f"normal law needs sd >= 0, got {sd}")
        return rng.normal(mu, sd, size=(rows, cols))
    if law == "orthonormal":
        if cols > rows:
            raise ValueError(f"orthonormal law needs cols <= rows, got {rows}x{cols}")
        return qr_orthonormalize(rng.standard_normal((rows, cols)))
    raise ValueError(f"unknown law {law!r}; expected one of {LAWS}")


def kmeans_columns(X, k, seed=None, max_iter=50):
    """Lloyd's k-means on the columns of ``X``.

    Starts from ``k`` distinct columns picked with ``seed``. Returns
    ``(centroids, labels)`` with centroids as a ``p x k`` matrix. Raises
    ``scipy.cluster.vq.ClusterError`` when a cluster empties out.
    """
    X = as_matrix(X, "X")
    n = X.shape[1]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range for {n} columns")
    rng = np.random.default_rng(seed)
    pts = X.T
    # distinct points, not just distinct indices, so no centroid starts duplicated
    _, first = np.unique(pts, axis=0, return_index=True)
    if first.size < k:
        raise ClusterError(f"only {first.size} distinct columns for k={k}")
    start = np.sort(rng.choice(np.sort(first), size=k, replace=False))
    centroids, labels = kmeans2(pts, pts[start].copy(), iter=max_iter,
                                minit="matrix", missing="raise")
    return centroids.T.copy(), labels
