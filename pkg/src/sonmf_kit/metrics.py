"""Evaluation metrics for fitted factorizations."""

import warnings
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .binary import _cost_total, sigmoid_matrix

SPARSITY_TOL = 1e-10
RIDGE = 1e-12


def average_residual(X, F, G):
    """``||X - F G^T||_F^2 / (n p)``."""
    if F.shape[0] != X.shape[0] or G.shape[0] != X.shape[1] or F.shape[1] != G.shape[1]:
        raise ValueError(f"shape mismatch: X {X.shape}, F {F.shape}, G {G.shape}")
    R = X - F @ G.T
    return float(np.sum(R * R) / X.size)


def orthogonal_residual(F):
    """``||F^T F - I||_F^2``."""
    D = F.T @ F - np.eye(F.shape[1])
    return float(np.sum(D * D))


def projection_matrix(A):
    """``A (A^T A)^{-1} A^T`` and whether a ``1e-12 I`` ridge was needed."""
    A = np.asarray(A, dtype=np.float64)
    AtA = A.T @ A
    ridged = False
    if not np.isfinite(np.linalg.cond(AtA)) or np.linalg.cond(AtA) > 1e12:
        AtA = AtA + RIDGE * np.eye(AtA.shape[0])
        ridged = True
    return A @ np.linalg.solve(AtA, A.T), ridged


def subspace_error(A_true, A_hat, with_flag=False):
    """Squared Frobenius distance between the two column-space projectors.

    A near rank-deficient argument is handled with a small ridge and a
    ``RuntimeWarning``; pass ``with_flag=True`` to also get that flag back.
    """
    if A_true.shape[0] != A_hat.shape[0]:
        raise ValueError(f"row mismatch: {A_true.shape} vs {A_hat.shape}")
    H1, r1 = projection_matrix(A_true)
    H2, r2 = projection_matrix(A_hat)
    D = H1 - H2
    err = float(np.sum(D * D))
    if r1 or r2:
        warnings.warn("subspace_error: rank-deficient factor, ridge applied", RuntimeWarning,
                      stacklevel=2)
    return (err, r1 or r2) if with_flag else err


def sparsity_pct(M):
    """Percentage of entries with ``|value| <= 1e-10``."""
    M = np.asarray(M)
    return float(100.0 * np.count_nonzero(np.abs(M) <= SPARSITY_TOL) / M.size)


def probability_error(P_true, F, G):
    """``||P_true - sigmoid(F G^T)||_F^2``."""
    P_true = np.asarray(P_true, dtype=np.float64)
    if np.any(P_true < 0) or np.any(P_true > 1):
        raise ValueError("P_true entries must lie in [0, 1]")
    D = P_true - sigmoid_matrix(F @ G.T)
    return float(np.sum(D * D))


def mean_cost(X, F, G):
    return _cost_total(X, F, G) / X.size


def iterations_to_threshold(trace, threshold=1e-4):
    """First iteration ``i`` with ``0 <= trace[i-1] - trace[i] <= threshold``.

    ``trace`` holds per-entry values (average residual or mean cost) with the
    initial state at index 0. Returns ``None`` if the rule never fires.
    """
    t = np.asarray(trace, dtype=np.float64)
    drop = t[:-1] - t[1:]
    hits = np.nonzero((drop >= 0) & (drop <= threshold))[0]
    return int(hits[0]) + 1 if hits.size else None


@dataclass
class MetricsRecord:
    orthogonal_residual: float
    sparsity_f_pct: float
    sparsity_g_pct: float
    average_residual: Optional[float] = None
    mean_cost: Optional[float] = None
    eps_f: Optional[float] = None
    eps_g: Optional[float] = None
    eps_p: Optional[float] = None
    subspace_ridge: bool = False
    iterations: Optional[int] = None
    iterations_to_threshold: Optional[int] = None
    elapsed_seconds: Optional[float] = None

    def to_dict(self):
        return asdict(self)


def evaluate(X, F, G, binary=False, F_true=None, G_true=None, P_true=None,
             result=None, threshold=1e-4):
    """Assemble a :class:`MetricsRecord` for one fitted ``(F, G)``.

    Subspace errors need the true factors; ``eps_p`` needs ``P_true``. When a
    ``FactorizationResult`` is given its trace supplies the iteration counts.
    """
    rec = MetricsRecord(
        orthogonal_residual=orthogonal_residual(F),
        sparsity_f_pct=sparsity_pct(F),
        sparsity_g_pct=sparsity_pct(G),
    )
    if binary:
        rec.mean_cost = mean_cost(X, F, G)
    else:
        rec.average_residual = average_residual(X, F, G)
    if F_true is not None and G_true is not None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            rec.eps_f, rf = subspace_error(F_true, F, with_flag=True)
            rec.eps_g, rg = subspace_error(G_true, G, with_flag=True)
        rec.subspace_ridge = rf or rg
    if P_true is not None:
        rec.eps_p = probability_error(P_true, F, G)
    if result is not None:
        rec.iterations = result.iterations
        rec.elapsed_seconds = result.elapsed_seconds
        rec.iterations_to_threshold = iterations_to_threshold(
            result.objective_trace / X.size, threshold)
    return rec
