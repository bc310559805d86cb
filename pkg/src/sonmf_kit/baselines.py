"""Comparison factorizers: Lee-Seung NMF, orthogonal NMF, Semi-NMF, logistic NMF.

All four return :class:`~sonmf_kit.result.FactorizationResult`. States of the
multiplicative methods (NMF, Semi-NMF) are floored at ``delta_floor`` so
entries never lock at exactly zero; ONMF uses additive column updates and
keeps exact zeros.
"""

import time
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.cluster.vq import ClusterError

from .binary import _cost_total, sigmoid_matrix
from .linalg import as_matrix, kmeans_columns, truncated_svd
from .matio import check_binary
from .result import FactorizationResult, converged
from .sonmf import KMEANS_RETRIES, frobenius_cost

METHODS = ("nmf", "onmf", "semi", "lognmf")
_ALIASES = {"nmf_mu": "nmf"}
DELTA = 1e-10
SEMI_G_OFFSET = 0.2


@dataclass
class BaselineOptions:
    method: str
    k: int
    max_iters: int = 500
    epsilon: float = 1e-4
    delta_floor: float = DELTA
    lognmf_step: float = 0.001
    seed: Optional[int] = None

    def __post_init__(self):
        self.method = _ALIASES.get(self.method, self.method)
        if self.method not in METHODS:
            raise ValueError(f"unknown baseline {self.method!r}; expected one of {METHODS}")
        if int(self.k) < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not self.delta_floor > 0:
            raise ValueError(f"delta_floor must be > 0, got {self.delta_floor}")
        self.k = int(self.k)


def _require_nonnegative(**mats):
    for name, M in mats.items():
        if np.any(M < 0):
            raise ValueError(f"{name} has negative entries")


def nmf_mu_step(X, F, G, delta=DELTA):
    """Lee-Seung multiplicative update of ``F`` then ``G`` (Frobenius loss)."""
    _require_nonnegative(F=F, G=G)
    F = np.maximum(F * (X @ G) / np.maximum(F @ (G.T @ G), delta), delta)
    G = np.maximum(G * (X.T @ F) / np.maximum(G @ (F.T @ F), delta), delta)
    return F, G


def onmf_step(X, F, G, delta=DELTA):
    """One sweep of column-wise orthogonal NMF (Kimura et al. 2014).

    Each column of ``F`` takes its HALS least-squares update, is projected
    off the sum of the other columns (for nonnegative vectors, orthogonal to
    the sum means orthogonal to each), clipped at zero and normalized to
    unit length. ``G`` then gets a plain HALS sweep. ``F^T F`` approaches
    ``I`` without reaching it exactly.
    """
    _require_nonnegative(F=F, G=G)
    F = F.copy()
    G = G.copy()
    k = F.shape[1]
    A = X @ G
    B = G.T @ G
    total = F.sum(axis=1)
    for j in range(k):
        h = total - F[:, j]
        f = A[:, j] - F @ B[:, j] + F[:, j] * B[j, j]
        hh = h @ h
        if hh > 0:
            f = f - (h @ f / hh) * h
        f = np.maximum(f, 0.0)
        norm = np.linalg.norm(f)
        if norm > 0:
            total += f / norm - F[:, j]
            F[:, j] = f / norm
    C = X.T @ F
    D = F.T @ F
    for j in range(k):
        G[:, j] = np.maximum(C[:, j] - G @ D[:, j] + G[:, j] * D[j, j], 0.0) / max(D[j, j], delta)
    return F, G


def _pos(A):
    return (np.abs(A) + A) / 2.0


def _neg(A):
    return (np.abs(A) - A) / 2.0


def semi_nmf_step(X, F, G, delta=DELTA, ridge=1e-10):
    """Semi-NMF update (Ding, Li and Jordan 2010).

    ``F`` is the unconstrained least-squares solution ``X G (G^T G)^{-1}``;
    ``G`` is rescaled by ``sqrt(((X^T F)^+ + G (F^T F)^-) / ((X^T F)^- + G (F^T F)^+))``.
    """
    _require_nonnegative(G=G)
    GtG = G.T @ G
    if np.linalg.cond(GtG) > 1e12:
        GtG = GtG + ridge * np.eye(GtG.shape[0])
    F = np.linalg.solve(GtG, (X @ G).T).T
    XtF = X.T @ F
    FtF = F.T @ F
    num = _pos(XtF) + G @ _neg(FtF)
    den = np.maximum(_neg(XtF) + G @ _pos(FtF), delta)
    G = np.maximum(G * np.sqrt(num / den), delta)
    return F, G


def lognmf_gradients(X, F, G):
    """Gradients of the Bernoulli log-likelihood (ascent directions)."""
    D = X - sigmoid_matrix(F @ G.T)
    return D @ G, D.T @ F


def lognmf_step(X, F, G, step):
    """Simultaneous gradient-ascent step on the log-likelihood.

    Follows the logistic NMF of Tome et al. (2015): ``F`` is kept
    nonnegative by projection, ``G`` is unconstrained.
    """
    dF, dG = lognmf_gradients(X, F, G)
    return np.maximum(F + step * dF, 0.0), G + step * dG


def _init(X, opts):
    k, d = opts.k, opts.delta_floor
    if opts.method in ("nmf", "onmf"):
        F = np.maximum(truncated_svd(X, k).U, d)
        return F, np.maximum(X.T @ F, d)
    if opts.method == "semi":
        base = 0 if opts.seed is None else int(opts.seed)
        last = None
        for attempt in range(KMEANS_RETRIES):
            try:
                centroids, labels = kmeans_columns(X, k, seed=base + attempt)
                break
            except ClusterError as exc:
                last = exc
        else:
            raise RuntimeError(f"k-means initialization failed: {last}")
        G = np.full((X.shape[1], k), SEMI_G_OFFSET)
        G[np.arange(X.shape[1]), labels] += 1.0
        return centroids, G
    rng = np.random.default_rng(opts.seed)
    return rng.uniform(0.0, 1.0, (X.shape[0], k)), rng.normal(0.0, 1.0, (X.shape[1], k))


def factorize_baseline(X, opts, callback=None):
    """Run one of the comparison methods from its standard initialization.

    ``nmf``/``onmf`` start from the truncated SVD with negatives clipped to
    ``delta_floor``, ``semi`` from k-means, ``lognmf`` from ``F ~ U(0, 1)``,
    ``G ~ N(0, 1)``.
    """
    if not isinstance(opts, BaselineOptions):
        opts = BaselineOptions(**opts)
    X = as_matrix(X, "X")
    if opts.k > min(X.shape):
        raise ValueError(f"k={opts.k} exceeds min{X.shape}")
    binary = opts.method == "lognmf"
    if binary:
        check_binary(X)
        cost = _cost_total
    else:
        cost = frobenius_cost
        if opts.method in ("nmf", "onmf") and np.any(X < 0):
            warnings.warn(f"{opts.method}: X has {int(np.sum(X < 0))} negative entries; "
                          "nonnegative factors cannot fit them", RuntimeWarning,
                          stacklevel=2)

    t0 = time.perf_counter()
    F, G = _init(X, opts)
    d = opts.delta_floor
    if opts.method == "nmf":
        step = lambda F, G: nmf_mu_step(X, F, G, d)  # noqa: E731
    elif opts.method == "onmf":
        step = lambda F, G: onmf_step(X, F, G, d)  # noqa: E731
    elif opts.method == "semi":
        step = lambda F, G: semi_nmf_step(X, F, G, d)  # noqa: E731
    else:
        step = lambda F, G: lognmf_step(X, F, G, opts.lognmf_step)  # noqa: E731

    if opts.method == "semi":
        # k-means centroids are not the F paired with this G; report the state
        # after the first least-squares F solve instead
        F = np.linalg.solve(G.T @ G, (X @ G).T).T
    trace = [cost(X, F, G)]
    values = [] if callback is not None else None
    if callback is not None:
        values.append(callback(0, F, G))
    termination = "max_iters"
    it = 0
    for it in range(1, opts.max_iters + 1):
        F, G = step(F, G)
        trace.append(cost(X, F, G))
        if callback is not None:
            values.append(callback(it, F, G))
        if not np.isfinite(trace[-1]):
            raise FloatingPointError(f"{opts.method} diverged at iteration {it}")
        if converged(trace, opts.epsilon):
            termination = "threshold"
            break

    return FactorizationResult(
        F=F, G=G, objective_trace=np.asarray(trace), iterations=it,
        termination=termination, elapsed_seconds=time.perf_counter() - t0,
        method=opts.method, callback_values=values, extras={"delta_floor": d},
    )
