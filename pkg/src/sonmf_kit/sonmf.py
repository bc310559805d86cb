"""Semi-orthogonal NMF for real-valued data.

Solves ``min ||X - F G^T||_F^2`` subject to ``F^T F = I`` and ``G >= 0``.
``F`` moves along the Stiefel manifold through Cayley-transform steps with
a doubling/halving line search; ``G`` has the closed form ``[X^T F]_+``.
"""

import time
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.cluster.vq import ClusterError

from .linalg import (IllConditionedError, RankDeficientError, as_matrix,
                     invert_small, kmeans_columns, qr_orthonormalize,
                     random_matrix, truncated_svd)
from .result import FactorizationResult, converged

ORTH_TOL = 1e-8
STATIONARY_RTOL = 1e-10
TAU_MAX = 1e6
# a carried step below this cannot move F in double precision; flooring it
# stops repeated stalls from underflowing tau to zero
TAU_MIN = 1e-20
KMEANS_RETRIES = 5
INITS = ("svd", "kmeans", "random")


@dataclass
class ContinuousOptions:
    k: int
    max_iters: int = 500
    epsilon: float = 1e-4
    tau_init: float = 0.5
    max_halvings: int = 40
    seed: Optional[int] = None
    tau_max: float = TAU_MAX

    def __post_init__(self):
        if int(self.k) < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not self.tau_init > 0:
            raise ValueError(f"tau_init must be > 0, got {self.tau_init}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if int(self.max_iters) < 0 or int(self.max_halvings) < 0:
            raise ValueError("max_iters and max_halvings must be >= 0")
        self.k = int(self.k)


def orthogonality_gap(F):
    k = F.shape[1]
    D = F.T @ F - np.eye(k)
    return float(np.sum(D * D))


def _check_orthonormal(F, tol=ORTH_TOL):
    gap = orthogonality_gap(F)
    if gap >= tol:
        raise ValueError(f"F is not orthonormal: ||F^T F - I||_F^2 = {gap:.3g}")


def frobenius_cost(X, F, G):
    R = X - F @ G.T
    return float(np.sum(R * R))


# -- initialization ----------------------------------------------------------

def init_f_svd(X, k):
    """Leading ``k`` left singular vectors of ``X``."""
    return truncated_svd(X, k).U


def init_f_kmeans(X, k, seed=None):
    """Orthonormalized k-means centroids of the columns of ``X``.

    Degenerate clusterings (an emptied cluster or rank-deficient centroids)
    are retried with ``seed + 1, seed + 2, ...`` up to five attempts.
    """
    X = as_matrix(X, "X")
    base = 0 if seed is None else int(seed)
    last = None
    for attempt in range(KMEANS_RETRIES):
        try:
            centroids, _ = kmeans_columns(X, k, seed=base + attempt)
            return qr_orthonormalize(centroids)
        except (ClusterError, RankDeficientError) as exc:
            last = exc
    raise RankDeficientError(f"k-means initialization failed {KMEANS_RETRIES} times: {last}")


def init_f_random(X, k, seed=None):
    return random_matrix(X.shape[0], k, "orthonormal", seed=seed)


def initial_f(X, k, init="svd", seed=None):
    if init == "svd":
        return init_f_svd(X, k)
    if init == "kmeans":
        return init_f_kmeans(X, k, seed)
    if init == "random":
        return init_f_random(X, k, seed)
    raise ValueError(f"unknown init {init!r}; expected one of {INITS}")


# -- update pieces -----------------------------------------------------------

def update_g(X, F, check=True):
    """Optimal nonnegative coefficients for orthonormal ``F``: ``[X^T F]_+``."""
    if check:
        _check_orthonormal(F)
    return np.maximum(X.T @ F, 0.0)


def gradient_f(X, F, G):
    """Euclidean gradient of ``||X - F G^T||_F^2`` with respect to ``F``."""
    if F.shape[0] != X.shape[0] or G.shape[0] != X.shape[1] or F.shape[1] != G.shape[1]:
        raise ValueError(f"shape mismatch: X {X.shape}, F {F.shape}, G {G.shape}")
    return 2.0 * F @ (G.T @ G) - 2.0 * X @ G


def cayley_step(F, grad, tau):
    """Move ``F`` along the Cayley curve defined by ``grad`` for step ``tau``.

    With ``U = [grad, F]`` and ``V = [F, -grad]`` the skew matrix
    ``grad F^T - F grad^T`` equals ``U V^T``, so the Woodbury identity only
    needs a ``2k x 2k`` inverse::

        F - tau * U (I + tau/2 V^T U)^{-1} V^T F

    Raises ``IllConditionedError`` if the inner matrix is near singular.
    """
    if not tau > 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    k = F.shape[1]
    U = np.hstack([grad, F])
    V = np.hstack([F, -grad])
    inner = np.eye(2 * k) + 0.5 * tau * (V.T @ U)
    return F - tau * (U @ (invert_small(inner) @ (V.T @ F)))


def is_stationary(X, F, G, grad, rtol=STATIONARY_RTOL):
    """True when the Riemannian gradient ``(grad F^T - F grad^T) F`` is negligible.

    The scale is ``||X||_F ||G||_F``, the size of the data term in ``grad``.
    """
    A = grad @ F.T - F @ grad.T
    scale = np.linalg.norm(X) * np.linalg.norm(G)
    return bool(np.linalg.norm(A @ F) <= rtol * max(scale, np.finfo(float).tiny))


class LineSearchResult(NamedTuple):
    F: np.ndarray
    tau: float
    accepted: bool
    halvings: int
    cost: float


def line_search_f(X, F, G, tau, *, max_halvings=40, tau_max=TAU_MAX,
                  cost=frobenius_cost, gradient=gradient_f, cost0=None):
    """One Cayley step on ``F`` with the doubling/halving step-size rule.

    The step is accepted as soon as it strictly lowers ``cost(X, ., G)``;
    ``tau`` is halved on every rejection. An accepted step returns the
    doubled step size (capped at ``tau_max``) for the next call. If
    ``max_halvings`` halvings never find a decrease, ``F`` comes back
    unchanged with ``accepted=False`` and the reduced ``tau``, floored at
    ``TAU_MIN``.
    """
    c0 = cost(X, F, G) if cost0 is None else cost0
    R = gradient(X, F, G)
    for h in range(max_halvings + 1):
        try:
            Y = cayley_step(F, R, tau)
        except IllConditionedError:
            Y = None
        if Y is not None and np.all(np.isfinite(Y)):
            c = cost(X, Y, G)
            if c0 - c > 0:
                return LineSearchResult(Y, min(2.0 * tau, tau_max), True, h, c)
        if h < max_halvings:
            tau = tau / 2.0
    return LineSearchResult(F, max(tau, TAU_MIN), False, max_halvings, c0)


def factorize_continuous(X, opts, init="svd", F0=None, callback=None):
    """Fit ``X ~ F G^T`` with orthonormal ``F`` and nonnegative ``G``.

    Each outer iteration sets ``G = [X^T F]_+`` and then takes one
    line-searched Cayley step on ``F``. Stops when the objective decrease
    falls in ``[0, epsilon]`` or after ``max_iters`` iterations. ``F0``
    overrides ``init``. ``callback(i, F, G)``, if given, is called on the
    initial state (``i = 0``) and after every iteration; its return values
    are kept in ``result.callback_values``.
    """
    if not isinstance(opts, ContinuousOptions):
        opts = ContinuousOptions(**opts)
    X = as_matrix(X, "X")
    if opts.k > min(X.shape):
        raise ValueError(f"k={opts.k} exceeds min{X.shape}")
    t0 = time.perf_counter()
    F = initial_f(X, opts.k, init, opts.seed) if F0 is None else as_matrix(F0, "F0").copy()
    _check_orthonormal(F)
    G = update_g(X, F, check=False)
    trace = [frobenius_cost(X, F, G)]
    values = [] if callback is not None else None
    if callback is not None:
        values.append(callback(0, F, G))

    tau = float(opts.tau_init)
    accepted = stalled = 0
    worst_gap = orthogonality_gap(F)
    stationary = False
    termination = "max_iters"
    it = 0
    for it in range(1, opts.max_iters + 1):
        G = update_g(X, F, check=False)
        ls = line_search_f(X, F, G, tau, max_halvings=opts.max_halvings,
                           tau_max=opts.tau_max)
        F, tau = ls.F, ls.tau
        worst_gap = max(worst_gap, orthogonality_gap(F))
        if ls.accepted:
            accepted += 1
            trace.append(ls.cost)
        else:
            stalled += 1
            stationary = stationary or is_stationary(X, F, G, gradient_f(X, F, G))
            trace.append(frobenius_cost(X, F, G))
        if callback is not None:
            values.append(callback(it, F, G))
        if converged(trace, opts.epsilon):
            # a start that is already stationary is converged, not stalled
            termination = "threshold" if accepted or stationary else "stalled"
            break

    return FactorizationResult(
        F=F, G=G, objective_trace=np.asarray(trace), iterations=it,
        termination=termination, elapsed_seconds=time.perf_counter() - t0,
        method="sonmf", accepted_steps=accepted, stalled_steps=stalled,
        callback_values=values,
        extras={"init": init if F0 is None else "given", "final_tau": tau,
                "orthogonality_max": worst_gap},
    )
