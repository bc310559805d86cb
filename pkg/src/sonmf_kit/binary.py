"""Semi-orthogonal NMF for binary data under a Bernoulli/logistic model.

Each ``X_ij ~ Bernoulli(sigmoid([F G^T]_ij))`` with orthonormal ``F`` and
nonnegative ``G``. ``G`` takes damped coordinate-wise Newton steps and ``F``
reuses the Cayley line search of the continuous solver with the
log-likelihood gradient.
"""

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit

from .linalg import as_matrix
from .matio import check_binary
from .result import FactorizationResult, converged
from .sonmf import (TAU_MAX, _check_orthonormal, initial_f, is_stationary,
                    line_search_f, orthogonality_gap)

HESSIAN_FLOOR = 1e-12


@dataclass
class BinaryOptions:
    k: int
    max_iters: int = 500
    epsilon: float = 1e-4
    eta: float = 0.05
    tau_init: float = 2.0
    max_halvings: int = 40
    seed: Optional[int] = None
    tau_max: float = TAU_MAX

    def __post_init__(self):
        if int(self.k) < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        # eta = 0 is allowed and freezes G
        if not 0 <= self.eta <= 1:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        if not self.tau_init > 0:
            raise ValueError(f"tau_init must be > 0, got {self.tau_init}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        self.k = int(self.k)


def sigmoid_matrix(M):
    """Entrywise logistic function, overflow-safe for large ``|m|``."""
    return expit(np.asarray(M, dtype=np.float64))


def _cost_total(X, F, G):
    theta = F @ G.T
    return float(np.sum(np.logaddexp(0.0, theta) - X * theta))


def binary_cost(X, F, G, check=True):
    """Bernoulli negative log-likelihood of ``X`` under ``sigmoid(F G^T)``.

    Returns ``(total, mean)`` where ``total = sum log(1 + e^theta) - X theta``
    and ``mean = total / X.size``.
    """
    if check:
        check_binary(X)
    total = _cost_total(X, F, G)
    return total, total / X.size


def newton_update_g(X, F, G, eta):
    """Damped diagonal Newton step on ``G`` followed by projection onto ``G >= 0``.

    ``D1 = (P - X)^T F`` is the gradient and ``D2 = (P (1 - P))^T F**2`` the
    diagonal of the Hessian, floored at ``1e-12``.
    """
    P = sigmoid_matrix(F @ G.T)
    D1 = (P - X).T @ F
    D2 = np.maximum((P * (1.0 - P)).T @ (F * F), HESSIAN_FLOOR)
    return np.maximum(G - eta * D1 / D2, 0.0)


def gradient_g_binary(X, F, G):
    return (sigmoid_matrix(F @ G.T) - X).T @ F


def gradient_f_binary(X, F, G):
    """Gradient of the total binary cost with respect to ``F``."""
    if F.shape[0] != X.shape[0] or G.shape[0] != X.shape[1] or F.shape[1] != G.shape[1]:
        raise ValueError(f"shape mismatch: X {X.shape}, F {F.shape}, G {G.shape}")
    return (sigmoid_matrix(F @ G.T) - X) @ G


def factorize_binary(X, opts, init="svd", F0=None, callback=None):
    """Fit a binary ``X`` with orthonormal ``F`` and nonnegative ``G``.

    ``G`` starts at ``[X^T F0]_+``. Each iteration takes one Newton step on
    ``G`` and one line-searched Cayley step on ``F``; the objective trace
    holds the total negative log-likelihood. ``callback`` behaves as in
    :func:`sonmf_kit.sonmf.factorize_continuous`.
    """
    if not isinstance(opts, BinaryOptions):
        opts = BinaryOptions(**opts)
    X = check_binary(as_matrix(X, "X"))
    if opts.k > min(X.shape):
        raise ValueError(f"k={opts.k} exceeds min{X.shape}")
    t0 = time.perf_counter()
    F = initial_f(X, opts.k, init, opts.seed) if F0 is None else as_matrix(F0, "F0").copy()
    _check_orthonormal(F)
    G = np.maximum(X.T @ F, 0.0)
    trace = [_cost_total(X, F, G)]
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
        if opts.eta > 0:
            G = newton_update_g(X, F, G, opts.eta)
        ls = line_search_f(X, F, G, tau, max_halvings=opts.max_halvings,
                           tau_max=opts.tau_max, cost=_cost_total,
                           gradient=gradient_f_binary)
        F, tau = ls.F, ls.tau
        worst_gap = max(worst_gap, orthogonality_gap(F))
        if ls.accepted:
            accepted += 1
        else:
            stalled += 1
            stationary = stationary or is_stationary(X, F, G, gradient_f_binary(X, F, G))
        trace.append(ls.cost)
        if callback is not None:
            values.append(callback(it, F, G))
        if converged(trace, opts.epsilon):
            termination = "threshold" if accepted or stationary else "stalled"
            break

    return FactorizationResult(
        F=F, G=G, objective_trace=np.asarray(trace), iterations=it,
        termination=termination, elapsed_seconds=time.perf_counter() - t0,
        method="sonmf-binary", accepted_steps=accepted, stalled_steps=stalled,
        callback_values=values,
        extras={"init": init if F0 is None else "given", "final_tau": tau,
                "orthogonality_max": worst_gap,
                "eta": opts.eta},
    )
