"""Single entry point that fits any supported method by name."""

from .baselines import BaselineOptions, factorize_baseline
from .binary import BinaryOptions, factorize_binary
from .sonmf import INITS, ContinuousOptions, factorize_continuous

ALL_METHODS = ("sonmf", "sonmf-binary", "nmf", "onmf", "semi", "lognmf")
BINARY_METHODS = ("sonmf-binary", "lognmf")


def is_binary_method(method):
    return method in BINARY_METHODS


def fit(X, method, k, *, max_iters=500, epsilon=1e-4, seed=None, init="svd",
        tau=None, eta=None, lognmf_step=None, callback=None):
    """Fit ``X`` with ``method`` at rank ``k``.

    ``tau`` (initial Cayley step) and ``init`` apply to the two SONMF
    variants, ``eta`` to ``sonmf-binary`` only; passing them to a method that
    has no such knob raises ``ValueError`` rather than being silently dropped.
    """
    if method not in ALL_METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {ALL_METHODS}")
    if init not in INITS:
        raise ValueError(f"unknown init {init!r}; expected one of {INITS}")
    sonmf_family = method in ("sonmf", "sonmf-binary")
    if not sonmf_family and (tau is not None or init != "svd"):
        raise ValueError(f"--tau/--init do not apply to {method}")
    if eta is not None and method != "sonmf-binary":
        raise ValueError(f"--eta applies only to sonmf-binary, not {method}")
    if lognmf_step is not None and method != "lognmf":
        raise ValueError(f"lognmf_step applies only to lognmf, not {method}")

    common = dict(k=k, max_iters=max_iters, epsilon=epsilon, seed=seed)
    if method == "sonmf":
        opts = ContinuousOptions(**common, **({} if tau is None else {"tau_init": tau}))
        return factorize_continuous(X, opts, init=init, callback=callback)
    if method == "sonmf-binary":
        extra = {}
        if tau is not None:
            extra["tau_init"] = tau
        if eta is not None:
            extra["eta"] = eta
        return factorize_binary(X, BinaryOptions(**common, **extra), init=init,
                                callback=callback)
    extra = {} if lognmf_step is None else {"lognmf_step": lognmf_step}
    return factorize_baseline(X, BaselineOptions(method=method, **common, **extra),
                              callback=callback)
