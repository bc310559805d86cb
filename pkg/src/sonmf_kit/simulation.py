"""Seeded synthetic scenarios and multi-trial study runners.

Every trial ``i`` draws its own instance from ``base_seed + i`` and all
methods in that trial factorize the identical matrix. Summaries are
aggregated in trial order, so a parallel run gives the same output as a
serial one.
"""

import csv
import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional

import numpy as np

from .api import fit, is_binary_method
from .binary import sigmoid_matrix
from .linalg import qr_orthonormalize
from .metrics import average_residual, evaluate, mean_cost, probability_error

SCENARIOS = ("cont1", "cont2", "cont3", "binary", "rank_deficient")
RANK_DEFICIENT_TRUE_RANK = 15
CONTINUOUS_SD = 0.3
BINARY_SD = 0.1


@dataclass
class ScenarioSpec:
    """Synthetic instance description.

    ``k`` is the fitted rank. ``true_rank`` defaults to ``k`` except for
    ``rank_deficient`` (15), which reuses the ``cont3`` generator.
    ``noise_sd`` defaults to 0.3 for continuous and 0.1 for binary data.
    """

    scenario_id: str
    p: int = 500
    n: int = 500
    k: int = 10
    true_rank: Optional[int] = None
    noise_sd: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.scenario_id not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario_id!r}; expected one of {SCENARIOS}")
        if self.true_rank is None:
            self.true_rank = RANK_DEFICIENT_TRUE_RANK if self.scenario_id == "rank_deficient" else self.k
        if self.noise_sd is None:
            self.noise_sd = BINARY_SD if self.binary else CONTINUOUS_SD
        if int(self.k) < 1:
            raise ValueError(f"fit rank k must be >= 1, got {self.k}")
        if not 1 <= int(self.true_rank) <= min(self.p, self.n):
            raise ValueError(f"true_rank={self.true_rank} must lie in [1, min(p, n)={min(self.p, self.n)}]")
        if self.k > min(self.p, self.n):
            raise ValueError(f"fit rank k={self.k} exceeds min(p, n)")
        if self.noise_sd < 0:
            raise ValueError(f"noise_sd must be >= 0, got {self.noise_sd}")
        self.p, self.n, self.k, self.true_rank = int(self.p), int(self.n), int(self.k), int(self.true_rank)

    @property
    def binary(self):
        return self.scenario_id == "binary"


def _nonneg_orthonormal(p, r, rng):
    # contiguous row blocks give disjoint supports, hence exactly orthogonal columns
    F = np.zeros((p, r))
    for j, rows in enumerate(np.array_split(np.arange(p), r)):
        F[rows, j] = rng.uniform(0.0, 1.0, rows.size)
    return F / np.linalg.norm(F, axis=0)


def generate_scenario(spec):
    """Draw ``(X, F_true, G_true, P_true)``; ``P_true`` is ``None`` unless binary.

    All draws come from one generator seeded with ``spec.seed`` in a fixed
    order: F, G, noise, then (binary only) the Bernoulli uniforms.
    """
    rng = np.random.default_rng(spec.seed)
    p, n, r, sd = spec.p, spec.n, spec.true_rank, spec.noise_sd
    sid = spec.scenario_id
    if sid == "binary":
        F = rng.normal(0.0, 1.0, (p, r))
        G = rng.uniform(0.0, 1.0, (n, r))
        P = sigmoid_matrix(F @ G.T)
        Q = np.clip(P + rng.normal(0.0, sd, (p, n)), 0.0, 1.0)
        X = (rng.random((p, n)) < Q).astype(np.float64)
        return X, F, G, P
    if sid == "cont1":
        F = rng.uniform(0.0, 1.0, (p, r))
    elif sid == "cont2":
        F = _nonneg_orthonormal(p, r, rng)
    else:
        F = qr_orthonormalize(rng.normal(0.0, 1.0, (p, r)))
    G = rng.uniform(0.0, 2.0, (n, r))
    X = F @ G.T + rng.normal(0.0, sd, (p, n))
    return X, F, G, None


def matrix_digest(X):
    return hashlib.sha256(np.ascontiguousarray(X, dtype=np.float64).tobytes()).hexdigest()


@dataclass
class MethodSpec:
    """One column of a study: a method name plus keyword options for ``fit``."""

    label: str
    method: str
    options: Dict = field(default_factory=dict)


def _check_pairing(spec, methods):
    for m in methods:
        if is_binary_method(m.method) != spec.binary:
            kind = "binary" if spec.binary else "continuous"
            raise ValueError(f"method {m.method!r} cannot run on {kind} scenario {spec.scenario_id!r}")
    labels = [m.label for m in methods]
    if len(set(labels)) != len(labels):
        raise ValueError(f"duplicate method labels: {labels}")


def method_seed(data_seed):
    """Seed for stochastic initializations, independent of the data stream.

    Reusing the data seed would let a random start replay the generator's
    first draw, which for ``cont3`` is the true ``F`` itself.
    """
    return int(np.random.SeedSequence([int(data_seed), 1]).generate_state(1)[0])


def _run_one_trial(spec, methods, max_iters, threshold):
    X, Ft, Gt, Pt = generate_scenario(spec)
    truth = mean_cost(X, Ft, Gt) if spec.binary else average_residual(X, Ft, Gt)
    callback = None
    if Pt is not None:
        callback = lambda i, F, G: probability_error(Pt, F, G)  # noqa: E731
    runs = {}
    for m in methods:
        opts = dict(m.options)
        opts.setdefault("seed", method_seed(spec.seed))
        res = fit(X, m.method, spec.k, max_iters=max_iters, callback=callback, **opts)
        rec = evaluate(X, res.F, res.G, binary=spec.binary, F_true=Ft, G_true=Gt,
                       P_true=Pt, result=res, threshold=threshold)
        if rec.iterations_to_threshold is None:
            # never met the rule: charge the full run
            rec.iterations_to_threshold = res.iterations
        runs[m.label] = {
            "metrics": rec.to_dict(),
            "trace": (res.objective_trace / X.size).tolist(),
            "eps_p_trace": res.callback_values,
            "termination": res.termination,
            "orthogonality_max": res.extras.get("orthogonality_max"),
        }
    return {"seed": spec.seed, "x_digest": matrix_digest(X), "true_level": truth, "runs": runs}


def _trial_task(args):
    return _run_one_trial(*args)


def _pad(trace, length):
    trace = list(trace)
    return trace + [trace[-1]] * (length - len(trace))


def _mean_dict(dicts):
    out = {}
    for key in dicts[0]:
        vals = [d[key] for d in dicts]
        if all(isinstance(v, bool) for v in vals):
            out[key] = bool(any(vals))
        elif all(isinstance(v, (int, float)) for v in vals):
            out[key] = float(np.mean(vals))
        else:
            out[key] = None
    return out


@dataclass
class TrialSummary:
    """Per-method trial means, mean traces and the raw per-trial records.

    ``traces[label]`` is the per-entry objective (average residual or mean
    cost) averaged over trials, each trial padded with its final value to
    ``max_iters + 1`` points. ``eps_p_traces`` is filled for binary studies.
    """

    config: Dict
    trials: int
    methods: Dict[str, Dict]
    traces: Dict[str, List[float]]
    eps_p_traces: Dict[str, List[float]]
    true_level: float
    per_trial: List[Dict]

    def to_dict(self):
        return asdict(self)

    def to_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_traces(self, path, which="objective"):
        """Long-format CSV with columns ``iteration, method, value``."""
        traces = self.traces if which == "objective" else self.eps_p_traces
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "method", "value"])
            for label, trace in traces.items():
                for i, v in enumerate(trace):
                    w.writerow([i, label, repr(float(v))])


def run_trials(spec, methods, trials, max_iters=500, threshold=1e-4, jobs=1):
    """Run every method on ``trials`` independent instances of ``spec``.

    Trial ``i`` draws its data from seed ``spec.seed + i``; stochastic
    initializations get :func:`method_seed` of that. ``jobs > 1`` spreads
    trials over processes.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    methods = [m if isinstance(m, MethodSpec) else MethodSpec(m, m) for m in methods]
    if not methods:
        raise ValueError("no methods given")
    _check_pairing(spec, methods)
    tasks = [(replace(spec, seed=spec.seed + i), methods, max_iters, threshold)
             for i in range(trials)]
    if jobs > 1 and trials > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_trial = list(pool.map(_trial_task, tasks))
    else:
        per_trial = [_trial_task(t) for t in tasks]

    length = max_iters + 1
    summary_methods, traces, eps_traces = {}, {}, {}
    for m in methods:
        runs = [t["runs"][m.label] for t in per_trial]
        summary_methods[m.label] = {"method": m.method, "options": m.options,
                                    **_mean_dict([r["metrics"] for r in runs])}
        traces[m.label] = np.mean([_pad(r["trace"], length) for r in runs], axis=0).tolist()
        if spec.binary:
            eps_traces[m.label] = np.mean([_pad(r["eps_p_trace"], length) for r in runs],
                                          axis=0).tolist()
    config = {"scenario": asdict(spec), "trials": trials, "max_iters": max_iters,
              "threshold": threshold,
              "methods": [asdict(m) for m in methods]}
    return TrialSummary(config=config, trials=trials, methods=summary_methods,
                        traces=traces, eps_p_traces=eps_traces,
                        true_level=float(np.mean([t["true_level"] for t in per_trial])),
                        per_trial=per_trial)


def run_init_study(spec, inits=("svd", "kmeans", "random"), trials=20, max_iters=500, jobs=1,
                   epsilon=None):
    """Continuous SONMF from each initialization on shared instances."""
    if spec.binary:
        raise ValueError("the initialization study needs a continuous scenario")
    extra = {} if epsilon is None else {"epsilon": float(epsilon)}
    methods = [MethodSpec(f"sonmf-{i}", "sonmf", {"init": i, **extra}) for i in inits]
    return run_trials(spec, methods, trials, max_iters=max_iters, jobs=jobs)


def run_step_size_study(spec, etas=(0.05, 0.025, 0.01, 0.005, 0.001), trials=1,
                        max_iters=500, jobs=1):
    """Binary SONMF at several Newton step sizes on shared instances.

    ``true_level`` in the summary is the mean cost of the data under the
    generating factors.
    """
    if not spec.binary:
        raise ValueError("the step-size study needs the binary scenario")
    methods = [MethodSpec(f"eta={e:g}", "sonmf-binary", {"eta": float(e)}) for e in etas]
    return run_trials(spec, methods, trials, max_iters=max_iters, jobs=jobs)


def first_crossing(trace, level):
    """First index at which ``trace`` is at or below ``level``, else ``None``."""
    hits = np.nonzero(np.asarray(trace) <= level)[0]
    return int(hits[0]) if hits.size else None
