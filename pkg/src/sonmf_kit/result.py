from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

TERMINATIONS = ("threshold", "max_iters", "stalled")


@dataclass
class FactorizationResult:
    """Fitted factors and run bookkeeping for any factorizer.

    ``objective_trace[0]`` is the objective at the initial state and
    ``objective_trace[i]`` the value after outer iteration ``i``. For the
    continuous methods the objective is ``||X - F G^T||_F^2``; for the
    binary ones it is the total Bernoulli negative log-likelihood.
    """

    F: np.ndarray
    G: np.ndarray
    objective_trace: np.ndarray
    iterations: int
    termination: str
    elapsed_seconds: float
    method: str
    accepted_steps: int = 0
    stalled_steps: int = 0
    callback_values: Optional[list] = None
    extras: Dict[str, Any] = field(default_factory=dict)

    @property
    def objective(self):
        return float(self.objective_trace[-1])

    def manifest(self):
        """JSON-ready summary (factors excluded; they go to matrix files)."""
        return {
            "method": self.method,
            "shape_F": list(self.F.shape),
            "shape_G": list(self.G.shape),
            "iterations": int(self.iterations),
            "termination": self.termination,
            "elapsed_seconds": float(self.elapsed_seconds),
            "accepted_steps": int(self.accepted_steps),
            "stalled_steps": int(self.stalled_steps),
            "final_objective": self.objective,
            "objective_trace": [float(v) for v in self.objective_trace],
            **{k: v for k, v in self.extras.items()},
        }


def converged(trace, epsilon):
    """Threshold rule: the last decrease is non-negative and at most ``epsilon``."""
    if len(trace) < 2:
        return False
    drop = trace[-2] - trace[-1]
    return 0.0 <= drop <= epsilon
