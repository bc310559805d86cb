"""Semi-orthogonal nonnegative matrix factorization and companion tools."""

__version__ = "0.1.0"

from .api import fit
from .baselines import BaselineOptions, factorize_baseline
from .binary import BinaryOptions, binary_cost, factorize_binary
from .result import FactorizationResult
from .sonmf import ContinuousOptions, factorize_continuous

__all__ = [
    "BaselineOptions", "BinaryOptions", "ContinuousOptions", "FactorizationResult",
    "binary_cost", "factorize_baseline", "factorize_binary", "factorize_continuous", "fit",
]
