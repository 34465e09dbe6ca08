"""Argument checks shared by the estimators and the command line."""

from __future__ import annotations

import numpy as np

from .circuit import Circuit
from .simulator import NoiseSpec


def check_probability(p, name: str = "p") -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0 or np.isnan(p):
        raise ValueError(f"{name} must lie in [0, 1], got {p}")
    return p


def check_shots(shots, allow_none: bool = True) -> int | None:
    if shots is None:
        if allow_none:
            return None
        raise ValueError("a shot count is required")
    if isinstance(shots, bool) or int(shots) != shots or shots < 1:
        raise ValueError(f"shots must be a positive integer, got {shots!r}")
    return int(shots)


def check_seed(seed) -> int:
    if isinstance(seed, bool) or int(seed) != seed or seed < 0:
        raise ValueError(f"seed must be a non-negative integer, got {seed!r}")
    return int(seed)


def check_distributions(X, n: int | None = None) -> np.ndarray:
    """Coerce to a 2-D array of probability rows (one row per distribution)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D array of distributions, got {X.ndim} dimensions")
    if n is not None and X.shape[1] != 2**n:
        raise ValueError(f"rows must have length {2**n}, got {X.shape[1]}")
    if np.any(X < -1e-12):
        raise ValueError("distributions must be non-negative")
    if not np.allclose(X.sum(axis=1), 1.0, atol=1e-9):
        raise ValueError("every row must sum to 1")
    return X


def check_circuit(c) -> Circuit:
    if not isinstance(c, Circuit):
        raise TypeError(f"expected a Circuit, got {type(c).__name__}")
    return c


def check_noise(ns) -> NoiseSpec:
    if ns is None:
        return NoiseSpec()
    if isinstance(ns, dict):
        return NoiseSpec.from_dict(ns)
    if not isinstance(ns, NoiseSpec):
        raise TypeError(f"expected a NoiseSpec, got {type(ns).__name__}")
    return ns
