"""Readout-error mitigation by linear filtering through a confusion matrix.

``B[actual, correct] = P(read actual | prepared correct)``.  Indices follow
the simulator layout (qubit 0 is the least-significant bit), so the
tensor-product matrix is ``kron(B_{n-1}, ..., B_1, B_0)``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

COND_LIMIT = 1e8


class MitigationError(ValueError):
    """Raised when the confusion matrix cannot be used for filtering."""


@dataclass(frozen=True)
class ConfusionMatrix:
    matrix: np.ndarray
    n: int

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (2**self.n, 2**self.n):
            raise ValueError(f"expected a {2**self.n}x{2**self.n} matrix, got {m.shape}")
        if np.any(m < -1e-12) or np.any(m > 1 + 1e-12):
            raise ValueError("entries must lie in [0, 1]")
        if not np.allclose(m.sum(axis=0), 1.0, atol=1e-9):
            raise ValueError("columns must sum to 1")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return 2**self.n

    @property
    def condition_number(self) -> float:
        return float(np.linalg.cond(self.matrix))

    def apply(self, v) -> np.ndarray:
        """Forward model ``e = B v``."""
        return self.matrix @ np.asarray(v, dtype=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        from .simulator import bitstring

        w.writerow(["actual"] + [bitstring(j, self.n) for j in range(self.dim)])
        for i, row in enumerate(self.matrix):
            w.writerow([bitstring(i, self.n)] + [repr(float(x)) for x in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ConfusionMatrix":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise ValueError("empty matrix file")
        n = len(rows[0][1])
        m = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
        return cls(m, n)


def _single(p01: float, p10: float) -> np.ndarray:
    for p in (p01, p10):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"flip probability {p} outside [0, 1]")
    return np.array([[1 - p01, p10], [p01, 1 - p10]])


def calibration_matrix(readout_flip: Sequence[Sequence[float]]) -> ConfusionMatrix:
    """Tensor-product confusion matrix from per-qubit ``(P(1|0), P(0|1))`` pairs."""
    blocks = [_single(p01, p10) for p01, p10 in readout_flip]
    if not blocks:
        raise ValueError("need at least one qubit")
    # qubit 0 is the fastest-varying index, hence the reversed Kronecker order
    return ConfusionMatrix(reduce(np.kron, blocks[::-1]), len(blocks))


@dataclass(frozen=True)
class FilterResult:
    """Mitigated distribution plus the unclipped linear solution."""

    v: np.ndarray
    raw: np.ndarray
    condition_number: float

    @property
    def clipped_mass(self) -> float:
        return float(-self.raw[self.raw < 0].sum())


def apply_filter(B: ConfusionMatrix, e, cond_limit: float = COND_LIMIT) -> FilterResult:
    """Solve ``B v = e``; clip negative entries and renormalise."""
    e = np.asarray(e, dtype=float)
    if e.shape != (B.dim,):
        raise ValueError(f"expected a length-{B.dim} vector, got shape {e.shape}")
    if not np.isclose(e.sum(), 1.0, atol=1e-9):
        raise ValueError(f"e must sum to 1, got {e.sum()}")
    cond = B.condition_number
    if not np.isfinite(cond) or cond > cond_limit:
        raise MitigationError(f"confusion matrix is near-singular (condition number {cond:.3g})")
    if np.array_equal(B.matrix, np.eye(B.dim)):
        return FilterResult(e.copy(), e.copy(), cond)
    raw = np.linalg.solve(B.matrix, e)
    v = np.clip(raw, 0.0, None)
    v = v / v.sum()
    return FilterResult(v, raw, cond)


def counts_vector(counts) -> np.ndarray:
    """Empirical distribution of a Counts object as a dense vector."""
    from .simulator import bitstring_index

    e = np.zeros(2**counts.width)
    for key, v in counts.histogram.items():
        e[bitstring_index(key)] += v
    return e / counts.shots


def mitigate_counts(counts, B: ConfusionMatrix) -> dict[str, float]:
    """Filtered quasi-distribution (clipped, renormalised) keyed by bitstring."""
    from .simulator import bitstring

    res = apply_filter(B, counts_vector(counts))
    return {bitstring(i, B.n): float(p) for i, p in enumerate(res.v) if p > 0}
