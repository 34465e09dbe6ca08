"""Prefix tracing of phase fidelity with classical completion of missing CNOTs.

For each indexed gate ``i`` the circuit is run up to gate ``i``, read out in
the X basis, and the unexecuted CNOTs are applied to the readout strings as
XORs.  In the X basis a CNOT swaps roles, so ``CNOT(c, t)`` becomes
``bit[c] ^= bit[t]``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .circuit import Circuit, Gate, indexed_schedule, missing_gates, prefix
from .simulator import Counts, NoiseSpec, outcome_probabilities, sample_counts
from .steane import estimate, phase_flip_failures, pz_from_probabilities

MIN_THRESHOLD = 0.02
CI_MULTIPLIER = 3.0


def _xor_pairs(missing: Sequence[Gate], basis: str, n: int) -> list[tuple[int, int]]:
    """``(source, dest)`` bit pairs meaning ``bit[dest] ^= bit[source]``."""
    if basis not in ("Z", "X"):
        raise ValueError(f"basis must be 'Z' or 'X', got {basis!r}")
    pairs = []
    for g in missing:
        if g.name != "cx":
            raise ValueError(f"only CNOTs can be completed classically, got {g}")
        c, t = g.qubits
        if max(c, t) >= n:
            raise ValueError(f"{g} acts outside the {n} measured qubits")
        pairs.append((c, t) if basis == "Z" else (t, c))
    return pairs


def _apply_xors(key: str, pairs) -> str:
    bits = [int(ch) for ch in key]
    for src, dst in pairs:
        bits[dst] ^= bits[src]
    return "".join(map(str, bits))


def xor_complete(counts: Counts, missing: Sequence[Gate], basis: str | None = None) -> Counts:
    """Rewrite every readout string as if ``missing`` CNOTs had run before measurement."""
    basis = basis or counts.basis
    pairs = _xor_pairs(missing, basis, counts.width)
    hist: dict[str, int] = {}
    for key, v in counts.histogram.items():
        new = _apply_xors(key, pairs)
        hist[new] = hist.get(new, 0) + v
    return Counts(counts.basis, counts.shots, hist)


def xor_complete_probs(probs: np.ndarray, missing: Sequence[Gate], basis: str, n: int) -> np.ndarray:
    """Exact analogue of :func:`xor_complete` on a dense outcome vector (qubit 0 = LSB)."""
    idx = np.arange(2**n)
    for src, dst in _xor_pairs(missing, basis, n):
        idx = idx ^ (((idx >> src) & 1) << dst)
    out = np.zeros_like(probs)
    np.add.at(out, idx, probs)
    return out


# --------------------------------------------------------------------------
# curves


@dataclass(frozen=True)
class CurvePoint:
    gate_index: int
    phase_fidelity: float
    ci_low: float
    ci_high: float

    @property
    def half_width(self) -> float:
        return (self.ci_high - self.ci_low) / 2


@dataclass(frozen=True)
class Curve:
    points: tuple[CurvePoint, ...]
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        idx = [p.gate_index for p in self.points]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("gate indices must be strictly increasing")
        for p in self.points:
            if not 0.0 <= p.ci_low <= p.phase_fidelity <= p.ci_high <= 1.0:
                raise ValueError(f"point {p} is not a valid fidelity with interval")

    @property
    def indices(self) -> list[int]:
        return [p.gate_index for p in self.points]

    @property
    def values(self) -> np.ndarray:
        return np.array([p.phase_fidelity for p in self.points])

    def __len__(self):
        return len(self.points)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["gate_index", "phase_fidelity", "ci_low", "ci_high"])
        for p in self.points:
            w.writerow([p.gate_index, repr(p.phase_fidelity), repr(p.ci_low), repr(p.ci_high)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, label: str = "") -> "Curve":
        rows = list(csv.DictReader(io.StringIO(text)))
        pts = [
            CurvePoint(int(r["gate_index"]), float(r["phase_fidelity"]), float(r["ci_low"]), float(r["ci_high"]))
            for r in rows
        ]
        return cls(pts, label)


def _fidelity_point(i: int, failures: int, shots: int) -> CurvePoint:
    est = estimate(failures, shots)
    return CurvePoint(i, math.sqrt(1 - est.p), math.sqrt(1 - est.ci_high), math.sqrt(1 - est.ci_low))


def _prefix_seed(seed: int, i: int) -> int:
    return int(np.random.SeedSequence([seed, i]).generate_state(1)[0])


def trace_point(c: Circuit, ns: NoiseSpec, i: int, shots: int | None = None, seed: int = 0) -> CurvePoint:
    pre = prefix(c, i)
    ns_i = ns.injections_upto(i)
    missing = missing_gates(c, i)
    if shots is None:
        if not ns.gate_noise_free:
            raise ValueError("exact tracing needs a noise spec without stochastic gate noise")
        probs = xor_complete_probs(outcome_probabilities(pre, ns_i, "X"), missing, "X", c.num_qubits)
        v = math.sqrt(1 - pz_from_probabilities(probs))
        return CurvePoint(i, v, v, v)
    counts = xor_complete(sample_counts(pre, ns_i, "X", shots, _prefix_seed(seed, i)), missing, "X")
    return _fidelity_point(i, phase_flip_failures(counts), shots)


def trace_curve(c: Circuit, ns: NoiseSpec, shots: int | None = None, seed: int = 0, label: str = "") -> Curve:
    """Phase fidelity ``sqrt(1 - pz)`` after each indexed gate 1..n.

    ``shots=None`` computes exact distributions (no stochastic gate noise
    allowed).  Otherwise each prefix is sampled with its own seed stream.
    """
    n = len(indexed_schedule(c))
    if n < 1:
        raise ValueError("circuit has no indexed two-qubit gates")
    pts = [trace_point(c, ns, i, shots, seed) for i in range(1, n + 1)]
    return Curve(pts, label or c.label)


def reference_curve(c: Circuit, ns: NoiseSpec, shots: int | None = None, seed: int = 0) -> Curve:
    """The same trace with every coherent injection removed."""
    return trace_curve(c, ns.without_injections(), shots, seed, label="reference")


# --------------------------------------------------------------------------
# valleys


@dataclass(frozen=True)
class ValleyReport:
    valley_index: int
    depth: float
    recovered: bool
    threshold: float = field(default=0.0)

    def to_dict(self) -> dict:
        return {
            "valley_index": self.valley_index,
            "depth": self.depth,
            "recovered": self.recovered,
            "threshold": self.threshold,
        }


def detection_threshold(observed: Curve, reference: Curve) -> float:
    """``max(3 * pooled CI half-width, 0.02)``, pooling the widest intervals of both curves."""
    ho = max((p.half_width for p in observed.points), default=0.0)
    hr = max((p.half_width for p in reference.points), default=0.0)
    return max(CI_MULTIPLIER * math.hypot(ho, hr), MIN_THRESHOLD)


def detect_valley(observed: Curve, reference: Curve) -> ValleyReport | None:
    """Locate the largest drop of ``observed`` below ``reference``.

    Returns None when the drop does not exceed the detection threshold.
    ``recovered`` is set when ``observed`` later climbs above its valley
    value by more than the threshold.
    """
    if observed.indices != reference.indices:
        raise ValueError("curves must share gate indices")
    if not observed.points:
        return None
    gap = reference.values - observed.values
    k = int(np.argmax(gap))  # earliest maximiser
    thr = detection_threshold(observed, reference)
    if gap[k] <= thr:
        return None
    later = observed.values[k + 1 :]
    recovered = bool(later.size and later.max() - observed.values[k] > thr)
    return ValleyReport(observed.indices[k], float(gap[k]), recovered, thr)


def infidelity_reduction(compensated: Curve, uncompensated: Curve, reference: Curve) -> float:
    """Relative cut in final excess phase infidelity versus the reference curve.

    Excess infidelity is ``reference - curve`` at the last gate; the result is
    ``1 - excess(compensated) / excess(uncompensated)``.
    """
    ref = reference.values[-1]
    before = ref - uncompensated.values[-1]
    after = ref - compensated.values[-1]
    if before <= 0:
        return 0.0
    return float(1 - after / before)
