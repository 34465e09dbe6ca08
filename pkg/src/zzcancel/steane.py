"""Steane [[7,1,3]] |+> preparation: codes, encoder circuits, error rates, fidelity.

Bit ``i`` of a readout string is virtual qubit ``i`` (leftmost character).
The Hamming code is fixed by the parity checks 0001111, 0110011, 1010101.
Z-basis readouts of an ideal |+>_L lie in that code, X-basis readouts in its
dual.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from statistics import NormalDist
from typing import Mapping, Sequence

import numpy as np

from .circuit import CNOT, Circuit, H, Partition, Topology, builtin_topology, validate_against_topology
from .simulator import (
    NOISELESS,
    Counts,
    Injection,
    NoiseSpec,
    StateVector,
    outcome_probabilities,
    run_state,
    trajectories,
)

CHECK_ROWS = ("0001111", "0110011", "1010101")
N = 7


@dataclass(frozen=True)
class LinearCode:
    n: int
    generators: tuple[str, ...]
    codewords: frozenset

    def __contains__(self, word: str) -> bool:
        return word in self.codewords

    def __len__(self):
        return len(self.codewords)

    @property
    def min_distance(self) -> int:
        return min(w.count("1") for w in self.codewords if "1" in w)

    def weight_enumerator(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for w in self.codewords:
            out[w.count("1")] = out.get(w.count("1"), 0) + 1
        return dict(sorted(out.items()))


def _xor(a: str, b: str) -> str:
    return "".join("1" if x != y else "0" for x, y in zip(a, b))


def span(generators, n: int = N) -> frozenset:
    words = {"0" * n}
    for g in generators:
        words |= {_xor(w, g) for w in words}
    return frozenset(words)


@lru_cache(maxsize=None)
def hamming_codes() -> tuple[LinearCode, LinearCode]:
    """The [7,4,3] Hamming code and its [7,3,4] dual."""
    dual = LinearCode(N, CHECK_ROWS, span(CHECK_ROWS))
    # every word orthogonal to all check rows
    words = frozenset(
        w
        for w in ("".join(bits) for bits in itertools.product("01", repeat=N))
        if all(sum(int(a) & int(b) for a, b in zip(w, h)) % 2 == 0 for h in CHECK_ROWS)
    )
    code = LinearCode(N, CHECK_ROWS + ("1" * N,), words)
    return code, dual


@lru_cache(maxsize=None)
def _membership_masks() -> tuple[np.ndarray, np.ndarray]:
    """Boolean lookup over basis indices (qubit 0 = LSB) for C and its dual."""
    code, dual = hamming_codes()
    idx = np.arange(2**N)
    strings = ["".join("1" if (i >> q) & 1 else "0" for q in range(N)) for i in idx]
    return np.array([s in code for s in strings]), np.array([s in dual for s in strings])


# --------------------------------------------------------------------------
# encoder circuits
#
# Gate lists use virtual qubits 0..6, which are also the code roles: the
# ideal Z-basis readout of virtual qubits 0..6 is a word of the Hamming code.
# Each variant ships with the physical layout it was designed on.


@dataclass(frozen=True)
class _Design:
    pivots: tuple[int, ...]
    cnots: tuple[tuple[int, int], ...]
    layout: tuple[int, ...]
    device: str


_DESIGNS = {
    # zero-overhead encoder on Melbourne qubits 4..10; gates 4 and 5 share a target
    "nine_gate": _Design(
        (0, 1, 2, 3),
        ((0, 4), (1, 0), (4, 5), (2, 6), (3, 6), (1, 2), (6, 5), (3, 6), (5, 1)),
        (4, 5, 6, 7, 10, 9, 8),
        "melbourne",
    ),
    # nine gates, one of them (0 -> 5) between uncoupled qubits; reduces to eight_gate
    "forced_source": _Design(
        (0, 1, 3, 5),
        ((0, 4), (3, 2), (2, 6), (5, 4), (1, 3), (5, 2), (0, 5), (1, 5), (0, 1)),
        (4, 5, 8, 6, 10, 9, 7),
        "melbourne",
    ),
    "sparse_17": _Design(
        (1, 2, 3, 5),
        (
            (3, 6), (1, 0), (0, 1), (3, 6), (0, 1), (2, 1), (1, 0), (3, 6), (1, 0),
            (5, 6), (1, 3), (0, 1), (3, 1), (6, 3), (6, 4), (3, 6), (5, 6),
        ),
        (0, 1, 2, 3, 6, 4, 5),
        "lagos",
    ),
}

FORCED_SITE = 7  # indexed gate where the forced-commutation pattern starts
VARIANTS = ("nine_gate", "eight_gate", "sparse_17", "sparse_18")


def _build(design: _Design, label: str) -> Circuit:
    gates = [H(q) for q in design.pivots] + [CNOT(a, b) for a, b in design.cnots]
    return Circuit(N, gates, label=label, qubit_map=design.layout)


def forced_commutation_source() -> tuple[Circuit, int]:
    """Nine-gate encoder holding ``CNOT(a,c); CNOT(b,c); CNOT(a,b)`` and the site of that pattern.

    The ``CNOT(a,c)`` acts on uncoupled device qubits, so this circuit is
    not topology-valid; reducing it yields the eight-gate encoder.
    """
    return _build(_DESIGNS["forced_source"], "forced_source"), FORCED_SITE


def _default(variant: str) -> Circuit:
    if variant in ("nine_gate", "sparse_17"):
        return _build(_DESIGNS[variant], variant)
    if variant == "eight_gate":
        from .rewrite import forced_commute_reduce

        src, site = forced_commutation_source()
        return replace_label(forced_commute_reduce(src, site), "eight_gate")
    if variant == "sparse_18":
        base = _build(_DESIGNS["sparse_17"], "sparse_18")
        # virtual 1 is a pivot already in |+>, so this CNOT leaves the state alone
        gates = base.gates[:4] + (CNOT(0, 1),) + base.gates[4:]
        return base.with_gates(gates)
    raise ValueError(f"unknown encoder variant {variant!r}; choose from {VARIANTS}")


def replace_label(c: Circuit, label: str) -> Circuit:
    from dataclasses import replace

    return replace(c, label=label)


def home_topology(variant: str) -> Topology:
    return builtin_topology("lagos" if variant.startswith("sparse") else "melbourne")


def _as_layout(map_) -> tuple[int, ...]:
    if isinstance(map_, Partition):
        raise TypeError("a Partition has no role order; pass a sequence of 7 physical qubits")
    if isinstance(map_, Mapping):
        # physical -> role
        inv = {role: phys for phys, role in map_.items()}
        if sorted(inv) != list(range(N)):
            raise ValueError("role mapping must cover roles 0..6 exactly once")
        return tuple(inv[r] for r in range(N))
    layout = tuple(int(p) for p in map_)
    if len(layout) != N or len(set(layout)) != N:
        raise ValueError("map must assign 7 distinct physical qubits")
    return layout


def steane_plus_encoder(variant: str, map=None, topology: Topology | None = None) -> Circuit:
    """Circuit preparing the Steane logical |+> on the mapped physical qubits.

    ``map`` lists the physical qubit of each code role 0..6 (or maps
    physical qubit -> role); ``None`` keeps the variant's design layout.
    The result is checked against ``topology`` (the variant's home device
    by default) and a ValueError lists any uncoupled CNOT.
    """
    from dataclasses import replace

    c = _default(variant)
    if map is not None:
        c = replace(c, qubit_map=_as_layout(map))
    topo = topology or home_topology(variant)
    violations = validate_against_topology(c, topo)
    if violations:
        raise ValueError(f"{variant} does not fit {topo.name or 'the topology'}: " + "; ".join(violations))
    return c


@dataclass(frozen=True)
class ReorderProbe:
    """Two commutation-equivalent orderings with crosstalk on the same CNOT.

    In ``a`` the designated CNOT acts on a fresh target, so a Z-Z rotation on
    its operands only adds a global phase.  In ``b`` the two CNOTs sharing
    that target are swapped and the same rotation becomes a phase error.
    """

    a: Circuit
    b: Circuit
    noise_a: NoiseSpec
    noise_b: NoiseSpec
    site_a: int
    site_b: int


def reorder_probe(theta: float = -math.pi / 3.5) -> ReorderProbe:
    from .circuit import Rzz
    from .rewrite import reorder

    a = steane_plus_encoder("nine_gate")
    site_a = 4
    b = reorder(a, (1, 2, 3, 5, 4, 6, 7, 8, 9))
    site_b = 5
    pair = (2, 6)
    return ReorderProbe(
        replace_label(a, "nine_gate_a"),
        replace_label(b, "nine_gate_b"),
        NoiseSpec((Injection(site_a, Rzz(theta, *pair)),)),
        NoiseSpec((Injection(site_b, Rzz(theta, *pair)),)),
        site_a,
        site_b,
    )


# --------------------------------------------------------------------------
# error probabilities


@dataclass(frozen=True)
class ErrorEstimate:
    p: float
    ci_low: float
    ci_high: float
    shots: int

    def __post_init__(self):
        if not 0.0 <= self.ci_low <= self.p <= self.ci_high <= 1.0:
            raise ValueError(f"inconsistent estimate {self}")

    @property
    def half_width(self) -> float:
        return (self.ci_high - self.ci_low) / 2


_Z95 = NormalDist().inv_cdf(0.975)


def wilson_interval(failures: int, shots: int, z: float = _Z95) -> tuple[float, float]:
    if shots <= 0:
        raise ValueError("shots must be positive")
    p = failures / shots
    denom = 1 + z * z / shots
    centre = (p + z * z / (2 * shots)) / denom
    half = z * math.sqrt(p * (1 - p) / shots + z * z / (4 * shots * shots)) / denom
    lo, hi = max(0.0, centre - half), min(1.0, centre + half)
    # guard against rounding pushing the point estimate outside
    return min(lo, p), max(hi, p)


def estimate(failures: int, shots: int) -> ErrorEstimate:
    lo, hi = wilson_interval(failures, shots)
    return ErrorEstimate(failures / shots, lo, hi, shots)


def _check_counts(counts: Counts, basis: str):
    if counts.width != N:
        raise ValueError(f"expected 7-bit readouts, got width {counts.width}")
    if counts.basis != basis:
        raise ValueError(f"expected {basis}-basis counts, got {counts.basis}")
    if counts.shots <= 0:
        raise ValueError("counts hold no shots")


def phase_flip_failures(xc: Counts) -> int:
    _, dual = hamming_codes()
    return sum(v for k, v in xc.histogram.items() if k not in dual)


def bit_flip_failures(zc: Counts) -> int:
    code, _ = hamming_codes()
    return sum(v for k, v in zc.histogram.items() if k not in code)


def error_probs(zc: Counts, xc: Counts) -> tuple[ErrorEstimate, ErrorEstimate]:
    """``(px, pz)`` from Z-basis and X-basis Steane readouts."""
    _check_counts(zc, "Z")
    _check_counts(xc, "X")
    return estimate(bit_flip_failures(zc), zc.shots), estimate(phase_flip_failures(xc), xc.shots)


def pz_from_probabilities(probs: np.ndarray) -> float:
    """Phase-flip probability from an X-basis outcome vector over 7 qubits."""
    _, in_dual = _membership_masks()
    # sum the failing mass directly; 1 - sum(passing) leaves ~1e-15 of rounding
    return float(min(1.0, probs[~in_dual].sum()))


def px_from_probabilities(probs: np.ndarray) -> float:
    in_code, _ = _membership_masks()
    return float(min(1.0, probs[~in_code].sum()))


def exact_error_probs(c: Circuit, ns: NoiseSpec = NOISELESS) -> tuple[float, float]:
    """Exact ``(px, pz)`` for a noise spec without stochastic gate noise."""
    return (
        px_from_probabilities(outcome_probabilities(c, ns, "Z")),
        pz_from_probabilities(outcome_probabilities(c, ns, "X")),
    )


# --------------------------------------------------------------------------
# fidelity


def fidelity_simple(pz: float, px: float) -> float:
    """``sqrt((1 - pz)(1 - px))``."""
    for p in (pz, px):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability {p} outside [0, 1]")
    return math.sqrt((1 - pz) * (1 - px))


def ideal_state() -> StateVector:
    """The logical |+> of the Steane code: uniform superposition over the Hamming code."""
    in_code, _ = _membership_masks()
    amps = in_code.astype(complex) / math.sqrt(in_code.sum())
    return StateVector(amps, N)


@lru_cache(maxsize=None)
def _stabilizer_tables() -> tuple[np.ndarray, np.ndarray]:
    """Index permutations (X part) and sign vectors (Z part) of the 128 stabilizers."""
    code, dual = hamming_codes()
    to_int = lambda w: int(w[::-1], 2)  # noqa: E731  (qubit 0 = LSB)
    idx = np.arange(2**N)
    perms, signs = [], []
    for a in sorted(code.codewords):
        for b in sorted(dual.codewords):
            am, bm = to_int(a), to_int(b)
            parity = np.array([bin(i & bm).count("1") & 1 for i in idx])
            perms.append(idx ^ am)
            signs.append(1 - 2 * parity)
    return np.array(perms), np.array(signs, dtype=float)


def stabilizer_expectations(states: np.ndarray) -> np.ndarray:
    """``<psi| X^a Z^b |psi>`` for each state row and each of the 128 stabilizers."""
    perms, signs = _stabilizer_tables()
    states = np.atleast_2d(states)
    out = np.empty((states.shape[0], len(perms)))
    for k, (perm, sign) in enumerate(zip(perms, signs)):
        # (X^a Z^b psi)[i] = sign[i ^ a] * psi[i ^ a]
        out[:, k] = np.real(np.einsum("bi,bi->b", states.conj(), (sign * states)[:, perm]))
    return out


def _readout_attenuation(ns: NoiseSpec) -> np.ndarray:
    """Factor by which symmetric-averaged readout flips shrink each stabilizer's mean."""
    if not ns.has_readout_noise:
        return np.ones(128)
    code, dual = hamming_codes()
    shrink = [1 - (p01 + p10) for p01, p10 in ns.readout_flip]
    out = []
    for a in sorted(code.codewords):
        for b in sorted(dual.codewords):
            support = [q for q in range(N) if a[q] == "1" or b[q] == "1"]
            out.append(math.prod(shrink[q] for q in support))
    return np.array(out)


def fidelity_stabilizer(
    c: Circuit, ns: NoiseSpec = NOISELESS, shots: int | None = None, seed: int = 0, mitigate: bool = False
) -> float:
    """``sqrt(<psi_ideal| rho |psi_ideal>)`` as the mean of the 128 stabilizer expectations.

    With ``shots=None`` and no stochastic gate noise the expectations are
    exact.  Otherwise ``shots`` noisy trajectories are drawn and every
    stabilizer gets one simulated +/-1 measurement per trajectory.  Readout
    flips attenuate each stabilizer by ``prod(1 - p01 - p10)`` over its
    support (exact for symmetric flips).  ``mitigate=True`` divides each
    measured expectation by that factor, the stabilizer analogue of the
    linear readout filter.
    """
    if c.num_qubits != N:
        raise ValueError("fidelity is defined for 7-qubit encoders")
    atten = _readout_attenuation(ns)
    if shots is None:
        if not ns.gate_noise_free:
            raise ValueError("stochastic noise needs a shot count")
        ev = stabilizer_expectations(run_state(c, NoiseSpec(ns.inject)).amplitudes)[0]
        if not mitigate:
            ev = ev * atten
        return math.sqrt(min(1.0, max(0.0, float(ev.mean()))))
    if shots < 1:
        raise ValueError("shots must be >= 1")
    total = np.zeros(128)
    for rng, psi in trajectories(c, NoiseSpec(ns.inject, ns.depol_1q, ns.depol_2q, ns.damping), shots, seed):
        ev = stabilizer_expectations(psi) * atten
        plus = rng.random(ev.shape) < (1 + ev) / 2
        total += (2 * plus - 1).sum(axis=0)
    means = total / shots
    if mitigate:
        means = means / atten
    return math.sqrt(min(1.0, max(0.0, float(means.mean()))))
