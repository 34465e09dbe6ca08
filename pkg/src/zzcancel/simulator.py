"""Dense statevector simulation with coherent injections and Monte Carlo noise.

Amplitude layout: virtual qubit 0 is the least-significant bit of the basis
index.  Bitstrings are printed with qubit 0 leftmost, so ``"10"`` on two
qubits means qubit 0 read 1 and qubit 1 read 0.

Stochastic channels are unravelled into pure-state trajectories, batched as a
``(shots, 2**n)`` array.  Randomness comes from fixed-size shot chunks, each
with its own stream derived from ``(seed, chunk index)``, so results do not
depend on how chunks are scheduled.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .circuit import Circuit, Gate, indexed_schedule

MAX_QUBITS = 15
CHUNK = 4096

_SQ2 = 1 / math.sqrt(2)
_FIXED_1Q = {
    "h": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
    "s": np.array([[1, 0], [0, 1j]], dtype=complex),
    "sdg": np.array([[1, 0], [0, -1j]], dtype=complex),
}


class NoiseError(ValueError):
    pass


@dataclass(frozen=True)
class Injection:
    """A coherent error gate applied right after indexed gate ``after_gate``."""

    after_gate: int
    gate: Gate


@dataclass(frozen=True)
class NoiseSpec:
    inject: tuple[Injection, ...] = ()
    depol_1q: float = 0.0
    depol_2q: float = 0.0
    damping: tuple[float, float] = (0.0, 0.0)
    readout_flip: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "inject", tuple(self.inject))
        object.__setattr__(self, "damping", tuple(float(x) for x in self.damping))
        object.__setattr__(self, "readout_flip", tuple((float(a), float(b)) for a, b in self.readout_flip))
        probs = [self.depol_1q, self.depol_2q, *self.damping]
        probs += [p for pair in self.readout_flip for p in pair]
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise NoiseError("noise probabilities must lie in [0, 1]")
        if len(self.damping) != 2:
            raise NoiseError("damping is an (amplitude, phase) pair")
        for inj in self.inject:
            if inj.after_gate < 1:
                raise NoiseError("injection indices start at 1")

    @property
    def unitary_only(self) -> bool:
        return self.depol_1q == 0 and self.depol_2q == 0 and not any(self.damping) and not self.has_readout_noise

    @property
    def has_readout_noise(self) -> bool:
        return any(a or b for a, b in self.readout_flip)

    @property
    def gate_noise_free(self) -> bool:
        return self.depol_1q == 0 and self.depol_2q == 0 and not any(self.damping)

    def injections_upto(self, i: int) -> "NoiseSpec":
        """Same spec keeping only injections attached to indexed gates <= ``i``."""
        return NoiseSpec(
            tuple(inj for inj in self.inject if inj.after_gate <= i),
            self.depol_1q,
            self.depol_2q,
            self.damping,
            self.readout_flip,
        )

    def without_injections(self) -> "NoiseSpec":
        return self.injections_upto(0)

    def with_injections(self, extra: Sequence[Injection]) -> "NoiseSpec":
        return NoiseSpec(self.inject + tuple(extra), self.depol_1q, self.depol_2q, self.damping, self.readout_flip)

    def to_dict(self) -> dict:
        return {
            "inject": [
                {
                    "after_gate": inj.after_gate,
                    "gate": inj.gate.name,
                    **({"theta": inj.gate.theta} if inj.gate.theta is not None else {}),
                    "qubits": list(inj.gate.qubits),
                }
                for inj in self.inject
            ],
            "depol_1q": self.depol_1q,
            "depol_2q": self.depol_2q,
            "damping": list(self.damping),
            "readout_flip": [list(p) for p in self.readout_flip],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "NoiseSpec":
        unknown = set(d) - {"inject", "depol_1q", "depol_2q", "damping", "readout_flip"}
        if unknown:
            raise NoiseError(f"unknown noise keys: {sorted(unknown)}")
        try:
            inject = tuple(
                Injection(int(e["after_gate"]), Gate(e["gate"], tuple(e["qubits"]), e.get("theta")))
                for e in d.get("inject", ())
            )
            return cls(
                inject,
                float(d.get("depol_1q", 0.0)),
                float(d.get("depol_2q", 0.0)),
                tuple(d.get("damping", (0.0, 0.0))),
                tuple(tuple(p) for p in d.get("readout_flip", ())),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise NoiseError(f"malformed noise spec: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "NoiseSpec":
        return cls.from_dict(json.loads(text))


NOISELESS = NoiseSpec()


def load_noise(path) -> NoiseSpec:
    return NoiseSpec.from_json(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray
    n: int

    def __post_init__(self):
        if self.amplitudes.shape != (2**self.n,):
            raise ValueError("amplitude vector must have length 2**n")

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass
class Counts:
    basis: str
    shots: int
    histogram: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.basis not in ("Z", "X"):
            raise ValueError(f"basis must be 'Z' or 'X', got {self.basis!r}")
        if sum(self.histogram.values()) != self.shots:
            raise ValueError("histogram does not sum to shots")
        widths = {len(k) for k in self.histogram}
        if len(widths) > 1:
            raise ValueError("histogram keys have mixed widths")

    @property
    def width(self) -> int:
        return len(next(iter(self.histogram))) if self.histogram else 0

    def to_dict(self) -> dict:
        return {"basis": self.basis, "shots": self.shots, "histogram": dict(sorted(self.histogram.items()))}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Counts":
        return cls(d["basis"], int(d["shots"]), {str(k): int(v) for k, v in d["histogram"].items()})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Counts":
        return cls.from_dict(json.loads(text))

    def merge(self, other: "Counts") -> "Counts":
        if other.basis != self.basis:
            raise ValueError("cannot merge counts taken in different bases")
        hist = dict(self.histogram)
        for k, v in other.histogram.items():
            hist[k] = hist.get(k, 0) + v
        return Counts(self.basis, self.shots + other.shots, hist)


# --------------------------------------------------------------------------
# batched kernels; states have shape (batch, 2**n)


@lru_cache(maxsize=None)
def _index(n: int) -> np.ndarray:
    return np.arange(2**n)


@lru_cache(maxsize=None)
def _bit(n: int, q: int) -> np.ndarray:
    return (_index(n) >> q) & 1


@lru_cache(maxsize=None)
def _flip_perm(n: int, mask: int) -> np.ndarray:
    return _index(n) ^ mask


@lru_cache(maxsize=None)
def _cx_perm(n: int, c: int, t: int) -> np.ndarray:
    idx = _index(n)
    return idx ^ (((idx >> c) & 1) << t)


def _apply_1q(psi: np.ndarray, u: np.ndarray, q: int, n: int) -> np.ndarray:
    b = psi.shape[0]
    v = psi.reshape(b, 2 ** (n - q - 1), 2, 2**q)
    return np.einsum("ij,bhjl->bhil", u, v).reshape(b, 2**n)


def _rz_phase(theta: float, n: int, q: int) -> np.ndarray:
    return np.exp(-0.5j * theta * (1 - 2 * _bit(n, q)))


def _rzz_phase(theta: float, n: int, a: int, b: int) -> np.ndarray:
    parity = _bit(n, a) ^ _bit(n, b)
    return np.exp(-0.5j * theta * (1 - 2 * parity))


def apply_gate(psi: np.ndarray, g: Gate, n: int) -> np.ndarray:
    if g.name == "cx":
        return psi[:, _cx_perm(n, *g.qubits)]
    if g.name == "rzz":
        return psi * _rzz_phase(g.theta, n, *g.qubits)
    if g.name == "rz":
        return psi * _rz_phase(g.theta, n, g.qubits[0])
    if g.name == "z":
        return psi * (1 - 2 * _bit(n, g.qubits[0]))
    if g.name == "x":
        return psi[:, _flip_perm(n, 1 << g.qubits[0])]
    return _apply_1q(psi, _FIXED_1Q[g.name], g.qubits[0], n)


def _apply_pauli_rows(psi: np.ndarray, rows: np.ndarray, xmask: int, zmask: int, n: int):
    """Apply X^xmask Z^zmask (global phases dropped) to the selected rows in place."""
    if rows.size == 0 or (xmask == 0 and zmask == 0):
        return
    sub = psi[rows]
    if zmask:
        sub = sub * _parity_sign(n, zmask)
    if xmask:
        sub = sub[:, _flip_perm(n, xmask)]
    psi[rows] = sub


@lru_cache(maxsize=None)
def _parity_sign(n: int, mask: int) -> np.ndarray:
    idx = _index(n) & mask
    par = np.zeros_like(idx)
    while mask:
        low = mask & -mask
        par ^= (idx & low) != 0
        mask ^= low
    return 1 - 2 * par


def _depolarize(psi: np.ndarray, qubits: Sequence[int], p: float, n: int, rng: np.random.Generator):
    """Replace the qubits' state by the maximally mixed one with probability ``p``.

    Sampled as a uniformly random Pauli (identity included) on hit rows.
    """
    if p <= 0:
        return
    b = psi.shape[0]
    hit = np.flatnonzero(rng.random(b) < p)
    if hit.size == 0:
        return
    k = len(qubits)
    choice = rng.integers(0, 4**k, size=hit.size)
    for code in np.unique(choice):
        if code == 0:
            continue
        xmask = zmask = 0
        c = int(code)
        for q in qubits:
            pauli = c & 3  # 0=I 1=X 2=Y 3=Z
            c >>= 2
            if pauli in (1, 2):
                xmask |= 1 << q
            if pauli in (2, 3):
                zmask |= 1 << q
        _apply_pauli_rows(psi, hit[choice == code], xmask, zmask, n)


def _damp(psi: np.ndarray, gamma: float, lam: float, n: int, rng: np.random.Generator) -> np.ndarray:
    if gamma <= 0 and lam <= 0:
        return psi
    b = psi.shape[0]
    for q in range(n):
        if gamma > 0:
            one = _bit(n, q).astype(bool)
            p1 = (np.abs(psi[:, one]) ** 2).sum(axis=1)
            jump = rng.random(b) < gamma * p1
            # jump rows: |1> -> |0> on qubit q
            if jump.any():
                rows = np.flatnonzero(jump)
                new = np.zeros_like(psi[rows])
                new[:, ~one] = psi[rows][:, one]
                psi[rows] = new
            stay = np.flatnonzero(~jump)
            if stay.size:
                psi[np.ix_(stay, np.flatnonzero(one))] *= math.sqrt(1 - gamma)
            norms = np.linalg.norm(psi, axis=1, keepdims=True)
            psi /= np.where(norms > 0, norms, 1.0)
        if lam > 0:
            pz = (1 - math.sqrt(1 - lam)) / 2
            rows = np.flatnonzero(rng.random(b) < pz)
            _apply_pauli_rows(psi, rows, 0, 1 << q, n)
    return psi


# --------------------------------------------------------------------------
# circuit execution


def _check(c: Circuit, ns: NoiseSpec):
    if c.num_qubits > MAX_QUBITS:
        raise ValueError(f"{c.num_qubits} qubits exceeds the dense-simulation bound of {MAX_QUBITS}")
    n_idx = len(indexed_schedule(c))
    for inj in ns.inject:
        if inj.after_gate > n_idx:
            raise NoiseError(f"injection after gate {inj.after_gate} but circuit has {n_idx} indexed gates")
        if any(q >= c.num_qubits for q in inj.gate.qubits):
            raise NoiseError(f"injected {inj.gate} acts outside the circuit's {c.num_qubits} qubits")
    if ns.readout_flip and len(ns.readout_flip) != c.num_qubits:
        raise NoiseError(f"readout_flip lists {len(ns.readout_flip)} qubits, circuit has {c.num_qubits}")


def _program(c: Circuit, ns: NoiseSpec):
    """Flatten circuit + noise into ``(kind, payload)`` steps."""
    by_index: dict[int, list[Gate]] = {}
    for inj in ns.inject:
        by_index.setdefault(inj.after_gate, []).append(inj.gate)
    steps = []
    k = 0
    pending_layer = False
    for g in c.gates:
        steps.append(("gate", g))
        steps.append(("depol", g))
        pending_layer = True
        if g.is_two_qubit and not g.inserted:
            k += 1
            for e in by_index.get(k, ()):
                steps.append(("gate", e))
            steps.append(("damp", None))
            pending_layer = False
    if pending_layer:
        steps.append(("damp", None))
    return steps


def _evolve(psi: np.ndarray, c: Circuit, ns: NoiseSpec, rng: np.random.Generator | None) -> np.ndarray:
    n = c.num_qubits
    gamma, lam = ns.damping
    for kind, g in _program(c, ns):
        if kind == "gate":
            psi = apply_gate(psi, g, n)
        elif rng is None:
            continue
        elif kind == "depol":
            _depolarize(psi, g.qubits, ns.depol_2q if g.is_two_qubit else ns.depol_1q, n, rng)
        elif kind == "damp":
            psi = _damp(psi, gamma, lam, n, rng)
    return psi


def _zero_state(n: int, batch: int = 1) -> np.ndarray:
    psi = np.zeros((batch, 2**n), dtype=complex)
    psi[:, 0] = 1.0
    return psi


def run_state(c: Circuit, ns: NoiseSpec = NOISELESS) -> StateVector:
    """Exact final state; only coherent injections are allowed in ``ns``."""
    if not ns.gate_noise_free:
        raise NoiseError("run_state needs a NoiseSpec without stochastic gate noise")
    _check(c, ns)
    psi = _evolve(_zero_state(c.num_qubits), c, ns, None)
    return StateVector(psi[0], c.num_qubits)


def circuit_unitary(c: Circuit, ns: NoiseSpec = NOISELESS) -> np.ndarray:
    """Dense unitary of ``c`` (with coherent injections)."""
    _check(c, ns)
    dim = 2**c.num_qubits
    cols = _evolve(np.eye(dim, dtype=complex), c, ns, None)
    return cols.T


def bitstring(index: int, n: int) -> str:
    return "".join("1" if (index >> q) & 1 else "0" for q in range(n))


def bitstring_index(s: str) -> int:
    return sum(1 << q for q, ch in enumerate(s) if ch == "1")


def _to_basis(psi: np.ndarray, basis: str, n: int) -> np.ndarray:
    if basis == "Z":
        return psi
    if basis != "X":
        raise ValueError(f"basis must be 'Z' or 'X', got {basis!r}")
    for q in range(n):
        psi = _apply_1q(psi, _FIXED_1Q["h"], q, n)
    return psi


def outcome_probabilities(c: Circuit, ns: NoiseSpec = NOISELESS, basis: str = "Z") -> np.ndarray:
    """Born-rule probabilities as a dense vector indexed like the amplitudes.

    Readout flips in ``ns`` are folded in exactly.
    """
    state = run_state(c, ns)
    psi = _to_basis(state.amplitudes[None, :], basis, c.num_qubits)
    probs = np.abs(psi[0]) ** 2
    if ns.has_readout_noise:
        from .mitigation import calibration_matrix

        probs = calibration_matrix(ns.readout_flip).matrix @ probs
    return probs


def outcome_distribution(c: Circuit, ns: NoiseSpec = NOISELESS, basis: str = "Z", cutoff: float = 0.0) -> dict[str, float]:
    probs = outcome_probabilities(c, ns, basis)
    n = c.num_qubits
    return {bitstring(i, n): float(p) for i, p in enumerate(probs) if p > cutoff}


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(chunk,)))


def _sample_indices(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    cdf = np.cumsum(probs, axis=1)
    cdf /= cdf[:, -1:]
    u = rng.random((probs.shape[0], 1))
    return (cdf < u).sum(axis=1)


def _flip_readout(idx: np.ndarray, flips, rng: np.random.Generator) -> np.ndarray:
    for q, (p01, p10) in enumerate(flips):
        if not (p01 or p10):
            continue
        bit = (idx >> q) & 1
        p = np.where(bit == 1, p10, p01)
        flip = rng.random(idx.size) < p
        idx = idx ^ (flip.astype(idx.dtype) << q)
    return idx


def trajectories(c: Circuit, ns: NoiseSpec, shots: int, seed: int):
    """Yield ``(rng, states)`` per chunk of noisy pure-state trajectories."""
    _check(c, ns)
    for chunk, start in enumerate(range(0, shots, CHUNK)):
        rng = _chunk_rng(seed, chunk)
        b = min(CHUNK, shots - start)
        yield rng, _evolve(_zero_state(c.num_qubits, b), c, ns, rng)


def sample_counts(c: Circuit, ns: NoiseSpec, basis: str, shots: int, seed: int = 0) -> Counts:
    if shots < 1:
        raise ValueError("shots must be >= 1")
    _check(c, ns)
    n = c.num_qubits
    tally = np.zeros(2**n, dtype=np.int64)
    if ns.gate_noise_free:
        probs = outcome_probabilities(c, NoiseSpec(ns.inject), basis)
        for chunk, start in enumerate(range(0, shots, CHUNK)):
            rng = _chunk_rng(seed, chunk)
            b = min(CHUNK, shots - start)
            idx = rng.choice(probs.size, size=b, p=probs / probs.sum())
            idx = _flip_readout(idx, ns.readout_flip, rng)
            tally += np.bincount(idx, minlength=tally.size)
    else:
        for rng, psi in trajectories(c, ns, shots, seed):
            psi = _to_basis(psi, basis, n)
            idx = _sample_indices(np.abs(psi) ** 2, rng)
            idx = _flip_readout(idx, ns.readout_flip, rng)
            tally += np.bincount(idx, minlength=tally.size)
    hist = {bitstring(i, n): int(v) for i, v in enumerate(tally) if v}
    return Counts(basis, shots, hist)


def state_fidelity(a: StateVector, b: StateVector) -> float:
    """Global-phase-insensitive overlap ``|<a|b>|``."""
    if a.n != b.n:
        raise ValueError(f"qubit counts differ: {a.n} vs {b.n}")
    return float(min(1.0, abs(np.vdot(a.amplitudes, b.amplitudes))))
