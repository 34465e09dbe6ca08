"""Search for compensating gate insertions that cancel coherent errors.

Two families are supported:

* direct: one or more ``Rz(theta)`` gates;
* indirect: ``HCNOT(a, b) = H a; CNOT(a, b); H a; X b`` placed where the
  ideal state is stabilised by ``X_a X_b``, carrying a companion
  ``Rzz(phi)(a, b)`` that models the inserted CNOT's own crosstalk.

Locations are offsets into ``c.gates``: location ``p`` means "before
``c.gates[p]``" (``p == len(c.gates)`` appends).  An injection attached to
indexed gate ``k`` fires before any insertion at the location right after
that gate.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .circuit import CNOT, Circuit, Gate, H, Rz, Rzz, Topology, X
from .simulator import NoiseSpec, _to_basis, _zero_state, apply_gate, outcome_probabilities, sample_counts
from .steane import estimate, phase_flip_failures, pz_from_probabilities

TRIVIAL_TOL = 1e-9
TIE_TOL = 1e-10


class NoTrivialLocation(ValueError):
    """No location exists where the candidate acts trivially on the ideal state."""


def default_theta_grid() -> list[float]:
    mags = sorted({math.pi / k for k in range(2, 17)} | {math.pi / 3.5, math.pi / 7})
    return [s * m for m in mags for s in (-1, 1)]


def hcnot(a: int, b: int) -> list[Gate]:
    return [H(a), CNOT(a, b), H(a), X(b)]


# --------------------------------------------------------------------------
# plans


def _gate_dict(g: Gate) -> dict:
    d = {"gate": g.name, "qubits": list(g.qubits)}
    if g.theta is not None:
        d["theta"] = g.theta
    return d


def _gate_from(d) -> Gate:
    return Gate(d["gate"], tuple(d["qubits"]), d.get("theta"))


@dataclass(frozen=True)
class Insertion:
    location: int
    gates: tuple[Gate, ...]
    companion: tuple[Gate, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        object.__setattr__(self, "companion", tuple(self.companion))
        if self.location < 0:
            raise ValueError("location must be non-negative")

    def to_dict(self) -> dict:
        return {
            "location": self.location,
            "gates": [_gate_dict(g) for g in self.gates],
            "companion": [_gate_dict(g) for g in self.companion],
        }

    @classmethod
    def from_dict(cls, d) -> "Insertion":
        return cls(
            int(d["location"]),
            tuple(_gate_from(g) for g in d["gates"]),
            tuple(_gate_from(g) for g in d.get("companion", ())),
        )


@dataclass(frozen=True)
class CompensationPlan:
    insertions: tuple[Insertion, ...]
    objective: float
    baseline: float
    method: str = "rz"

    def __post_init__(self):
        object.__setattr__(self, "insertions", tuple(self.insertions))

    @property
    def reduction(self) -> float:
        if self.baseline <= 0:
            return 0.0
        return (self.baseline - self.objective) / self.baseline

    @property
    def is_empty(self) -> bool:
        return not self.insertions

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "insertions": [ins.to_dict() for ins in self.insertions],
            "objective": self.objective,
            "baseline": self.baseline,
            "reduction": self.reduction,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d) -> "CompensationPlan":
        return cls(
            tuple(Insertion.from_dict(i) for i in d["insertions"]),
            float(d["objective"]),
            float(d["baseline"]),
            d.get("method", "rz"),
        )

    @classmethod
    def from_json(cls, text: str) -> "CompensationPlan":
        return cls.from_dict(json.loads(text))


def empty_plan(baseline: float, method: str = "rz") -> CompensationPlan:
    return CompensationPlan((), baseline, baseline, method)


def insert(c: Circuit, plan: CompensationPlan, topology: Topology | None = None, companions: bool = True) -> Circuit:
    """Splice the plan's gates (marked as inserted) into ``c``.

    Companion gates are included unless ``companions=False``.  With a
    ``topology`` every inserted two-qubit gate must sit on a coupled pair.
    """
    gates = list(c.gates)
    for ins in sorted(plan.insertions, key=lambda i: i.location, reverse=True):
        if ins.location > len(c.gates):
            raise ValueError(f"location {ins.location} beyond circuit length {len(c.gates)}")
        new = list(ins.gates) + (list(ins.companion) if companions else [])
        gates[ins.location : ins.location] = [g.with_inserted(True) for g in new]
    out = c.with_gates(gates)
    if topology is not None:
        for g in out.gates:
            if g.inserted and g.is_two_qubit:
                a, b = (out.physical(q) for q in g.qubits)
                if not topology.has_edge(a, b):
                    raise ValueError(f"inserted {g} needs uncoupled physical qubits {a}-{b}")
    return out


# --------------------------------------------------------------------------
# trivial locations


def _ideal_states(c: Circuit) -> list[np.ndarray]:
    """State before each location 0..len(c.gates) for the noiseless circuit."""
    n = c.num_qubits
    psi = _zero_state(n)
    states = [psi]
    for g in c.gates:
        psi = apply_gate(psi, g, n)
        states.append(psi)
    return states


def _acts_trivially(psi: np.ndarray, gates: Sequence[Gate], n: int, tol: float = TRIVIAL_TOL) -> bool:
    phi = psi
    for g in gates:
        phi = apply_gate(phi, g, n)
    return abs(np.vdot(psi[0], phi[0])) >= 1 - tol


def trivial_locations(c: Circuit, candidate: Gate | Sequence[Gate]) -> list[int]:
    """Locations where inserting ``candidate`` leaves the ideal state unchanged up to phase."""
    gates = [candidate] if isinstance(candidate, Gate) else list(candidate)
    for g in gates:
        if any(q >= c.num_qubits for q in g.qubits):
            raise ValueError(f"{g} acts outside the circuit")
    return [p for p, psi in enumerate(_ideal_states(c)) if _acts_trivially(psi, gates, c.num_qubits)]


# --------------------------------------------------------------------------
# objectives


def _exact_pz(c: Circuit, ns: NoiseSpec) -> float:
    return pz_from_probabilities(outcome_probabilities(c, ns, "X"))


def _curve_area(c: Circuit, ns: NoiseSpec) -> float:
    """Sum of traced phase-flip probabilities over all prefixes (exact)."""
    from .tracer import trace_curve

    return float(np.sum(1 - trace_curve(c, ns).values ** 2))


def _sampled_pz(c: Circuit, ns: NoiseSpec, shots: int, seed: int):
    counts = sample_counts(c, ns, "X", shots, seed)
    est = estimate(phase_flip_failures(counts), shots)
    return est.p, est.ci_low, est.ci_high


def _materialize(c: Circuit, ns: NoiseSpec) -> tuple[list[Gate], list[int]]:
    """Gate list with injections spliced in, plus each location's offset into it."""
    by_index: dict[int, list[Gate]] = {}
    for inj in ns.inject:
        by_index.setdefault(inj.after_gate, []).append(inj.gate)
    seq: list[Gate] = []
    offsets: list[int] = []
    k = 0
    for g in c.gates:
        offsets.append(len(seq))
        seq.append(g)
        if g.is_two_qubit and not g.inserted:
            k += 1
            seq.extend(by_index.get(k, ()))
    offsets.append(len(seq))
    return seq, offsets


def _rz_scan(c: Circuit, ns: NoiseSpec, grid: Sequence[float]):
    """Exact pz for every single ``Rz(theta)`` insertion, using linearity in cos/sin.

    ``Rz(t) = cos(t/2) I - i sin(t/2) Z`` so the final state is
    ``cos(t/2) A - i sin(t/2) B_{p,q}`` with ``A`` the uncompensated output.
    """
    n = c.num_qubits
    seq, offsets = _materialize(c, ns)
    states = [_zero_state(n)]
    for g in seq:
        states.append(apply_gate(states[-1], g, n))
    a = _to_basis(states[-1], "X", n)[0]
    theta = np.asarray(grid, dtype=float)
    cos, sin = np.cos(theta / 2)[:, None], np.sin(theta / 2)[:, None]
    readout = None
    if ns.has_readout_noise:
        from .mitigation import calibration_matrix

        readout = calibration_matrix(ns.readout_flip).matrix
    for p, off in enumerate(offsets):
        for q in range(n):
            psi = apply_gate(states[off], Gate("z", (q,)), n)
            for g in seq[off:]:
                psi = apply_gate(psi, g, n)
            b = _to_basis(psi, "X", n)[0]
            amps = cos * a[None, :] - 1j * sin * b[None, :]
            probs = np.abs(amps) ** 2
            if readout is not None:
                probs = probs @ readout.T
            for t, pr in zip(grid, probs):
                yield p, q, float(t), pz_from_probabilities(pr)


def _pick(cands: list[tuple[float, tuple, tuple[Insertion, ...]]], c: Circuit, ns: NoiseSpec, baseline: float):
    """Best candidate by objective, ties broken by traced-curve area then the static key.

    Returns None unless the best objective beats ``baseline``.
    """
    best = min((obj for obj, _, _ in cands), default=math.inf)
    if best >= baseline - TIE_TOL:
        return None
    tied = [x for x in cands if x[0] <= best + TIE_TOL]
    if len(tied) > 1:
        plan = lambda ins: CompensationPlan(ins, 0.0, 0.0)  # noqa: E731
        tied = [(obj, (_curve_area(insert(c, plan(ins)), ns),) + key, ins) for obj, key, ins in tied]
    return min(tied, key=lambda x: x[1])


# --------------------------------------------------------------------------
# searches


def _static_key(insertions: Iterable[Insertion]) -> tuple:
    key = []
    for ins in insertions:
        thetas = [abs(g.theta) for g in ins.gates + ins.companion if g.theta is not None]
        key.append((ins.location, sum(thetas), tuple(g.qubits for g in ins.gates), tuple(g.theta or 0 for g in ins.gates + ins.companion)))
    return tuple(key)


def search_rz(
    c: Circuit,
    ns: NoiseSpec,
    theta_grid: Sequence[float] | None = None,
    max_insertions: int = 1,
    shots: int | None = None,
    seed: int = 0,
) -> CompensationPlan:
    """Find the Rz insertion(s) minimising pz.

    Every location and qubit is searched; a Z rotation that leaves the ideal
    state alone commutes with the whole stabiliser group and therefore
    cannot undo a phase error, so the search is not limited to trivial
    locations.  Exact objectives are used when ``shots`` is None (no
    stochastic gate noise allowed); otherwise sampled objectives with a
    fixed seed, where a candidate replaces the incumbent only if its 95%
    upper bound is below the incumbent's lower bound.

    Ties on the objective go to the plan with the smallest summed traced pz
    over all prefixes, then the earliest location, then the smallest
    ``|theta|``.
    """
    grid = list(default_theta_grid() if theta_grid is None else theta_grid)
    if not grid:
        raise ValueError("theta_grid must not be empty")
    if max_insertions < 0:
        raise ValueError("max_insertions must be >= 0")
    n = c.num_qubits
    if shots is not None:
        return _sampled_search(c, ns, _rz_candidates(c, grid, max_insertions), shots, seed, "rz")
    if not ns.gate_noise_free:
        raise ValueError("exact search needs a noise spec without stochastic gate noise; pass shots")
    baseline = _exact_pz(c, ns)
    if max_insertions == 0:
        return empty_plan(baseline)
    cands = []
    if max_insertions == 1:
        for p, q, t, pz in _rz_scan(c, ns, grid):
            ins = (Insertion(p, (Rz(t, q),)),)
            cands.append((pz, _static_key(ins), ins))
    else:
        for ins in _rz_candidates(c, grid, max_insertions):
            cands.append((_exact_pz(insert(c, CompensationPlan(ins, 0, 0)), ns), _static_key(ins), ins))
    picked = _pick(cands, c, ns, baseline)
    if picked is None:
        return empty_plan(baseline)
    obj, _, ins = picked
    return CompensationPlan(ins, obj, baseline, "rz")


def _rz_candidates(c: Circuit, grid, max_insertions: int):
    slots = [(p, q) for p in range(len(c.gates) + 1) for q in range(c.num_qubits)]
    for k in range(1, max_insertions + 1):
        for combo in itertools.combinations(slots, k):
            for thetas in itertools.product(grid, repeat=k):
                yield tuple(Insertion(p, (Rz(t, q),)) for (p, q), t in zip(combo, thetas))


def _sampled_search(c, ns, candidates, shots, seed, method) -> CompensationPlan:
    base = _sampled_pz(c, ns, shots, seed)
    best_ins: tuple[Insertion, ...] = ()
    best = base
    for ins in candidates:
        cand = _sampled_pz(insert(c, CompensationPlan(ins, 0, 0)), ns, shots, seed)
        if cand[2] < best[1]:
            best_ins, best = ins, cand
    return CompensationPlan(best_ins, best[0], base[0], method)


def hcnot_sites(c: Circuit, topology: Topology | None = None) -> list[tuple[int, int, int]]:
    """``(location, a, b)`` where an ideal HCNOT(a, b) acts trivially.

    Candidate pairs are the device edges among the circuit's physical qubits
    when a topology is given, otherwise the circuit's own interaction pairs.
    """
    n = c.num_qubits
    if topology is not None:
        phys = {c.physical(q): q for q in range(n)}
        pairs = {(phys[a], phys[b]) for e in topology.edges for a, b in [tuple(e)] if a in phys and b in phys}
    else:
        pairs = {tuple(g.qubits) for g in c.gates if g.is_two_qubit}
    oriented = sorted({(a, b) for a, b in pairs} | {(b, a) for a, b in pairs})
    sites = []
    for p, psi in enumerate(_ideal_states(c)):
        for a, b in oriented:
            if _acts_trivially(psi, hcnot(a, b), n):
                sites.append((p, a, b))
    return sites


def search_hcnot(
    c: Circuit,
    ns: NoiseSpec,
    companion_rotations: Sequence[float] | None = None,
    max_insertions: int = 1,
    topology: Topology | None = None,
    shots: int | None = None,
    seed: int = 0,
) -> CompensationPlan:
    """Find HCNOT insertions (with companion ``Rzz(phi)``) minimising pz.

    HCNOTs go only to locations where they act trivially on the ideal state;
    the companion rotation on the same pair is the search variable.  Pass an
    empty ``companion_rotations`` to model ideal HCNOTs.  Raises
    :class:`NoTrivialLocation` when no site exists.
    """
    sites = hcnot_sites(c, topology)
    if not sites:
        raise NoTrivialLocation("no location where an HCNOT acts trivially on the ideal state")
    grid = list(default_theta_grid() if companion_rotations is None else companion_rotations)

    def options():
        for p, a, b in sites:
            comps = [(Rzz(phi, a, b),) for phi in grid] or [()]
            for comp in comps:
                yield Insertion(p, tuple(hcnot(a, b)), comp)

    def candidates():
        opts = list(options())
        for k in range(1, max_insertions + 1):
            for combo in itertools.combinations(opts, k):
                if len({i.location for i in combo}) == k:
                    yield combo

    if shots is not None:
        return _sampled_search(c, ns, candidates(), shots, seed, "hcnot")
    if not ns.gate_noise_free:
        raise ValueError("exact search needs a noise spec without stochastic gate noise; pass shots")
    baseline = _exact_pz(c, ns)
    cands = [
        (_exact_pz(insert(c, CompensationPlan(ins, 0, 0)), ns), _static_key(ins), ins) for ins in candidates()
    ]
    picked = _pick(cands, c, ns, baseline)
    if picked is None:
        return empty_plan(baseline, "hcnot")
    obj, _, ins = picked
    return CompensationPlan(ins, obj, baseline, "hcnot")
