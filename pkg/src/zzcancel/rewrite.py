"""Commutation analysis and the circuit identities used for CNOT rewriting.

Conventions: ``Rz(t) = exp(-i t Z / 2)`` and ``Rzz(t) = exp(-i t Z(x)Z / 2)``.
Under these, a Z-Z rotation on a CNOT's operands collapses to a Z rotation
on the target::

    CNOT(a, b) ; Rzz(t)(a, b)   ==   Rz(t)(b) ; CNOT(a, b)
    Rzz(t)(a, b) ; CNOT(a, b)   ==   CNOT(a, b) ; Rz(t)(b)

(gate lists in execution order).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np

from .circuit import CNOT, Circuit, Gate, Rz, indexed_schedule
from .simulator import circuit_unitary

MAX_EQUIV_QUBITS = 12


class RewriteError(ValueError):
    """Raised when a rewrite pattern does not match at the requested site."""


# --------------------------------------------------------------------------
# commutation


def _local_unitary(gates: tuple[Gate, ...], qubits: tuple[int, ...]) -> np.ndarray:
    relabel = {q: i for i, q in enumerate(qubits)}
    local = tuple(Gate(g.name, tuple(relabel[q] for q in g.qubits), g.theta) for g in gates)
    return circuit_unitary(Circuit(len(qubits), local))


@lru_cache(maxsize=4096)
def _commutes_exact(g1: Gate, g2: Gate) -> bool:
    qubits = tuple(sorted(set(g1.qubits) | set(g2.qubits)))
    u12 = _local_unitary((g1, g2), qubits)
    u21 = _local_unitary((g2, g1), qubits)
    return bool(np.allclose(u12, u21, atol=1e-12))


def commutes(g1: Gate, g2: Gate) -> bool:
    """True iff the two gate unitaries commute.

    CNOT pairs are decided by operand roles: they fail to commute exactly
    when the control of one is the target of the other.
    """
    if not set(g1.qubits) & set(g2.qubits):
        return True
    if g1.name == "cx" and g2.name == "cx":
        (c1, t1), (c2, t2) = g1.qubits, g2.qubits
        return c1 != t2 and c2 != t1
    return _commutes_exact(g1.with_inserted(False), g2.with_inserted(False))


# --------------------------------------------------------------------------
# dependency DAG and reorderings


@dataclass(frozen=True)
class _Unit:
    gate_pos: int
    positions: tuple[int, ...]  # riders first, then the two-qubit gate

    def gates(self, c: Circuit) -> list[Gate]:
        return [c.gates[p] for p in self.positions]


@dataclass(frozen=True)
class _Layout:
    prologue: tuple[int, ...]
    units: tuple[_Unit, ...]
    epilogue: tuple[int, ...]


def _layout(c: Circuit) -> _Layout:
    """Split ``c`` into movable two-qubit units with their single-qubit riders.

    A single-qubit gate rides with the next two-qubit gate on its wire.
    Gates ahead of a wire's first two-qubit gate stay in the prologue, gates
    after its last one stay in the epilogue.  Gates on wires that no
    two-qubit gate touches ride with the next two-qubit gate of any wire.
    """
    gates = c.gates
    two = [p for p, g in enumerate(gates) if g.is_two_qubit]
    first = {}
    last = {}
    for p in two:
        for q in gates[p].qubits:
            first.setdefault(q, p)
            last[q] = p
    riders: dict[int, list[int]] = {p: [] for p in two}
    prologue, epilogue = [], []
    for p, g in enumerate(gates):
        if g.is_two_qubit:
            continue
        (q,) = g.qubits
        if q not in first:
            # idle wire: the gate commutes with everything, so let it ride
            # with whichever two-qubit gate follows it in program order
            nxt = next((t for t in two if t > p), None)
            (epilogue if nxt is None else riders[nxt]).append(p)
        elif p < first[q]:
            prologue.append(p)
        elif p > last[q]:
            epilogue.append(p)
        else:
            nxt = next(t for t in two if t > p and q in gates[t].qubits)
            riders[nxt].append(p)
    units = tuple(_Unit(p, tuple(riders[p]) + (p,)) for p in two)
    return _Layout(tuple(prologue), units, tuple(epilogue))


def _must_precede(c: Circuit, u: _Unit, v: _Unit) -> bool:
    gu, gv = c.gates[u.gate_pos], c.gates[v.gate_pos]
    if not set(gu.qubits) & set(gv.qubits):
        return False
    if _has_own_riders(c, u) or _has_own_riders(c, v):
        return True
    return not commutes(gu, gv)


def _has_own_riders(c: Circuit, u: _Unit) -> bool:
    own = c.gates[u.gate_pos].qubits
    return any(c.gates[p].qubits[0] in own for p in u.positions[:-1])


@dataclass(frozen=True)
class DependencyDag:
    """Precedence constraints between the two-qubit gates of a circuit.

    Nodes are numbered 1..m in circuit order (every two-qubit gate, inserted
    ones included).  ``arcs`` is the transitive reduction of the
    non-commutation order.
    """

    num_nodes: int
    arcs: frozenset
    gates: tuple[Gate, ...]

    def predecessors(self, j: int) -> set[int]:
        return {a for a, b in self.arcs if b == j}

    def successors(self, i: int) -> set[int]:
        return {b for a, b in self.arcs if a == i}

    def is_linear_extension(self, order) -> bool:
        rank = {node: k for k, node in enumerate(order)}
        return sorted(order) == list(range(1, self.num_nodes + 1)) and all(rank[a] < rank[b] for a, b in self.arcs)


def _closure(c: Circuit, layout: _Layout) -> list[set[int]]:
    units = layout.units
    m = len(units)
    before: list[set[int]] = [set() for _ in range(m)]
    for j in range(m):
        for i in range(j):
            if _must_precede(c, units[i], units[j]):
                before[j].add(i)
                before[j] |= before[i]
    return before


def dependency_dag(c: Circuit) -> DependencyDag:
    layout = _layout(c)
    before = _closure(c, layout)
    arcs = set()
    for j, preds in enumerate(before):
        for i in preds:
            # keep i -> j only if no k sits between them
            if not any(i in before[k] for k in preds if k != i):
                arcs.add((i + 1, j + 1))
    return DependencyDag(len(layout.units), frozenset(arcs), tuple(c.gates[u.gate_pos] for u in layout.units))


def linear_extensions(dag: DependencyDag) -> Iterator[tuple[int, ...]]:
    """Lazily enumerate topological orders, smallest available node first."""
    m = dag.num_nodes
    preds = {j: dag.predecessors(j) for j in range(1, m + 1)}
    succs = {i: dag.successors(i) for i in range(1, m + 1)}
    indeg = {j: len(preds[j]) for j in preds}
    order: list[int] = []

    def walk(avail: list[int]):
        if len(order) == m:
            yield tuple(order)
            return
        for node in sorted(avail):
            order.append(node)
            nxt = [a for a in avail if a != node]
            for s in succs[node]:
                indeg[s] -= 1
                if indeg[s] == 0:
                    nxt.append(s)
            yield from walk(nxt)
            for s in succs[node]:
                indeg[s] += 1
            order.pop()

    yield from walk([j for j in indeg if indeg[j] == 0])


def reorder(c: Circuit, order) -> Circuit:
    """Rebuild ``c`` with its two-qubit units in ``order`` (1-based unit numbers)."""
    layout = _layout(c)
    dag = dependency_dag(c)
    order = tuple(order)
    if not dag.is_linear_extension(order):
        raise RewriteError(f"{order} violates the dependency order")
    if order == tuple(range(1, dag.num_nodes + 1)):
        # program order: keep the original interleaving of single-qubit gates
        return c
    gates = [c.gates[p] for p in layout.prologue]
    for node in order:
        gates.extend(layout.units[node - 1].gates(c))
    gates.extend(c.gates[p] for p in layout.epilogue)
    return c.with_gates(gates)


def valid_reorderings(c: Circuit, limit: int = 100) -> list[Circuit]:
    """Up to ``limit`` distinct commutation-equivalent reorderings; the first is ``c``'s own order."""
    if limit < 1:
        raise ValueError("limit must be >= 1")
    dag = dependency_dag(c)
    out, seen = [], set()
    for order in linear_extensions(dag):
        r = reorder(c, order)
        # swapping two identical commuting gates gives the same circuit
        if r.gates in seen:
            continue
        seen.add(r.gates)
        out.append(r)
        if len(out) >= limit:
            break
    return out


def count_reorderings(c: Circuit, cap: int = 10**6) -> int:
    """Number of linear extensions, counted up to ``cap``."""
    n = 0
    for _ in linear_extensions(dependency_dag(c)):
        n += 1
        if n >= cap:
            break
    return n


# --------------------------------------------------------------------------
# identities


def _sites(c: Circuit, at: int, count: int) -> list[int]:
    """Positions of indexed gates at, at+1, ..., which must be contiguous in ``c``."""
    sched = indexed_schedule(c)
    if not 1 <= at or at + count - 1 > len(sched):
        raise RewriteError(f"site {at}..{at + count - 1} outside 1..{len(sched)}")
    pos = [sched[at - 1 + k][1] for k in range(count)]
    if pos != list(range(pos[0], pos[0] + count)):
        raise RewriteError(f"indexed gates {at}..{at + count - 1} are not adjacent")
    return pos


def _splice(c: Circuit, start: int, stop: int, new: list[Gate]) -> Circuit:
    return c.with_gates(c.gates[:start] + tuple(new) + c.gates[stop:])


def forced_commute_reduce(c: Circuit, at: int) -> Circuit:
    """Replace ``CNOT(a,c); CNOT(b,c); CNOT(a,b)`` at indexed gate ``at`` by ``CNOT(a,b); CNOT(b,c)``."""
    pos = _sites(c, at, 3)
    g1, g2, g3 = (c.gates[p] for p in pos)
    if not all(g.name == "cx" for g in (g1, g2, g3)):
        raise RewriteError("forced commutation needs three CNOTs")
    (a, t1), (b, t2), (a3, b3) = g1.qubits, g2.qubits, g3.qubits
    if not (t1 == t2 and a3 == a and b3 == b and len({a, b, t1}) == 3):
        raise RewriteError(f"no CNOT(a,c); CNOT(b,c); CNOT(a,b) pattern at {at}: {g1}; {g2}; {g3}")
    return _splice(c, pos[0], pos[-1] + 1, [CNOT(a, b), CNOT(b, t1)])


def forced_commute_expand(c: Circuit, at: int) -> Circuit:
    """Replace ``CNOT(a,b); CNOT(b,c)`` at indexed gate ``at`` by ``CNOT(a,c); CNOT(b,c); CNOT(a,b)``."""
    pos = _sites(c, at, 2)
    g1, g2 = (c.gates[p] for p in pos)
    if not (g1.name == g2.name == "cx"):
        raise RewriteError("forced commutation needs two CNOTs")
    (a, b), (b2, t) = g1.qubits, g2.qubits
    if b2 != b or t == a:
        raise RewriteError(f"no CNOT(a,b); CNOT(b,c) pattern at {at}: {g1}; {g2}")
    return _splice(c, pos[0], pos[-1] + 1, [CNOT(a, t), CNOT(b, t), CNOT(a, b)])


def crosstalk_pushthrough(c: Circuit, at: int) -> Circuit:
    """Fold an ``Rzz`` adjacent to CNOT number ``at`` into an ``Rz`` on the CNOT target.

    The Rzz may sit directly after the CNOT (the Rz moves in front of it) or
    directly before it (the Rz moves behind it).
    """
    sched = indexed_schedule(c)
    if not 1 <= at <= len(sched):
        raise RewriteError(f"gate index {at} outside 1..{len(sched)}")
    pos = sched[at - 1][1]
    cx = c.gates[pos]
    if cx.name != "cx":
        raise RewriteError(f"gate {at} is {cx}, not a CNOT")
    pair = set(cx.qubits)
    target = cx.qubits[1]
    for off in (1, -1):
        k = pos + off
        if 0 <= k < len(c.gates) and c.gates[k].name == "rzz" and set(c.gates[k].qubits) == pair:
            rz = Rz(c.gates[k].theta, target).with_inserted(c.gates[k].inserted)
            new = [rz, cx] if off == 1 else [cx, rz]
            lo = min(pos, k)
            return _splice(c, lo, lo + 2, new)
    raise RewriteError(f"no Rzz on {sorted(pair)} adjacent to gate {at}")


# --------------------------------------------------------------------------
# equivalence


def global_phase_distance(u1: np.ndarray, u2: np.ndarray) -> float:
    """``max |u1 - e^{i phi} u2|`` with phi aligned through the Hilbert-Schmidt overlap."""
    overlap = np.vdot(u2, u1)
    phase = overlap / abs(overlap) if abs(overlap) > 1e-300 else 1.0
    return float(np.max(np.abs(u1 - phase * u2)))


def unitary_equivalent(c1: Circuit, c2: Circuit, tol: float = 1e-10) -> bool:
    """True iff the circuits implement the same unitary up to global phase."""
    if c1.num_qubits != c2.num_qubits:
        raise ValueError(f"qubit counts differ: {c1.num_qubits} vs {c2.num_qubits}")
    if c1.num_qubits > MAX_EQUIV_QUBITS:
        raise ValueError(f"dense comparison limited to {MAX_EQUIV_QUBITS} qubits")
    return global_phase_distance(circuit_unitary(c1), circuit_unitary(c2)) <= tol
