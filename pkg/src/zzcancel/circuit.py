"""Circuit representation, device topology, and the line-oriented text format.

A circuit acts on ``num_qubits`` virtual qubits (0..n-1).  An optional
``qubit_map`` binds each virtual qubit to a physical device qubit; topology
checks go through that map.  Two-qubit gates (``cx``/``rzz``) written in the
source are *indexed* 1..n in execution order; tracing and noise injection
refer to those indices.  Gates flagged ``inserted`` are compensation gates
added after the fact: they are simulated but never indexed.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import networkx as nx

SINGLE_QUBIT = ("h", "x", "y", "z", "s", "sdg", "rz")
TWO_QUBIT = ("cx", "rzz")
PARAMETRIC = ("rz", "rzz")
GATE_NAMES = SINGLE_QUBIT + TWO_QUBIT


class CircuitFormatError(ValueError):
    """Raised for malformed circuit or topology text."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Gate:
    name: str
    qubits: tuple[int, ...]
    theta: float | None = None
    inserted: bool = False

    def __post_init__(self):
        if self.name not in GATE_NAMES:
            raise ValueError(f"unknown gate {self.name!r}")
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        arity = 2 if self.name in TWO_QUBIT else 1
        if len(self.qubits) != arity:
            raise ValueError(f"{self.name} takes {arity} operand(s), got {len(self.qubits)}")
        if any(q < 0 for q in self.qubits):
            raise ValueError("negative qubit index")
        if arity == 2 and self.qubits[0] == self.qubits[1]:
            raise ValueError(f"{self.name} operands must be distinct")
        if self.name in PARAMETRIC:
            if self.theta is None or not math.isfinite(self.theta):
                raise ValueError(f"{self.name} needs a finite angle")
            object.__setattr__(self, "theta", float(self.theta))
        elif self.theta is not None:
            raise ValueError(f"{self.name} takes no angle")

    @property
    def is_two_qubit(self) -> bool:
        return self.name in TWO_QUBIT

    def with_inserted(self, flag: bool = True) -> "Gate":
        return replace(self, inserted=flag)

    def __str__(self):
        return _gate_line(self)


def H(q):
    return Gate("h", (q,))


def X(q):
    return Gate("x", (q,))


def Rz(theta, q):
    return Gate("rz", (q,), theta)


def CNOT(c, t):
    return Gate("cx", (c, t))


def Rzz(theta, a, b):
    return Gate("rzz", (a, b), theta)


@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    gates: tuple[Gate, ...] = ()
    label: str = ""
    qubit_map: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.num_qubits < 0:
            raise ValueError("num_qubits must be non-negative")
        for i, g in enumerate(self.gates):
            for q in g.qubits:
                if q >= self.num_qubits:
                    raise ValueError(f"gate {i} ({g}) uses qubit {q} >= {self.num_qubits}")
        if self.qubit_map is not None:
            m = tuple(int(p) for p in self.qubit_map)
            if len(m) != self.num_qubits or len(set(m)) != len(m) or min(m, default=0) < 0:
                raise ValueError("qubit_map must list one distinct physical qubit per virtual qubit")
            object.__setattr__(self, "qubit_map", m)

    def __len__(self):
        return len(self.gates)

    def physical(self, q: int) -> int:
        return q if self.qubit_map is None else self.qubit_map[q]

    def with_gates(self, gates: Iterable[Gate]) -> "Circuit":
        return replace(self, gates=tuple(gates))

    @property
    def cnot_count(self) -> int:
        return sum(1 for g in self.gates if g.name == "cx")

    def depth(self, two_qubit_only: bool = True) -> int:
        """ASAP layer count, by default over two-qubit gates only."""
        level = [0] * self.num_qubits
        for g in self.gates:
            if two_qubit_only and not g.is_two_qubit:
                continue
            d = max(level[q] for q in g.qubits) + 1
            for q in g.qubits:
                level[q] = d
        return max(level, default=0)


@dataclass(frozen=True)
class Topology:
    num_qubits: int
    edges: frozenset = field(default_factory=frozenset)
    name: str = ""

    def __post_init__(self):
        es = set()
        for e in self.edges:
            a, b = (int(x) for x in e)
            if a == b:
                raise ValueError(f"self-loop on qubit {a}")
            if not (0 <= a < self.num_qubits and 0 <= b < self.num_qubits):
                raise ValueError(f"edge ({a}, {b}) outside 0..{self.num_qubits - 1}")
            es.add(frozenset((a, b)))
        object.__setattr__(self, "edges", frozenset(es))

    def has_edge(self, a: int, b: int) -> bool:
        return frozenset((a, b)) in self.edges

    def graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.num_qubits))
        g.add_edges_from(tuple(e) for e in self.edges)
        return g


@dataclass(frozen=True)
class Partition:
    qubits: tuple[int, ...]
    induced_edges: frozenset

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(sorted(self.qubits)))


# --------------------------------------------------------------------------
# text format


_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_ANGLE_RE = re.compile(
    rf"^\s*(?P<neg>-)?\s*(?:(?P<num>{_NUM})|(?:(?P<coef>{_NUM})\s*\*\s*)?pi(?:\s*/\s*(?P<den>{_NUM}))?)\s*$"
)
_GATE_RE = re.compile(r"^(?P<name>[a-z]+)(?:\((?P<arg>[^)]*)\))?$")


def parse_angle(text: str) -> float:
    """Parse a decimal or a ``pi``-expression such as ``-pi/3.5`` or ``2*pi/7``."""
    m = _ANGLE_RE.match(text)
    if not m:
        raise ValueError(f"bad angle {text!r}")
    if m["num"] is not None:
        value = float(m["num"])
    else:
        value = math.pi * (float(m["coef"]) if m["coef"] else 1.0)
        if m["den"]:
            value /= float(m["den"])
    return -value if m["neg"] else value


def _format_angle(theta: float) -> str:
    return repr(float(theta))


def _qubit(token: str, lineno: int) -> int:
    if not re.fullmatch(r"q\d+", token):
        raise CircuitFormatError(f"bad qubit operand {token!r}", lineno)
    return int(token[1:])


def _strip(line: str) -> str:
    return line.split("#", 1)[0].strip()


def parse_circuit(text: str) -> Circuit:
    num_qubits = None
    label = ""
    qubit_map = None
    gates = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip(raw)
        if not line:
            continue
        head, *rest = line.split(None, 1)
        if num_qubits is None:
            if head != "qubits" or not rest or not rest[0].strip().isdigit():
                raise CircuitFormatError("expected 'qubits N' header", lineno)
            num_qubits = int(rest[0])
            continue
        if head == "label":
            label = rest[0].strip() if rest else ""
            continue
        if head == "map":
            try:
                qubit_map = tuple(int(t) for t in (rest[0].split() if rest else ()))
            except ValueError:
                raise CircuitFormatError("map takes integer physical qubits", lineno) from None
            if len(qubit_map) != num_qubits:
                raise CircuitFormatError(f"map lists {len(qubit_map)} qubits, expected {num_qubits}", lineno)
            continue

        inserted = head.startswith("+")
        spec = head[1:] if inserted else head
        tokens = rest[0].split() if rest else []
        # tolerate a space between the gate name and its argument list
        if "(" in spec and not spec.endswith(")"):
            closing = next((i for i, t in enumerate(tokens) if t.endswith(")")), None)
            if closing is None:
                raise CircuitFormatError(f"unbalanced parenthesis in {head!r}", lineno)
            spec = spec + "".join(tokens[: closing + 1])
            tokens = tokens[closing + 1 :]
        m = _GATE_RE.match(spec)
        if not m or m["name"] not in GATE_NAMES:
            raise CircuitFormatError(f"unknown gate {spec!r}", lineno)
        name = m["name"]
        theta = None
        if name in PARAMETRIC:
            if m["arg"] is None:
                raise CircuitFormatError(f"{name} needs an angle argument", lineno)
            try:
                theta = parse_angle(m["arg"])
            except ValueError as exc:
                raise CircuitFormatError(str(exc), lineno) from None
        elif m["arg"] is not None:
            raise CircuitFormatError(f"{name} takes no argument", lineno)
        qubits = tuple(_qubit(t, lineno) for t in tokens)
        for q in qubits:
            if q >= num_qubits:
                raise CircuitFormatError(f"operand q{q} out of range for {num_qubits} qubits", lineno)
        try:
            gates.append(Gate(name, qubits, theta, inserted))
        except ValueError as exc:
            raise CircuitFormatError(str(exc), lineno) from None
    if num_qubits is None:
        raise CircuitFormatError("missing 'qubits N' header")
    try:
        return Circuit(num_qubits, tuple(gates), label, qubit_map)
    except ValueError as exc:
        raise CircuitFormatError(str(exc)) from None


def _gate_line(g: Gate) -> str:
    head = ("+" if g.inserted else "") + g.name
    if g.theta is not None:
        head += f"({_format_angle(g.theta)})"
    return " ".join([head] + [f"q{q}" for q in g.qubits])


def emit_circuit(c: Circuit) -> str:
    lines = [f"qubits {c.num_qubits}"]
    if c.label:
        lines.append(f"label {c.label}")
    if c.qubit_map is not None:
        lines.append("map " + " ".join(str(p) for p in c.qubit_map))
    lines.extend(_gate_line(g) for g in c.gates)
    return "\n".join(lines) + "\n"


def load_circuit(path) -> Circuit:
    return parse_circuit(Path(path).read_text(encoding="utf-8"))


def parse_topology(text: str, name: str = "") -> Topology:
    num_qubits = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip(raw)
        if not line:
            continue
        parts = line.split()
        if num_qubits is None:
            if parts[0] != "qubits" or len(parts) != 2 or not parts[1].isdigit():
                raise CircuitFormatError("expected 'qubits N' header", lineno)
            num_qubits = int(parts[1])
        elif parts[0] == "edge" and len(parts) == 3 and all(p.isdigit() for p in parts[1:]):
            edges.append((int(parts[1]), int(parts[2])))
        else:
            raise CircuitFormatError(f"expected 'edge I J', got {line!r}", lineno)
    if num_qubits is None:
        raise CircuitFormatError("missing 'qubits N' header")
    try:
        return Topology(num_qubits, frozenset(edges), name)
    except ValueError as exc:
        raise CircuitFormatError(str(exc)) from None


def emit_topology(t: Topology) -> str:
    lines = [f"qubits {t.num_qubits}"]
    lines += [f"edge {a} {b}" for a, b in sorted(tuple(sorted(e)) for e in t.edges)]
    return "\n".join(lines) + "\n"


def load_topology(path) -> Topology:
    path = Path(path)
    return parse_topology(path.read_text(encoding="utf-8"), name=path.stem)


_DATA = Path(__file__).parent / "data"


def builtin_topology(name: str) -> Topology:
    """Shipped device graphs: ``melbourne`` (15 qubits) and ``lagos`` (7 qubits)."""
    path = _DATA / f"{name}.topo"
    if not path.exists():
        raise KeyError(f"no built-in topology {name!r}")
    return load_topology(path)


# --------------------------------------------------------------------------
# structural queries


def validate_against_topology(c: Circuit, t: Topology) -> list[str]:
    """List the two-qubit gates whose physical operands are not adjacent in ``t``."""
    physical = [c.physical(q) for q in range(c.num_qubits)]
    bad = [p for p in physical if p >= t.num_qubits]
    if bad:
        raise ValueError(f"physical qubit {bad[0]} exceeds topology size {t.num_qubits}")
    violations = []
    for i, g in enumerate(c.gates):
        if g.is_two_qubit:
            a, b = (physical[q] for q in g.qubits)
            if not t.has_edge(a, b):
                violations.append(f"gate {i} ({g}): physical qubits {a}-{b} are not coupled")
    return violations


def interaction_graph(c: Circuit) -> nx.Graph:
    """Graph over virtual qubits with an edge per distinct two-qubit operand pair."""
    g = nx.Graph()
    g.add_nodes_from(range(c.num_qubits))
    g.add_edges_from(gate.qubits for gate in c.gates if gate.is_two_qubit)
    return g


def supports_pattern(t: Topology, qubits: Sequence[int], pattern: nx.Graph) -> bool:
    """True if the induced subgraph on ``qubits`` contains ``pattern`` as a spanning subgraph."""
    sub = t.graph().subgraph(qubits)
    if pattern.number_of_nodes() != len(qubits) or not nx.is_connected(sub):
        return False
    return nx.algorithms.isomorphism.GraphMatcher(sub, pattern).subgraph_is_monomorphic()


def enumerate_local_partitions(t: Topology, k: int, pattern: nx.Graph | None = None) -> list[Partition]:
    """All ``k``-qubit connected induced subgraphs that can host ``pattern`` without swaps.

    With ``pattern=None`` every connected ``k``-subset qualifies.  Results are
    sorted lexicographically by qubit tuple.
    """
    if k > t.num_qubits:
        raise ValueError(f"k={k} exceeds {t.num_qubits} qubits")
    graph = t.graph()
    found = []
    for subset in _connected_subsets(graph, k):
        sub = graph.subgraph(subset)
        if pattern is not None and not supports_pattern(t, subset, pattern):
            continue
        edges = frozenset(frozenset(e) for e in sub.edges())
        found.append(Partition(subset, edges))
    found.sort(key=lambda p: p.qubits)
    return found


def _connected_subsets(graph: nx.Graph, k: int):
    # device graphs are small (<= ~30 qubits); plain combinations are fast enough
    for subset in itertools.combinations(sorted(graph.nodes), k):
        if nx.is_connected(graph.subgraph(subset)):
            yield subset


def indexed_schedule(c: Circuit) -> list[tuple[int, int, Gate]]:
    """Source two-qubit gates numbered 1..n as ``(index, position, gate)``.

    ``position`` is the gate's offset in ``c.gates``.  Inserted gates are skipped.
    """
    out = []
    for pos, g in enumerate(c.gates):
        if g.is_two_qubit and not g.inserted:
            out.append((len(out) + 1, pos, g))
    return out


def prefix(c: Circuit, i: int) -> Circuit:
    """Truncate ``c`` immediately after indexed gate ``i``.

    ``prefix(c, 0)`` keeps the gates ahead of the first indexed gate and
    ``prefix(c, n)`` is ``c`` itself.  A run of inserted gates directly after
    gate ``i`` is kept only if it contains a two-qubit gate; lone inserted
    single-qubit gates belong to the following indexed gate.
    """
    sched = indexed_schedule(c)
    n = len(sched)
    if not 0 <= i <= n:
        raise ValueError(f"prefix index {i} outside 0..{n}")
    if i == n:
        return c
    if i == 0:
        return c.with_gates(c.gates[: sched[0][1]])
    cut = sched[i - 1][1] + 1
    end = cut
    while end < len(c.gates) and c.gates[end].inserted:
        end += 1
    # an inserted block carrying a two-qubit gate is attached to gate i;
    # inserted single-qubit gates ride with the next indexed gate instead
    if any(g.is_two_qubit for g in c.gates[cut:end]):
        cut = end
    return c.with_gates(c.gates[:cut])


def missing_gates(c: Circuit, i: int) -> list[Gate]:
    """Indexed gates i+1..n that ``prefix(c, i)`` leaves out."""
    return [g for idx, _, g in indexed_schedule(c) if idx > i]
