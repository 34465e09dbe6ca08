import math

from hypothesis import strategies as st

from zzcancel.circuit import Circuit, Gate

ONE_Q = ("h", "x", "y", "z", "s", "sdg", "rz")
angles = st.floats(-2 * math.pi, 2 * math.pi, allow_nan=False, allow_infinity=False)


@st.composite
def gates(draw, n: int, two_qubit=("cx", "rzz")):
    if n >= 2 and draw(st.booleans()):
        name = draw(st.sampled_from(two_qubit))
        a, b = draw(st.permutations(range(n)))[:2]
        return Gate(name, (a, b), draw(angles) if name == "rzz" else None)
    name = draw(st.sampled_from(ONE_Q))
    return Gate(name, (draw(st.integers(0, n - 1)),), draw(angles) if name == "rz" else None)


@st.composite
def circuits(draw, min_qubits=1, max_qubits=4, max_gates=12, two_qubit=("cx", "rzz")):
    n = draw(st.integers(min_qubits, max_qubits))
    gs = draw(st.lists(gates(n, two_qubit), max_size=max_gates))
    return Circuit(n, tuple(gs))


@st.composite
def cnot_circuits(draw, n=4, max_gates=8):
    """CNOT-only circuits (optionally with leading H gates) on ``n`` qubits."""
    hs = draw(st.lists(st.integers(0, n - 1), unique=True, max_size=n))
    pairs = draw(st.lists(st.permutations(range(n)).map(lambda p: (p[0], p[1])), min_size=1, max_size=max_gates))
    return Circuit(n, tuple(Gate("h", (q,)) for q in hs) + tuple(Gate("cx", p) for p in pairs))
