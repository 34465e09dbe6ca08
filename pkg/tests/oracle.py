"""Independent reference implementations used as test oracles.

Everything here is written from textbook definitions with explicit Kronecker
products, deliberately sharing no code with the package's kernels.  Qubit 0
is the least-significant bit of a basis index, so it sits rightmost in a
Kronecker product.
"""

import itertools
from functools import reduce

import numpy as np

I2 = np.eye(2, dtype=complex)
HM = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
XM = np.array([[0, 1], [1, 0]], dtype=complex)
YM = np.array([[0, -1j], [1j, 0]], dtype=complex)
ZM = np.diag([1, -1]).astype(complex)
SM = np.diag([1, 1j])
P0 = np.diag([1, 0]).astype(complex)
P1 = np.diag([0, 1]).astype(complex)


def rz(theta):
    return np.diag([np.exp(-1j * theta / 2), np.exp(1j * theta / 2)])


def embed(ops: dict, n: int) -> np.ndarray:
    """Tensor product with ``ops[q]`` on qubit q and identity elsewhere."""
    return reduce(np.kron, [ops.get(q, I2) for q in reversed(range(n))])


def gate_matrix(name, qubits, theta, n):
    if name == "cx":
        c, t = qubits
        return embed({c: P0}, n) + embed({c: P1, t: XM}, n)
    if name == "rzz":
        a, b = qubits
        zz = embed({a: ZM, b: ZM}, n)
        return np.cos(theta / 2) * np.eye(2**n) - 1j * np.sin(theta / 2) * zz
    single = {"h": HM, "x": XM, "y": YM, "z": ZM, "s": SM, "sdg": SM.conj()}
    m = rz(theta) if name == "rz" else single[name]
    return embed({qubits[0]: m}, n)


def unitary(circuit) -> np.ndarray:
    n = circuit.num_qubits
    u = np.eye(2**n, dtype=complex)
    for g in circuit.gates:
        u = gate_matrix(g.name, g.qubits, g.theta, n) @ u
    return u


def final_state(circuit) -> np.ndarray:
    psi = np.zeros(2**circuit.num_qubits, dtype=complex)
    psi[0] = 1
    return unitary(circuit) @ psi


def equal_up_to_phase(a, b, tol=1e-10) -> bool:
    k = np.unravel_index(np.argmax(np.abs(b)), b.shape)
    if abs(b[k]) < tol:
        return np.allclose(a, b, atol=tol)
    phase = a[k] / b[k]
    return abs(abs(phase) - 1) < tol and np.allclose(a, phase * b, atol=tol)


def bits(index: int, n: int) -> str:
    """Bitstring with qubit 0 leftmost."""
    return "".join(str((index >> q) & 1) for q in range(n))


def hamming_code_bruteforce():
    """C and C-dual by exhaustive search over all 128 words."""
    checks = ["0001111", "0110011", "1010101"]
    words = ["".join(w) for w in itertools.product("01", repeat=7)]
    dot = lambda a, b: sum(int(x) & int(y) for x, y in zip(a, b)) % 2  # noqa: E731
    code = {w for w in words if all(dot(w, h) == 0 for h in checks)}
    dual = {w for w in words if all(dot(w, c) == 0 for c in code)}
    return code, dual
