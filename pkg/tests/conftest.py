import warnings
from functools import reduce

import numpy as np
import pytest

from noisyqng.channels import CircuitSpec, NoiseSpec, ParametricGate

SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def kron_label(label):
    """Dense Pauli string by explicit Kronecker products (qubit 0 leftmost)."""
    return reduce(np.kron, [SINGLE[c] for c in label])


def random_circuit(n_qubits, n_gates, rng, p=0.0, c=0.0):
    gates = []
    for k in range(n_gates):
        if n_qubits > 1 and rng.random() < 0.4:
            a, b = rng.choice(n_qubits, 2, replace=False)
            targets = (int(a), int(b))
            paulis = "".join(rng.choice(list("XYZ"), 2))
            scale = 1.0
        else:
            targets = (int(rng.integers(n_qubits)),)
            paulis = str(rng.choice(list("XYZ")))
            scale = 0.5
        noise = NoiseSpec(p * (10 if len(targets) == 2 else 1), targets, c) if p > 0 else None
        gates.append(ParametricGate(paulis, targets, k, scale, noise))
    return CircuitSpec(n_qubits, tuple(gates))


def rz_circuit(noise=None):
    """Single Rz on qubit 0, preceded by nothing; start from |+> via rho0."""
    return CircuitSpec(1, (ParametricGate("Z", (0,), 0, 0.5, noise),))


PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)
MINUS = np.array([1, -1], dtype=complex) / np.sqrt(2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _quiet_fallback_warnings():
    from noisyqng.metrics import DegenerateSpectrumWarning

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateSpectrumWarning)
        yield


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per criterion; printed in the terminal summary."""

    def record(number: int, title: str, ok: bool, detail: str) -> None:
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {title}: {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
