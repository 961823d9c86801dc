"""Benchmark Hamiltonians and circuits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..channels import CircuitSpec, NoiseSpec, ParametricGate
from ..pauli import PauliSum, build_pauli_sum, embed_label

DEFAULT_THETA_NOISE = 0.1
TWO_QUBIT_FACTOR = 10.0


@dataclass(frozen=True)
class HeisenbergRingSpec:
    """Ring of ``n_qubits`` spins with XX+YY+ZZ couplings and random Z fields.

    Fields are drawn uniformly from ``[-1, 1]`` with ``omega_seed`` unless
    ``omega`` is given explicitly.
    """

    n_qubits: int
    coupling: float = 1.0
    omega_seed: int | None = 0
    omega: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.n_qubits < 2:
            raise ValueError("the Heisenberg ring needs at least 2 qubits")
        if self.omega is not None:
            if len(self.omega) != self.n_qubits:
                raise ValueError("one on-site frequency per qubit is required")
            if any(abs(w) > 1 for w in self.omega):
                raise ValueError("on-site frequencies must lie in [-1, 1]")

    def frequencies(self) -> np.ndarray:
        if self.omega is not None:
            return np.asarray(self.omega, dtype=float)
        rng = np.random.default_rng(self.omega_seed)
        return rng.uniform(-1.0, 1.0, self.n_qubits)


def build_heisenberg_ring(spec: HeisenbergRingSpec) -> PauliSum:
    n = spec.n_qubits
    bonds = [(i, i + 1) for i in range(n - 1)] + [(0, n - 1)]
    terms = []
    for a, b in bonds:
        for p in "XYZ":
            terms.append((spec.coupling, embed_label(n, p + p, (a, b))))
    for i, w in enumerate(spec.frequencies()):
        terms.append((float(w), embed_label(n, "Z", (i,))))
    return build_pauli_sum(terms, n)


def _noise(p: float, targets: tuple[int, ...], c: float) -> NoiseSpec | None:
    return NoiseSpec(min(p, 1.0), targets, c) if p > 0 else None


def build_ansatz(
    n_qubits: int,
    layers: int = 1,
    p_error: float = 0.0,
    two_qubit_factor: float = TWO_QUBIT_FACTOR,
    theta_noise: float = DEFAULT_THETA_NOISE,
    rotations: str = "ZX",
) -> CircuitSpec:
    """Layered hardware-style ansatz.

    Each layer applies the single-qubit rotations in ``rotations`` (default Rz
    then Rx) to every qubit, then XX, YY, ZZ evolutions on open-chain
    neighbours. Rotations are ``exp(-i theta P / 2)``; couplings are ``exp(-i theta P P)``.
    Every gate is followed by depolarizing noise, ``p_error`` on one qubit and
    ``two_qubit_factor * p_error`` on two.
    """
    if n_qubits < 2 or layers < 1:
        raise ValueError("the ansatz needs at least 2 qubits and 1 layer")
    rotations = rotations.upper()
    if not rotations or any(r not in "XYZ" for r in rotations):
        raise ValueError(f"invalid rotation sequence {rotations!r}")
    gates = []

    def add(paulis, targets, scale, p):
        gates.append(ParametricGate(paulis, targets, len(gates), scale, _noise(p, targets, theta_noise)))

    for _ in range(layers):
        for q in range(n_qubits):
            for r in rotations:
                add(r, (q,), 0.5, p_error)
        for q in range(n_qubits - 1):
            for p in "XYZ":
                add(p + p, (q, q + 1), 1.0, two_qubit_factor * p_error)
    return CircuitSpec(n_qubits, tuple(gates))


def landscape_hamiltonian() -> PauliSum:
    """``Z x Id + 0.1 X x X``."""
    return build_pauli_sum([(1.0, "ZI"), (0.1, "XX")])


def landscape_circuit(
    p_error: float = 0.01,
    two_qubit_factor: float = TWO_QUBIT_FACTOR,
    theta_noise: float = 0.0,
) -> CircuitSpec:
    """Two-parameter circuit for the landscape study.

    ``exp(-i theta_1 Y x Y / 2)`` then ``Rz(theta_2)`` on qubit 0, each followed
    by depolarizing noise. The noiseless energy is
    ``cos theta_1 - 0.1 sin theta_1 sin theta_2``: the ground energy
    ``-sqrt(1.01)`` is reachable while the second parameter only couples
    through the small ``X x X`` term, so the landscape is ill-conditioned near
    the minimum. Noise is parameter-independent by default, which keeps the
    two mirror-image minima exactly degenerate.
    """
    return CircuitSpec(
        2,
        (
            ParametricGate("YY", (0, 1), 0, 0.5, _noise(two_qubit_factor * p_error, (0, 1), theta_noise)),
            ParametricGate("Z", (0,), 1, 0.5, _noise(p_error, (0,), theta_noise)),
        ),
    )
