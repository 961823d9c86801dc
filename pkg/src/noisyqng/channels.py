"""Parametric gates, depolarizing noise and circuit execution.

A gate ``exp(-i theta s P)`` for a Pauli string ``P`` (``P^2 = I``) acts as
``U = cos(s theta) I - i sin(s theta) P``; everything below exploits the
signed-permutation form of ``P`` so no dense unitary is ever built.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .pauli import MAX_QUBITS, embed_label, pauli_action
from .states import zero_state

DEFAULT_FD_STEP = 1e-4


class UnsupportedDerivativeError(ValueError):
    """Analytic derivative requested for a gate with parameter-dependent noise."""


@dataclass(frozen=True)
class NoiseSpec:
    """Depolarizing error attached to a gate.

    The effective probability is ``min(1, p * (1 + c |theta_k|))``.
    """

    p: float
    targets: tuple[int, ...]
    c: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"error probability {self.p} outside [0, 1]")
        if self.c < 0:
            raise ValueError("theta-dependence coefficient must be non-negative")
        if len(self.targets) not in (1, 2):
            raise ValueError("depolarizing noise acts on one or two qubits")

    def probability(self, theta: float) -> float:
        return min(1.0, self.p * (1.0 + self.c * abs(theta)))


@dataclass(frozen=True)
class ParametricGate:
    """``exp(-i theta scale P)`` with ``P`` the Pauli word ``paulis`` on ``targets``."""

    paulis: str
    targets: tuple[int, ...]
    param: int
    scale: float = 0.5
    noise: NoiseSpec | None = None

    def __post_init__(self):
        if len(self.paulis) != len(self.targets):
            raise ValueError("one Pauli letter per target qubit is required")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError("repeated target qubit")
        if any(ch not in "XYZ" for ch in self.paulis.upper()):
            raise ValueError(f"generator letters must be X, Y or Z, got {self.paulis!r}")


@dataclass(frozen=True)
class CircuitSpec:
    n_qubits: int
    gates: tuple[ParametricGate, ...]
    labels: tuple[str, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise ValueError(f"qubit count must be in [1, {MAX_QUBITS}]")
        params = sorted(g.param for g in self.gates)
        if params != list(range(len(self.gates))):
            raise ValueError("every parameter index in [0, n_params) must be owned by exactly one gate")
        labels = []
        for g in self.gates:
            labels.append(embed_label(self.n_qubits, g.paulis.upper(), g.targets))
            if g.noise is not None:
                for t in g.noise.targets:
                    if not 0 <= t < self.n_qubits:
                        raise ValueError(f"noise target {t} out of range")
        object.__setattr__(self, "labels", tuple(labels))

    @property
    def n_params(self) -> int:
        return len(self.gates)

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def thetas_for_gates(self, theta: Sequence[float]) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got shape {theta.shape}")
        return theta[[g.param for g in self.gates]]

    def without_noise(self) -> CircuitSpec:
        return CircuitSpec(self.n_qubits, tuple(_replace_noise(g, None) for g in self.gates))


def _replace_noise(g: ParametricGate, noise: NoiseSpec | None) -> ParametricGate:
    return ParametricGate(g.paulis, g.targets, g.param, g.scale, noise)


# ---------------------------------------------------------------- primitives


def pauli_left(label: str, m: np.ndarray) -> np.ndarray:
    """``P @ m`` for a vector or matrix ``m``."""
    perm, coef = pauli_action(label)
    if m.ndim == 1:
        return coef[perm] * m[perm]
    return coef[perm][:, None] * m[perm, :]


def pauli_right(label: str, m: np.ndarray) -> np.ndarray:
    """``m @ P``."""
    perm, coef = pauli_action(label)
    return m[:, perm] * coef[None, :]


def rotate(rho: np.ndarray, label: str, angle: float) -> np.ndarray:
    """``U rho U^dag`` with ``U = exp(-i angle P)``."""
    c, s = np.cos(angle), np.sin(angle)
    if s == 0.0:
        return rho.copy()
    rp = pauli_right(label, rho)
    prp = pauli_left(label, rp)
    pr = pauli_left(label, rho)
    return (c * c) * rho + (s * s) * prp + (1j * c * s) * (rp - pr)


def rotate_vector(psi: np.ndarray, label: str, angle: float) -> np.ndarray:
    return np.cos(angle) * psi - 1j * np.sin(angle) * pauli_left(label, psi)


def commutator_term(rho: np.ndarray, label: str, scale: float) -> np.ndarray:
    """``-i scale [P, rho]``: derivative of ``U rho U^dag`` in the gate angle."""
    return -1j * scale * (pauli_left(label, rho) - pauli_right(label, rho))


@lru_cache(maxsize=512)
def _trace_replace_subscripts(n_qubits: int, targets: tuple[int, ...]) -> tuple[str, str]:
    letters = string.ascii_letters
    rows = list(letters[:n_qubits])
    cols = list(letters[n_qubits : 2 * n_qubits])
    traced_in = rows.copy()
    traced_in_cols = cols.copy()
    for t in targets:
        traced_in_cols[t] = traced_in[t]
    reduce = "".join(traced_in + traced_in_cols) + "->" + "".join(
        ch for i, ch in enumerate(traced_in) if i not in targets
    ) + "".join(ch for i, ch in enumerate(traced_in_cols) if i not in targets)
    # expand: reduced tensor times identity on the targets
    red_idx = "".join(ch for i, ch in enumerate(rows) if i not in targets) + "".join(
        ch for i, ch in enumerate(cols) if i not in targets
    )
    eye_terms = []
    for t in targets:
        eye_terms.append(rows[t] + cols[t])
    expand = red_idx + "," + ",".join(eye_terms) + "->" + "".join(rows + cols)
    return reduce, expand


def replace_with_identity(rho: np.ndarray, targets: Sequence[int], n_qubits: int) -> np.ndarray:
    """``I_T / 2^|T|  (x)  tr_T rho`` restored in place on the target qubits."""
    targets = tuple(sorted(targets))
    reduce, expand = _trace_replace_subscripts(n_qubits, targets)
    t = rho.reshape((2,) * (2 * n_qubits))
    red = np.einsum(reduce, t)
    half_eye = np.eye(2) / 2.0
    out = np.einsum(expand, red, *([half_eye] * len(targets)))
    return out.reshape(rho.shape)


def apply_depolarizing(rho: np.ndarray, targets: Sequence[int], p: float, n_qubits: int | None = None) -> np.ndarray:
    """``(1-p) rho + p I_T/2^|T| (x) tr_T rho``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarizing probability {p} outside [0, 1]")
    if n_qubits is None:
        n_qubits = int(round(np.log2(rho.shape[0])))
    if any(not 0 <= t < n_qubits for t in targets):
        raise ValueError("depolarizing target out of range")
    if p == 0.0:
        return rho.copy()
    return (1.0 - p) * rho + p * replace_with_identity(rho, targets, n_qubits)


def apply_gate(rho: np.ndarray, gate: ParametricGate, theta: float, n_qubits: int | None = None) -> np.ndarray:
    """Unitary part of ``gate`` only (no noise)."""
    if n_qubits is None:
        n_qubits = int(round(np.log2(rho.shape[0])))
    label = embed_label(n_qubits, gate.paulis.upper(), gate.targets)
    return rotate(rho, label, gate.scale * theta)


# ------------------------------------------------------------------ circuits


def _channel(circuit: CircuitSpec, j: int, rho: np.ndarray, theta: float, noise: bool) -> np.ndarray:
    g = circuit.gates[j]
    out = rotate(rho, circuit.labels[j], g.scale * theta)
    if noise and g.noise is not None and g.noise.p > 0:
        out = apply_depolarizing(out, g.noise.targets, g.noise.probability(theta), circuit.n_qubits)
    return out


def _initial(circuit: CircuitSpec, rho0: np.ndarray | None) -> np.ndarray:
    if rho0 is None:
        psi = zero_state(circuit.n_qubits)
        return np.outer(psi, psi.conj())
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (circuit.dim, circuit.dim):
        raise ValueError("initial state dimension does not match the circuit")
    return rho0


def run_circuit(circuit: CircuitSpec, theta: Sequence[float], noise: bool = True, rho0: np.ndarray | None = None) -> np.ndarray:
    """``rho(theta) = Phi(theta) rho0``, gate then attached noise, gate by gate."""
    angles = circuit.thetas_for_gates(theta)
    rho = _initial(circuit, rho0)
    for j in range(circuit.n_params):
        rho = _channel(circuit, j, rho, angles[j], noise)
    return rho


def run_circuit_pure(circuit: CircuitSpec, theta: Sequence[float], psi0: np.ndarray | None = None) -> np.ndarray:
    """Noiseless state-vector execution."""
    angles = circuit.thetas_for_gates(theta)
    psi = zero_state(circuit.n_qubits) if psi0 is None else np.asarray(psi0, dtype=complex)
    for j, g in enumerate(circuit.gates):
        psi = rotate_vector(psi, circuit.labels[j], g.scale * angles[j])
    return psi


def _resolve_method(gate: ParametricGate, method: str, noise: bool) -> str:
    theta_dependent = noise and gate.noise is not None and gate.noise.c != 0 and gate.noise.p > 0
    if method == "auto":
        return "central-difference" if theta_dependent else "analytic"
    if method == "analytic" and theta_dependent:
        raise UnsupportedDerivativeError(
            "analytic derivative needs theta-independent noise (c = 0) on the differentiated gate"
        )
    if method not in ("analytic", "central-difference"):
        raise ValueError(f"unknown derivative method {method!r}")
    return method


def _local_derivative(circuit, j, rho_in, theta, noise, method, h):
    g = circuit.gates[j]
    if method == "analytic":
        sigma = rotate(rho_in, circuit.labels[j], g.scale * theta)
        d = commutator_term(sigma, circuit.labels[j], g.scale)
        if noise and g.noise is not None and g.noise.p > 0:
            d = apply_depolarizing(d, g.noise.targets, g.noise.probability(theta), circuit.n_qubits)
        return d
    plus = _channel(circuit, j, rho_in, theta + h, noise)
    minus = _channel(circuit, j, rho_in, theta - h, noise)
    return (plus - minus) / (2.0 * h)


def circuit_jacobian(
    circuit: CircuitSpec,
    theta: Sequence[float],
    noise: bool = True,
    method: str = "auto",
    h: float = DEFAULT_FD_STEP,
    rho0: np.ndarray | None = None,
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Output state and every partial derivative ``d rho / d theta_k``.

    The derivative for gate ``j`` is formed locally (commutator insertion or
    central difference of that one channel) and pushed through the remaining
    channels, which are linear; prefix states are shared across parameters.
    """
    angles = circuit.thetas_for_gates(theta)
    methods = [_resolve_method(g, method, noise) for g in circuit.gates]
    rho = _initial(circuit, rho0)
    prefix = []
    for j in range(circuit.n_params):
        prefix.append(rho)
        rho = _channel(circuit, j, rho, angles[j], noise)
    derivs: list[np.ndarray | None] = [None] * circuit.n_params
    for j, g in enumerate(circuit.gates):
        d = _local_derivative(circuit, j, prefix[j], angles[j], noise, methods[j], h)
        for m in range(j + 1, circuit.n_params):
            d = _channel(circuit, m, d, angles[m], noise)
        derivs[g.param] = 0.5 * (d + d.conj().T)
    return rho, derivs


def circuit_derivative(
    circuit: CircuitSpec,
    theta: Sequence[float],
    k: int,
    method: str = "auto",
    h: float = DEFAULT_FD_STEP,
    noise: bool = True,
    rho0: np.ndarray | None = None,
) -> np.ndarray:
    """Single partial derivative ``d rho / d theta_k`` (0-based ``k``)."""
    if not 0 <= k < circuit.n_params:
        raise ValueError(f"parameter index {k} out of range")
    angles = circuit.thetas_for_gates(theta)
    j = next(i for i, g in enumerate(circuit.gates) if g.param == k)
    m = _resolve_method(circuit.gates[j], method, noise)
    rho = _initial(circuit, rho0)
    for i in range(j):
        rho = _channel(circuit, i, rho, angles[i], noise)
    d = _local_derivative(circuit, j, rho, angles[j], noise, m, h)
    for i in range(j + 1, circuit.n_params):
        d = _channel(circuit, i, d, angles[i], noise)
    return 0.5 * (d + d.conj().T)


def pure_jacobian(circuit: CircuitSpec, theta: Sequence[float]) -> tuple[np.ndarray, list[np.ndarray]]:
    """Noiseless state vector and its parameter derivatives ``|d_k psi>``."""
    angles = circuit.thetas_for_gates(theta)
    psi = zero_state(circuit.n_qubits)
    prefix = []
    for j, g in enumerate(circuit.gates):
        psi = rotate_vector(psi, circuit.labels[j], g.scale * angles[j])
        prefix.append(psi)
    derivs: list[np.ndarray | None] = [None] * circuit.n_params
    for j, g in enumerate(circuit.gates):
        d = -1j * g.scale * pauli_left(circuit.labels[j], prefix[j])
        for m in range(j + 1, circuit.n_params):
            d = rotate_vector(d, circuit.labels[m], circuit.gates[m].scale * angles[m])
        derivs[g.param] = d
    return psi, derivs
