"""Pauli strings and weighted Pauli-sum observables.

Qubit 0 is the most significant bit of a computational-basis index, i.e. the
leftmost factor of the Kronecker product.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterable, Sequence

import numpy as np

MAX_QUBITS = 14


@lru_cache(maxsize=4096)
def pauli_action(label: str) -> tuple[np.ndarray, np.ndarray]:
    """Signed-permutation form of a Pauli string.

    Returns ``(perm, coef)`` such that ``P|x> = coef[x] |perm[x]>`` and, since
    ``perm`` is an involution, ``(P v) = coef[perm] * v[perm]``.
    """
    n = len(label)
    d = 2**n
    flip = 0
    phase_mask = 0
    n_y = 0
    for q, ch in enumerate(label):
        bit = 1 << (n - 1 - q)
        if ch in "XY":
            flip |= bit
        if ch in "YZ":
            phase_mask |= bit
        if ch == "Y":
            n_y += 1
        if ch not in "IXYZ":
            raise ValueError(f"invalid Pauli label {label!r}")
    x = np.arange(d)
    parity = np.zeros(d, dtype=np.int64)
    masked = x & phase_mask
    while np.any(masked):
        parity ^= masked & 1
        masked = masked >> 1
    coef = (1j**n_y) * (1.0 - 2.0 * parity)
    perm = x ^ flip
    perm.setflags(write=False)
    coef.setflags(write=False)
    return perm, coef


def pauli_matrix(label: str) -> np.ndarray:
    """Dense matrix of a Pauli string such as ``"XZI"``."""
    perm, coef = pauli_action(label)
    d = len(perm)
    mat = np.zeros((d, d), dtype=complex)
    mat[perm, np.arange(d)] = coef
    return mat


def embed_label(n_qubits: int, paulis: str, targets: Sequence[int]) -> str:
    """Full ``n_qubits`` label with ``paulis`` placed on ``targets``."""
    if len(paulis) != len(targets):
        raise ValueError("one Pauli letter per target qubit is required")
    chars = ["I"] * n_qubits
    for p, t in zip(paulis, targets):
        if not 0 <= t < n_qubits:
            raise ValueError(f"target qubit {t} out of range for {n_qubits} qubits")
        chars[t] = p
    return "".join(chars)


@dataclass(frozen=True)
class PauliSum:
    """Hermitian observable ``sum_j c_j P_j`` with real coefficients."""

    terms: tuple[tuple[float, str], ...]
    n_qubits: int

    @cached_property
    def matrix(self) -> np.ndarray:
        d = 2**self.n_qubits
        mat = np.zeros((d, d), dtype=complex)
        cols = np.arange(d)
        for c, label in self.terms:
            perm, coef = pauli_action(label)
            mat[perm, cols] += c * coef
        mat.setflags(write=False)
        return mat

    @cached_property
    def spectrum(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def norm(self) -> float:
        """Operator (spectral) norm."""
        if self.n_qubits == 0 or not self.terms:
            return 0.0
        return float(np.max(np.abs(self.spectrum)))


def build_pauli_sum(terms: Iterable[tuple[float, str]], n_qubits: int | None = None) -> PauliSum:
    """Build a :class:`PauliSum` from ``(coefficient, label)`` pairs.

    ``n_qubits`` is required when ``terms`` is empty.
    """
    cleaned = []
    for coef, label in terms:
        if np.iscomplexobj(coef) and np.imag(coef) != 0:
            raise ValueError("Pauli-sum coefficients must be real")
        label = label.upper()
        pauli_action(label)  # validates characters
        cleaned.append((float(np.real(coef)), label))
    lengths = {len(label) for _, label in cleaned}
    if n_qubits is not None:
        lengths.add(n_qubits)
    if len(lengths) > 1:
        raise ValueError(f"inconsistent Pauli string lengths: {sorted(lengths)}")
    if not lengths:
        raise ValueError("n_qubits must be given for an empty term list")
    n = lengths.pop()
    if n > MAX_QUBITS:
        raise ValueError(f"at most {MAX_QUBITS} qubits supported, got {n}")
    return PauliSum(tuple(cleaned), n)
