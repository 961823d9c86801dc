"""Density-matrix primitives.

States are plain complex ``numpy`` arrays: density matrices are ``(d, d)``
Hermitian, unit-trace, positive semidefinite; pure states are length-``d``
unit vectors. :func:`check_density_matrix` enforces the invariants where a
caller wants them checked.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pauli import PauliSum

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
DEFAULT_RANK_THRESHOLD = 1e-12


class DensityMatrixError(ValueError):
    """A matrix failed the density-matrix invariants."""


class DecompositionError(RuntimeError):
    """The Hermitian eigen-solver did not converge."""


def check_density_matrix(rho: np.ndarray, *, hermitian_tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate Hermiticity, unit trace and positivity; returns ``rho``."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DensityMatrixError(f"expected a square matrix, got shape {rho.shape}")
    herm = np.max(np.abs(rho - rho.conj().T)) if rho.size else 0.0
    if herm > hermitian_tol:
        raise DensityMatrixError(f"not Hermitian (max deviation {herm:.3e})")
    tr = np.trace(rho)
    if abs(tr - 1) > TRACE_TOL:
        raise DensityMatrixError(f"trace {tr.real:.12g} differs from 1")
    lam_min = np.linalg.eigvalsh(rho)[0]
    if lam_min < -PSD_TOL:
        raise DensityMatrixError(f"negative eigenvalue {lam_min:.3e}")
    return rho


def check_pure_state(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi)
    if psi.ndim != 1:
        raise DensityMatrixError("pure states are 1-d amplitude vectors")
    nrm = np.linalg.norm(psi)
    if abs(nrm - 1) > 1e-12:
        raise DensityMatrixError(f"state norm {nrm:.15g} is not 1")
    return psi


def zero_state(n_qubits: int) -> np.ndarray:
    psi = np.zeros(2**n_qubits, dtype=complex)
    psi[0] = 1.0
    return psi


def projector(psi: np.ndarray) -> np.ndarray:
    return np.outer(psi, psi.conj())


def _check_dims(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")


def expectation(rho: np.ndarray, observable: PauliSum | np.ndarray) -> float:
    """``Re tr[rho H]``; the discarded imaginary part must be negligible."""
    h = observable.matrix if isinstance(observable, PauliSum) else np.asarray(observable)
    _check_dims(rho, h)
    # tr[AB] = sum_ij A_ij B_ji
    val = np.sum(rho * h.T)
    if abs(val.imag) > 1e-10:
        raise ValueError(f"tr[rho H] has imaginary residue {val.imag:.3e}")
    return float(val.real)


def hilbert_schmidt(a: np.ndarray, b: np.ndarray) -> float:
    """Real part of ``tr[A B]`` for Hermitian ``A``, ``B``."""
    a = np.asarray(a)
    b = np.asarray(b)
    _check_dims(a, b)
    return float(np.real(np.sum(a * b.T)))


def purity(rho: np.ndarray) -> float:
    return hilbert_schmidt(rho, rho)


def fidelity_pure(rho: np.ndarray, psi: np.ndarray) -> float:
    """Overlap ``<psi|rho|psi>`` of a mixed state with a pure reference."""
    psi = np.asarray(psi)
    if rho.shape != (psi.size, psi.size):
        raise ValueError(f"dimension mismatch: {rho.shape} vs ({psi.size},)")
    return float(np.real(psi.conj() @ rho @ psi))


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigen-decomposition with eigenvalues sorted in descending order.

    All ``dim`` eigenpairs are kept; the first ``rank`` are the retained
    support. Clipped eigenvalues (below the threshold) are stored as zero.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    rank: int
    threshold: float

    @property
    def support_values(self) -> np.ndarray:
        return self.eigenvalues[: self.rank]

    @property
    def support_vectors(self) -> np.ndarray:
        return self.eigenvectors[:, : self.rank]

    def reconstruct(self) -> np.ndarray:
        v = self.support_vectors
        return (v * self.support_values) @ v.conj().T


def eigendecompose(rho: np.ndarray, rank_threshold: float = DEFAULT_RANK_THRESHOLD) -> SpectralDecomposition:
    """Descending spectral decomposition of a Hermitian matrix.

    Eigenvalues below ``rank_threshold`` are excluded from the rank and
    stored as exact zeros.
    """
    try:
        vals, vecs = np.linalg.eigh(rho)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError(f"eigen-solver failed: {exc}") from exc
    if not np.all(np.isfinite(vals)):
        raise DecompositionError("eigen-solver returned non-finite eigenvalues")
    vals = vals[::-1].copy()
    vecs = vecs[:, ::-1].copy()
    keep = vals >= rank_threshold
    rank = int(np.count_nonzero(keep))
    vals[~keep] = 0.0
    return SpectralDecomposition(vals, vecs, rank, rank_threshold)


def random_density_matrix(dim: int, rank: int | None, rng: np.random.Generator) -> np.ndarray:
    """Random rank-``rank`` density matrix (Ginibre construction)."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR with phase correction."""
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph
