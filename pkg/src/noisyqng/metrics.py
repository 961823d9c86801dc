"""Metric tensors on circuit parameter space.

Four families live here:

* quantum Fisher information (three-sum eigen expression, a vectorized
  Kronecker-sum oracle, and the Hilbert-Schmidt approximation),
* the Fubini-Study metric ``A`` of the noiseless state vector,
* the mixed-state metric ``M = 1/2 tr[d_k rho d_l rho]``,
* the classical Fisher information of a fixed orthonormal measurement,

plus the symmetric logarithmic derivative and regularised inversion.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channels import CircuitSpec, circuit_jacobian, pure_jacobian, run_circuit_pure
from .states import DEFAULT_RANK_THRESHOLD, SpectralDecomposition, eigendecompose, fidelity_pure

PROVENANCES = ("qfi-exact", "qfi-oracle", "qfi-approx", "fubini-study-A", "mixed-M", "classical-Fc")

DEGENERACY_GAP = 1e-8
EIG_FD_ERROR_TOL = 1e-10
EIG_FD_RATIO = 1e-3
PAIR_SUM_FLOOR = 1e-12
FIDELITY_FLOOR = 0.1
PROBABILITY_FLOOR = 1e-12


class ApproximationRegimeWarning(UserWarning):
    """Fidelity too low for the Hilbert-Schmidt QFI approximation to be trusted."""


class DegenerateSpectrumWarning(UserWarning):
    """Eigen-derivatives were ill-defined; those entries used the oracle route."""


@dataclass(frozen=True)
class MetricTensor:
    values: np.ndarray
    provenance: str
    min_eig: float
    max_eig: float
    fallback_entries: int = 0
    fidelity: float | None = None
    warning: str | None = None

    @classmethod
    def build(cls, values: np.ndarray, provenance: str, **extra) -> MetricTensor:
        if provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {provenance!r}")
        values = np.asarray(values, dtype=float)
        values = 0.5 * (values + values.T)
        if values.size:
            eig = np.linalg.eigvalsh(values)
            lo, hi = float(eig[0]), float(eig[-1])
        else:
            lo = hi = 0.0
        values.setflags(write=False)
        return cls(values, provenance, lo, hi, **extra)

    @property
    def condition_number(self) -> float:
        if self.max_eig <= 0:
            return float("inf")
        if self.min_eig <= 0:
            return float("inf")
        return self.max_eig / self.min_eig

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


def _hs_gram(drhos: Sequence[np.ndarray]) -> np.ndarray:
    """Matrix of ``Re tr[d_k d_l]`` over a list of Hermitian matrices."""
    if not len(drhos):
        return np.zeros((0, 0))
    flat = np.stack([d.T.reshape(-1) for d in drhos])
    vecs = np.stack([d.reshape(-1) for d in drhos])
    return np.real(flat @ vecs.T)


# ------------------------------------------------------------------ SLD


@dataclass(frozen=True)
class SLDOperator:
    matrix: np.ndarray

    def residual(self, rho: np.ndarray, drho: np.ndarray) -> float:
        lhs = 0.5 * (self.matrix @ rho + rho @ self.matrix)
        return float(np.max(np.abs(drho - lhs)))


def sld(decomp: SpectralDecomposition, drho: np.ndarray) -> SLDOperator:
    """Symmetric logarithmic derivative from ``2 <k|d rho|l> / (p_k + p_l)``.

    Elements between two excluded (kernel) eigenvectors are set to zero.
    """
    if decomp.rank < 1:
        raise ValueError("density matrix is numerically zero: no retained eigenvalues")
    v = decomp.eigenvectors
    p = decomp.eigenvalues
    x = v.conj().T @ drho @ v
    psum = p[:, None] + p[None, :]
    mask = psum >= PAIR_SUM_FLOOR
    lt = np.zeros_like(x)
    lt[mask] = 2.0 * x[mask] / psum[mask]
    mat = v @ lt @ v.conj().T
    return SLDOperator(0.5 * (mat + mat.conj().T))


# ------------------------------------------------------- QFI: spectral/oracle


def qfi_spectral(decomp: SpectralDecomposition, drhos: Sequence[np.ndarray]) -> np.ndarray:
    """``2 sum_nm Re[conj(x^k_nm) x^l_nm] / (p_n + p_m)`` in the eigenbasis of rho.

    This is the Kronecker-sum expression evaluated after diagonalising
    ``rho* (x) I + I (x) rho``; it needs no eigenvector derivatives.
    """
    v = decomp.eigenvectors
    p = decomp.eigenvalues
    psum = p[:, None] + p[None, :]
    weight = np.zeros_like(psum)
    mask = psum >= PAIR_SUM_FLOOR
    weight[mask] = 2.0 / psum[mask]
    xs = np.stack([v.conj().T @ d @ v for d in drhos]) if len(drhos) else np.zeros((0,) + p.shape * 2)
    f = np.einsum("knm,lnm,nm->kl", xs.conj(), xs, weight).real
    return 0.5 * (f + f.T)


def qfi_oracle(rho: np.ndarray, drhos: Sequence[np.ndarray], pinv_floor: float = PAIR_SUM_FLOOR) -> MetricTensor:
    """QFI from ``2 vec(d_k rho)^dag [rho* (x) I + I (x) rho]^+ vec(d_l rho)``.

    Uses column-stacking ``vec``; the pseudo-inverse drops eigenvalues of the
    Kronecker sum below ``pinv_floor``. Memory grows as ``d^4``.
    """
    rho = np.asarray(rho)
    d = rho.shape[0]
    for dr in drhos:
        if dr.shape != rho.shape:
            raise ValueError(f"dimension mismatch: {dr.shape} vs {rho.shape}")
    eye = np.eye(d)
    ksum = np.kron(rho.conj(), eye) + np.kron(eye, rho)
    ksum = 0.5 * (ksum + ksum.conj().T)
    lam, w = np.linalg.eigh(ksum)
    inv = np.zeros_like(lam)
    keep = lam >= pinv_floor
    inv[keep] = 1.0 / lam[keep]
    if not len(drhos):
        return MetricTensor.build(np.zeros((0, 0)), "qfi-oracle")
    vecs = np.stack([dr.reshape(-1, order="F") for dr in drhos], axis=1)
    proj = w.conj().T @ vecs
    f = 2.0 * np.real(proj.conj().T @ (inv[:, None] * proj))
    return MetricTensor.build(f, "qfi-oracle")


# ------------------------------------------------------- QFI: eigen expression


def _match(vecs_ref: np.ndarray, vecs_new: np.ndarray) -> tuple[np.ndarray, np.ndarray] | None:
    """Align perturbed eigenvectors with reference ones by maximal overlap.

    Returns the matched indices and phase-fixed vectors (overlap real and
    positive), or ``None`` if the matching is not one-to-one.
    """
    ov = vecs_new.conj().T @ vecs_ref  # (d_new, r)
    idx = np.argmax(np.abs(ov), axis=0)
    if len(set(idx.tolist())) != len(idx):
        return None
    picked = vecs_new[:, idx]
    o = ov[idx, np.arange(len(idx))]
    if np.any(np.abs(o) < 0.5):
        return None
    return idx, picked * (o / np.abs(o))[None, :]


def _eig_fd_step(decomp: SpectralDecomposition, x: np.ndarray) -> float | None:
    """Base step for eigen-derivative differences along one direction.

    ``x`` is the derivative in the eigenbasis. The step keeps every coupled
    retained pair well inside its eigenvalue gap. ``None`` means a retained
    eigenvalue is degenerate with another one (gap below ``DEGENERACY_GAP``),
    where eigenvector alignment is ambiguous.
    """
    p = decomp.eigenvalues
    r = decomp.rank
    gaps = np.abs(p[:r, None] - p[None, :])
    np.fill_diagonal(gaps[:, :r], np.inf)
    if np.any(gaps < DEGENERACY_GAP):
        return None
    coupling = np.abs(x[:r, :])
    np.fill_diagonal(coupling[:, :r], 0.0)
    scale = max(float(np.max(np.abs(x))), 1e-300)
    worst = float(np.max(coupling / gaps))
    if worst <= 1e-14 * scale:
        return EIG_FD_RATIO / scale
    return EIG_FD_RATIO / max(worst, scale)


def _eigen_derivatives(decomp, rho, drho, h):
    """Central-difference ``d p_n`` and ``|d psi_n>`` for retained ``n``."""
    out = []
    for sign in (+1.0, -1.0):
        vals, vecs = np.linalg.eigh(rho + sign * h * drho)
        m = _match(decomp.support_vectors, vecs)
        if m is None:
            return None
        idx, aligned = m
        out.append((vals[idx], aligned))
    (pp, vp), (pm, vm) = out
    return (pp - pm) / (2 * h), (vp - vm) / (2 * h)


def _romberg_eigen_derivatives(decomp, rho, drho, h):
    """Two-level Richardson extrapolation of the central differences.

    Returns ``(dp, dpsi, err_p, err_psi)`` with per-eigenvector error
    estimates, or ``None`` when eigenvector matching failed.
    """
    levels = [_eigen_derivatives(decomp, rho, drho, h / 2**i) for i in range(3)]
    if any(lv is None for lv in levels):
        return None
    (p0, v0), (p1, v1), (p2, v2) = levels
    rp1, rp2 = (4 * p1 - p0) / 3, (4 * p2 - p1) / 3
    rv1, rv2 = (4 * v1 - v0) / 3, (4 * v2 - v1) / 3
    dp = (16 * rp2 - rp1) / 15
    dpsi = (16 * rv2 - rv1) / 15
    err_p = np.abs(rp2 - rp1) / 15
    err_psi = np.linalg.norm(rv2 - rv1, axis=0) / 15
    return dp, dpsi, err_p, err_psi


def qfi_from_derivatives(
    rho: np.ndarray,
    drhos: Sequence[np.ndarray],
    rank_threshold: float = DEFAULT_RANK_THRESHOLD,
) -> MetricTensor:
    """QFI from the three-sum expression in eigenvalues and eigenvectors.

    ``F_kl = sum_n d_k p_n d_l p_n / p_n + 4 sum_n p_n Re<d_k psi_n|d_l psi_n>
    - 8 sum_nm p_n p_m/(p_n+p_m) Re[<d_k psi_n|psi_m><psi_m|d_l psi_n>]``
    over the retained support. Eigen-derivatives come from central
    differences of the decomposition of ``rho +- h d_k rho`` with eigenvector
    alignment. Rows whose derivatives are ill-defined (degenerate or badly
    conditioned spectrum) are filled from :func:`qfi_spectral` instead.
    """
    decomp = eigendecompose(rho, rank_threshold)
    if decomp.rank < 1:
        raise ValueError("density matrix is numerically zero")
    nu = len(drhos)
    r = decomp.rank
    p = decomp.support_values
    v = decomp.eigenvectors
    vr = decomp.support_vectors
    dp = np.zeros((nu, r))
    dpsi = np.zeros((nu, rho.shape[0], r), dtype=complex)
    reliable = np.ones(nu, dtype=bool)
    rho_h = 0.5 * (rho + rho.conj().T)
    for k, dr in enumerate(drhos):
        x = v.conj().T @ dr @ v
        h = _eig_fd_step(decomp, x)
        res = None if h is None else _romberg_eigen_derivatives(decomp, rho_h, dr, h)
        if res is None:
            reliable[k] = False
            continue
        dp[k], dpsi[k], err_p, err_psi = res
        # propagated error of this row's contributions to the three sums
        norms = np.linalg.norm(dpsi[k], axis=0)
        est = float(np.sum(2 * np.abs(dp[k]) * err_p / p + 16 * p * norms * err_psi))
        if not np.isfinite(est) or est > EIG_FD_ERROR_TOL:
            reliable[k] = False
    t1 = np.einsum("kn,ln,n->kl", dp, dp, 1.0 / p)
    t2 = 4.0 * np.einsum("kin,lin,n->kl", dpsi.conj(), dpsi, p).real
    c = np.einsum("im,kin->kmn", vr.conj(), dpsi)  # <psi_m|d_k psi_n>
    w = 8.0 * np.outer(p, p) / (p[:, None] + p[None, :])
    t3 = np.einsum("kmn,lmn,nm->kl", c.conj(), c, w).real
    f = t1 + t2 - t3
    n_fallback = 0
    if not np.all(reliable):
        spec = qfi_spectral(decomp, drhos)
        bad = ~reliable
        mask = bad[:, None] | bad[None, :]
        f[mask] = spec[mask]
        n_fallback = int(np.count_nonzero(mask))
        warnings.warn(
            f"{int(np.count_nonzero(bad))} parameter direction(s) had ill-defined eigen-derivatives; "
            "used the Kronecker-sum route for their entries",
            DegenerateSpectrumWarning,
            stacklevel=2,
        )
    return MetricTensor.build(f, "qfi-exact", fallback_entries=n_fallback)


def qfi_exact(
    circuit: CircuitSpec,
    theta: Sequence[float],
    rank_threshold: float = DEFAULT_RANK_THRESHOLD,
    noise: bool = True,
) -> MetricTensor:
    rho, drhos = circuit_jacobian(circuit, theta, noise=noise)
    return qfi_from_derivatives(rho, drhos, rank_threshold)


# ----------------------------------------------------- approximations & others


def qfi_approx_from_derivatives(
    drhos: Sequence[np.ndarray],
    fidelity: float | None,
    mode: str = "divide",
    fidelity_floor: float = FIDELITY_FLOOR,
) -> MetricTensor:
    """``2 tr[d_k rho d_l rho] / F`` (``mode="divide"``) or without ``1/F``."""
    gram = 2.0 * _hs_gram(drhos)
    warn = None
    if mode == "divide":
        if fidelity is None or fidelity <= 0:
            raise ValueError("divide mode needs a positive fidelity")
        gram = gram / fidelity
    elif mode != "omit":
        raise ValueError(f"unknown fidelity mode {mode!r}")
    if fidelity is not None and fidelity < fidelity_floor:
        warn = f"fidelity {fidelity:.3g} below {fidelity_floor}: approximation regime violated"
        warnings.warn(warn, ApproximationRegimeWarning, stacklevel=2)
    return MetricTensor.build(gram, "qfi-approx", fidelity=fidelity, warning=warn)


def qfi_approx(
    circuit: CircuitSpec,
    theta: Sequence[float],
    mode: str = "divide",
    fidelity_floor: float = FIDELITY_FLOOR,
) -> MetricTensor:
    """Hilbert-Schmidt approximation of the QFI for weakly mixed outputs.

    The fidelity is taken against the noiseless output of the same circuit.
    """
    rho, drhos = circuit_jacobian(circuit, theta, noise=True)
    fid = fidelity_pure(rho, run_circuit_pure(circuit, theta))
    return qfi_approx_from_derivatives(drhos, fid, mode, fidelity_floor)


def fubini_study_from_vectors(psi: np.ndarray, dpsis: Sequence[np.ndarray]) -> MetricTensor:
    d = np.stack(dpsis, axis=1) if len(dpsis) else np.zeros((psi.size, 0), dtype=complex)
    overlaps = d.conj().T @ d
    berry = d.conj().T @ psi  # <d_k psi|psi>
    a = np.real(overlaps - np.outer(berry, berry.conj()))
    return MetricTensor.build(a, "fubini-study-A")


def fubini_study_A(circuit: CircuitSpec, theta: Sequence[float]) -> MetricTensor:
    """``Re[<d_k psi|d_l psi> - <d_k psi|psi><psi|d_l psi>]`` on the noiseless circuit."""
    psi, dpsis = pure_jacobian(circuit, theta)
    return fubini_study_from_vectors(psi, dpsis)


def mixed_metric_from_derivatives(drhos: Sequence[np.ndarray]) -> MetricTensor:
    return MetricTensor.build(0.5 * _hs_gram(drhos), "mixed-M")


def mixed_metric_M(circuit: CircuitSpec, theta: Sequence[float], noise: bool = True) -> MetricTensor:
    _, drhos = circuit_jacobian(circuit, theta, noise=noise)
    return mixed_metric_from_derivatives(drhos)


def _check_basis(basis: np.ndarray, dim: int) -> np.ndarray:
    basis = np.asarray(basis, dtype=complex)
    if basis.shape != (dim, dim):
        raise ValueError(f"basis must be a complete set of {dim} column vectors")
    if np.max(np.abs(basis.conj().T @ basis - np.eye(dim))) > 1e-10:
        raise ValueError("measurement basis is not orthonormal")
    return basis


def outcome_probabilities(rho: np.ndarray, basis: np.ndarray) -> np.ndarray:
    return np.real(np.einsum("in,ij,jn->n", basis.conj(), rho, basis))


def classical_fisher(
    circuit: CircuitSpec,
    theta: Sequence[float],
    basis: np.ndarray | None = None,
    noise: bool = True,
    probability_floor: float = PROBABILITY_FLOOR,
    h: float = 1e-4,
) -> MetricTensor:
    """Fisher information of measuring ``rho(theta)`` in an orthonormal basis.

    Columns of ``basis`` are the measurement vectors (computational basis by
    default). Outcomes with ``p_n`` above the floor contribute the score
    outer product ``d_k p d_l p / p``; outcomes at (numerically) zero
    probability contribute their limiting value ``2 d_k d_l p_n``, with the
    second derivative taken by central differences of the first.
    """
    rho, drhos = circuit_jacobian(circuit, theta, noise=noise)
    basis = _check_basis(np.eye(circuit.dim) if basis is None else basis, circuit.dim)
    probs = outcome_probabilities(rho, basis)
    dprobs = np.stack([outcome_probabilities(d, basis) for d in drhos]) if drhos else np.zeros((0, circuit.dim))
    live = probs > probability_floor
    f = np.einsum("kn,ln,n->kl", dprobs[:, live], dprobs[:, live], 1.0 / probs[live])
    if np.any(~live) and circuit.n_params:
        theta = np.asarray(theta, dtype=float)
        hess = np.zeros((circuit.n_params, circuit.n_params, int(np.count_nonzero(~live))))
        for l in range(circuit.n_params):
            shift = np.zeros_like(theta)
            shift[l] = h
            _, dp_plus = circuit_jacobian(circuit, theta + shift, noise=noise)
            _, dp_minus = circuit_jacobian(circuit, theta - shift, noise=noise)
            for k in range(circuit.n_params):
                a = outcome_probabilities(dp_plus[k], basis[:, ~live])
                b = outcome_probabilities(dp_minus[k], basis[:, ~live])
                hess[k, l] = (a - b) / (2 * h)
        hess = 0.5 * (hess + hess.transpose(1, 0, 2))
        f = f + 2.0 * hess.sum(axis=2)
    return MetricTensor.build(f, "classical-Fc")


# ------------------------------------------------------------------ inversion


def regularized_inverse(
    tensor: MetricTensor | np.ndarray,
    scheme: str = "truncated-pseudo",
    cutoff: float = 1e-8,
    lambda_reg: float = 1e-4,
) -> tuple[np.ndarray, bool]:
    """Regularised inverse of a symmetric metric.

    ``"truncated-pseudo"`` inverts eigenvalues at or above ``cutoff`` times
    the largest one; ``"tikhonov"`` returns ``(T + lambda_reg I)^-1``.
    Returns ``(inverse, fallback)``; ``fallback`` is True when nothing could
    be inverted and the identity (plain gradient direction) was returned.
    """
    t = np.asarray(tensor, dtype=float)
    t = 0.5 * (t + t.T)
    n = t.shape[0]
    if scheme == "truncated-pseudo":
        lam, w = np.linalg.eigh(t)
        top = lam[-1] if n else 0.0
        if n == 0 or top <= 0 or not np.isfinite(top):
            return np.eye(n), True
        keep = lam >= cutoff * top
        inv = (w[:, keep] / lam[keep]) @ w[:, keep].T
        return 0.5 * (inv + inv.T), False
    if scheme == "tikhonov":
        if lambda_reg < 0:
            raise ValueError("Tikhonov parameter must be non-negative")
        reg = t + lambda_reg * np.eye(n)
        lam, w = np.linalg.eigh(reg)
        if n == 0 or lam[0] <= 0:
            return np.eye(n), True
        inv = (w / lam) @ w.T
        return 0.5 * (inv + inv.T), False
    raise ValueError(f"unknown inversion scheme {scheme!r}")
