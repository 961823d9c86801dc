"""Numerical checks of the epsilon-mixed state identities.

An epsilon-mixed state has one dominant eigenvalue ``1 - eps`` and a tail
``eps p_n`` (``n >= 2``). The families used here are unitary orbits
``exp(-i theta G) rho exp(i theta G)`` (eigenvalues fixed, so ``kappa = 0``),
optionally with ``eps`` itself depending on ``theta`` (``kappa > 0``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..metrics import qfi_spectral, sld
from ..states import eigendecompose, random_unitary

SQUARE_TOL = 1e-12
BOUND_SLACK = 1e-10


def _check_eps(eps: float) -> None:
    if not 0.0 <= eps <= 0.5:
        raise ValueError(f"mixedness {eps} outside [0, 0.5]")


def epsilon_mixed_spectrum(dim: int, eps: float, rng: np.random.Generator | None = None, spread: float = 0.0) -> np.ndarray:
    """Eigenvalues ``(1 - eps, eps p_2, ..., eps p_d)``.

    The tail is uniform for ``spread = 0``; otherwise each ``p_n`` is scaled
    by ``1 + spread * u`` with ``u`` uniform in ``[-1, 1]`` and renormalised.
    """
    _check_eps(eps)
    if dim < 2:
        raise ValueError("dimension must be at least 2")
    tail = np.ones(dim - 1)
    if spread:
        if rng is None:
            raise ValueError("a generator is required for a non-uniform tail")
        tail = tail * (1.0 + spread * rng.uniform(-1.0, 1.0, dim - 1))
    tail = tail / tail.sum()
    return np.concatenate([[1.0 - eps], eps * tail])


def _assemble(vals: np.ndarray, u: np.ndarray) -> np.ndarray:
    rho = (u * vals) @ u.conj().T
    return 0.5 * (rho + rho.conj().T)


def _random_generator(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Hermitian matrix with unit spectral norm."""
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    g = 0.5 * (a + a.conj().T)
    return g / np.max(np.abs(np.linalg.eigvalsh(g)))


def square_identity_residual(vals: np.ndarray, u: np.ndarray) -> float:
    """``max |rho^2 - (1 - eps) rho - R|`` with ``R`` in closed form."""
    eps = 1.0 - vals[0]
    rho = _assemble(vals, u)
    eta = np.zeros_like(vals)
    eta[1:] = vals[1:] ** 2 - (1.0 - eps) * vals[1:]  # eps^2 p^2 - (1-eps) eps p
    r = (u * eta) @ u.conj().T
    return float(np.max(np.abs(rho @ rho - (1.0 - eps) * rho - r)))


@dataclass
class AnticommutatorSample:
    dim: int
    eps: float
    corrected: float
    as_stated: float


def anticommutator_residuals(vals: np.ndarray, u: np.ndarray, gens: list[np.ndarray]) -> AnticommutatorSample:
    """Relative Frobenius residuals of the SLD anticommutator identity.

    ``corrected`` compares ``tr[(L_k rho + rho L_k)(L_l rho + rho L_l)]`` with
    ``(1 - eps) tr[rho {L_k, L_l}]``; ``as_stated`` divides by ``1 - eps``
    instead. Only the former tends to zero as the dimension grows.
    """
    eps = 1.0 - vals[0]
    rho = _assemble(vals, u)
    decomp = eigendecompose(rho)
    ls = []
    for g in gens:
        drho = -1j * (g @ rho - rho @ g)
        ls.append(sld(decomp, 0.5 * (drho + drho.conj().T)).matrix)
    n = len(ls)
    lhs = np.zeros((n, n))
    anti = np.zeros((n, n))
    for k in range(n):
        ak = ls[k] @ rho + rho @ ls[k]
        for l in range(n):
            al = ls[l] @ rho + rho @ ls[l]
            lhs[k, l] = np.real(np.trace(ak @ al))
            anti[k, l] = np.real(np.trace(rho @ (ls[k] @ ls[l] + ls[l] @ ls[k])))
    scale = np.linalg.norm(lhs)
    corrected = np.linalg.norm(lhs - (1.0 - eps) * anti) / scale
    as_stated = np.linalg.norm(lhs - anti / (1.0 - eps)) / scale
    return AnticommutatorSample(rho.shape[0], eps, float(corrected), float(as_stated))


@dataclass
class QFIBoundSample:
    dim: int
    eps: float
    kappa: float
    kappa_estimate: float
    qfi_mixed: float
    bound: float
    tolerance: float

    @property
    def holds(self) -> bool:
        return self.qfi_mixed <= self.bound + self.tolerance + BOUND_SLACK


def qfi_bound_sample(vals: np.ndarray, u: np.ndarray, g: np.ndarray, kappa: float = 0.0, h: float = 1e-6) -> QFIBoundSample:
    """QFI of ``rho(theta)`` at ``theta = 0`` against ``(1 - eps)`` times the ideal value.

    The family is ``exp(-i theta G) rho_eps(theta) exp(i theta G)`` with
    ``eps(theta) = eps + kappa theta`` and a fixed tail shape. ``kappa`` is
    re-estimated from central differences of the dominant eigenvalue.
    """
    eps = 1.0 - vals[0]
    tail = vals[1:] / eps if eps > 0 else np.full(vals.size - 1, 1.0 / (vals.size - 1))

    def state(theta):
        e = eps + kappa * theta
        spec = np.concatenate([[1.0 - e], e * tail])
        w = np.linalg.eigh(g)
        rot = (w[1] * np.exp(-1j * theta * w[0])) @ w[1].conj().T
        return _assemble(spec, rot @ u)

    rho = state(0.0)
    drho = (state(h) - state(-h)) / (2 * h)
    drho = 0.5 * (drho + drho.conj().T)
    f_mixed = float(qfi_spectral(eigendecompose(rho), [drho])[0, 0])
    psi = u[:, 0]
    dpsi = -1j * (g @ psi)
    f_ideal = 4.0 * float(np.real(np.vdot(dpsi, dpsi) - abs(np.vdot(psi, dpsi)) ** 2))
    p_plus = np.linalg.eigvalsh(state(h))[-1]
    p_minus = np.linalg.eigvalsh(state(-h))[-1]
    kappa_est = abs(p_plus - p_minus) / (2 * h)
    d = rho.shape[0]
    return QFIBoundSample(d, eps, kappa, kappa_est, f_mixed, (1.0 - eps) * f_ideal, 10.0 * eps * kappa_est / d)


@dataclass
class AppendixReport:
    square_max_residual: float
    square_trials: int
    anticommutator: dict[int, dict[str, float]]
    anticommutator_monotone: bool
    anticommutator_ratio: float
    qfi_bound_trials: int
    qfi_bound_failures: int
    qfi_bound_max_excess: float
    samples: dict = field(default_factory=dict, repr=False)

    @property
    def passed(self) -> bool:
        return (
            self.square_max_residual < SQUARE_TOL
            and self.anticommutator_monotone
            and self.qfi_bound_failures == 0
        )

    def as_dict(self) -> dict:
        return {
            "square_max_residual": self.square_max_residual,
            "square_trials": self.square_trials,
            "anticommutator": {str(k): v for k, v in self.anticommutator.items()},
            "anticommutator_monotone": self.anticommutator_monotone,
            "anticommutator_ratio_smallest_to_largest_dim": self.anticommutator_ratio,
            "qfi_bound_trials": self.qfi_bound_trials,
            "qfi_bound_failures": self.qfi_bound_failures,
            "qfi_bound_max_excess": self.qfi_bound_max_excess,
            "passed": self.passed,
        }


def appendix_checks(
    trials: int = 100,
    dims: tuple[int, ...] = (8, 16, 32, 64),
    eps_range: tuple[float, float] = (0.01, 0.3),
    anticommutator_eps: float = 0.05,
    anticommutator_trials: int = 10,
    seed: int = 0,
) -> AppendixReport:
    """Run every epsilon-mixed identity check and collect the results.

    ``trials`` random states (dimension drawn from ``dims``, mixedness from
    ``eps_range``) feed the square-identity and QFI-bound checks. The bound is
    checked for ``kappa = 0`` and for ``kappa = eps^2 / d``, the largest rate
    for which the classical ``kappa^2 / eps`` term stays inside the bound.
    The anticommutator check uses ``anticommutator_trials`` uniform-tail
    states per dimension.
    """
    lo, hi = eps_range
    _check_eps(lo)
    _check_eps(hi)
    rng = np.random.default_rng(seed)
    squares = []
    t2 = []
    for _ in range(trials):
        d = int(rng.choice(dims))
        eps = float(rng.uniform(lo, hi))
        u = random_unitary(d, rng)
        vals = epsilon_mixed_spectrum(d, eps, rng, spread=0.5)
        squares.append(square_identity_residual(vals, u))
        flat = epsilon_mixed_spectrum(d, eps)
        g = _random_generator(d, rng)
        t2.append(qfi_bound_sample(flat, u, g, 0.0))
        t2.append(qfi_bound_sample(flat, u, g, eps**2 / d))

    t1: dict[int, dict[str, float]] = {}
    for d in dims:
        rows = []
        for _ in range(anticommutator_trials):
            u = random_unitary(d, rng)
            gens = [_random_generator(d, rng) for _ in range(2)]
            rows.append(anticommutator_residuals(epsilon_mixed_spectrum(d, anticommutator_eps), u, gens))
        t1[d] = {
            "corrected": float(np.mean([r.corrected for r in rows])),
            "as_stated": float(np.mean([r.as_stated for r in rows])),
        }
    series = [t1[d]["corrected"] for d in sorted(dims)]
    monotone = bool(all(b < a for a, b in zip(series, series[1:])))
    excess = max((s.qfi_mixed - s.bound - s.tolerance for s in t2), default=-np.inf)
    return AppendixReport(
        square_max_residual=float(max(squares, default=0.0)),
        square_trials=len(squares),
        anticommutator=t1,
        anticommutator_monotone=monotone,
        anticommutator_ratio=float(series[0] / series[-1]) if series and series[-1] > 0 else np.inf,
        qfi_bound_trials=len(t2),
        qfi_bound_failures=sum(not s.holds for s in t2),
        qfi_bound_max_excess=float(excess),
        samples={"qfi_bound": t2},
    )
