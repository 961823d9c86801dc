"""Parameter-update rules and optimisation trajectories.

Four rules are available:

``gradient-descent``      ``theta - lam g``
``natural-gradient``      ``theta - lam F^-1 g`` with ``F`` the exact or approximate QFI
``imag-time-mixed``       ``theta + dt M^-1 Y`` (descent direction, see :func:`y_vector`)
``imag-time-pure-naive``  ``theta - dt A^-1 g`` with ``A`` and ``g`` from the noiseless circuit

For natural gradient and imaginary time the step sizes are related by
``lam = 4 dt``; :meth:`UpdateRule.matched` builds a rule from ``lam``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channels import CircuitSpec, circuit_jacobian, pure_jacobian, run_circuit, run_circuit_pure
from .metrics import (
    FIDELITY_FLOOR,
    MetricTensor,
    fubini_study_from_vectors,
    mixed_metric_from_derivatives,
    qfi_approx_from_derivatives,
    qfi_from_derivatives,
    regularized_inverse,
)
from .pauli import PauliSum
from .states import DecompositionError, expectation, fidelity_pure

VARIANTS = ("gradient-descent", "natural-gradient", "imag-time-mixed", "imag-time-pure-naive")
METRIC_SOURCES = ("qfi-exact", "qfi-approx")
DIVERGENCE_FACTOR = 1e6


def _hmat(h: PauliSum | np.ndarray) -> np.ndarray:
    return h.matrix if isinstance(h, PauliSum) else np.asarray(h)


def gradient_from_derivatives(drhos: Sequence[np.ndarray], h: PauliSum | np.ndarray) -> np.ndarray:
    hm = _hmat(h)
    return np.array([np.real(np.sum(d * hm.T)) for d in drhos])


def y_from_derivatives(rho: np.ndarray, drhos: Sequence[np.ndarray], h: PauliSum | np.ndarray) -> np.ndarray:
    hr = _hmat(h) @ rho
    return np.array([-np.real(np.sum(d * hr.T)) for d in drhos])


def gradient(circuit: CircuitSpec, theta: Sequence[float], h: PauliSum | np.ndarray, noise: bool = True) -> np.ndarray:
    """``g_k = tr[(d_k rho) H]``."""
    _, drhos = circuit_jacobian(circuit, theta, noise=noise)
    return gradient_from_derivatives(drhos, h)


def y_vector(circuit: CircuitSpec, theta: Sequence[float], h: PauliSum | np.ndarray, noise: bool = True) -> np.ndarray:
    """``Y_k = -Re tr[(d_k rho) H rho]``, which equals ``-1/2 d_k tr[rho^2 H]``.

    For pure states ``Y = -g/2``, so descent moves along ``+M^-1 Y``.
    """
    rho, drhos = circuit_jacobian(circuit, theta, noise=noise)
    return y_from_derivatives(rho, drhos, h)


@dataclass(frozen=True)
class UpdateRule:
    """One parameter-update law.

    ``step_size`` is ``lam`` for gradient descent and natural gradient and
    ``dt`` for the two imaginary-time rules.
    """

    variant: str
    step_size: float = 0.2
    metric: str = "qfi-exact"
    inversion: str = "truncated-pseudo"
    cutoff: float = 1e-8
    lambda_reg: float = 1e-4
    fidelity_mode: str = "divide"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown update rule {self.variant!r}; choose from {VARIANTS}")
        if not self.step_size > 0:
            raise ValueError("step size must be positive")
        if self.metric not in METRIC_SOURCES:
            raise ValueError(f"metric source must be one of {METRIC_SOURCES}")

    @classmethod
    def matched(cls, variant: str, lam: float = 0.2, **kwargs) -> UpdateRule:
        """Rule whose step corresponds to ``lam`` under ``lam = 4 dt``."""
        step = lam / 4 if variant.startswith("imag-time") else lam
        return cls(variant, step, **kwargs)

    @property
    def label(self) -> str:
        tags = []
        if self.variant == "natural-gradient":
            tags.append(self.metric)
            if self.metric == "qfi-approx" and self.fidelity_mode != "divide":
                tags.append(f"fidelity={self.fidelity_mode}")
        if self.variant in ("natural-gradient", "imag-time-mixed", "imag-time-pure-naive"):
            if self.inversion != "truncated-pseudo":
                tags.append(f"{self.inversion}={self.lambda_reg:g}")
        return f"{self.variant}[{','.join(tags)}]" if tags else self.variant

    def invert(self, tensor: MetricTensor | np.ndarray) -> tuple[np.ndarray, bool]:
        return regularized_inverse(tensor, self.inversion, self.cutoff, self.lambda_reg)


@dataclass(frozen=True)
class OptimizationProblem:
    circuit: CircuitSpec
    hamiltonian: PauliSum
    theta0: np.ndarray
    theta_opt: np.ndarray | None = None
    noise: bool = True
    e_opt: float | None = None

    def __post_init__(self):
        theta0 = np.asarray(self.theta0, dtype=float)
        if theta0.shape != (self.circuit.n_params,):
            raise ValueError(f"theta0 must have {self.circuit.n_params} entries")
        if self.hamiltonian.n_qubits != self.circuit.n_qubits:
            raise ValueError("Hamiltonian and circuit act on different qubit counts")
        object.__setattr__(self, "theta0", theta0)
        if self.theta_opt is not None:
            opt = np.asarray(self.theta_opt, dtype=float)
            if opt.shape != theta0.shape:
                raise ValueError("theta_opt must match theta0 in length")
            object.__setattr__(self, "theta_opt", opt)
            if self.e_opt is None:
                e = self.energy(opt)
                object.__setattr__(self, "e_opt", e)

    def energy(self, theta: Sequence[float]) -> float:
        return expectation(run_circuit(self.circuit, theta, noise=self.noise), self.hamiltonian)


@dataclass
class StepRecord:
    step: int
    theta: np.ndarray
    energy: float
    delta_e: float | None
    cond_number: float
    fallback: bool


@dataclass
class Trajectory:
    rule: str
    records: list[StepRecord] = field(default_factory=list)
    status: str = "running"
    message: str = ""

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.energy for r in self.records])

    @property
    def delta_e(self) -> np.ndarray:
        return np.array([np.nan if r.delta_e is None else r.delta_e for r in self.records])

    @property
    def thetas(self) -> np.ndarray:
        return np.array([r.theta for r in self.records])

    @property
    def final(self) -> StepRecord:
        return self.records[-1]


@dataclass
class _StepData:
    """Everything one update needs, evaluated at the current point."""

    energy: float
    direction: np.ndarray
    cond_number: float
    fallback: bool


def _cond(values: np.ndarray) -> float:
    lam = np.linalg.eigvalsh(0.5 * (values + values.T)) if values.size else np.array([1.0])
    if lam[0] <= 0:
        return math.inf
    return float(lam[-1] / lam[0])


def _evaluate(rule: UpdateRule, problem: OptimizationProblem, theta: np.ndarray) -> _StepData:
    circ, ham = problem.circuit, problem.hamiltonian
    if rule.variant == "imag-time-pure-naive":
        psi, dpsis = pure_jacobian(circ, theta)
        hm = ham.matrix
        hpsi = hm @ psi
        g = np.array([2.0 * np.real(np.vdot(d, hpsi)) for d in dpsis])
        a = fubini_study_from_vectors(psi, dpsis)
        inv, fb = rule.invert(a)
        if problem.noise:
            energy = problem.energy(theta)
        else:
            energy = float(np.real(np.vdot(psi, hpsi)))
        return _StepData(energy, -rule.step_size * (inv @ g), _cond(a.values), fb)

    rho, drhos = circuit_jacobian(circ, theta, noise=problem.noise)
    energy = expectation(rho, ham)
    if rule.variant == "gradient-descent":
        g = gradient_from_derivatives(drhos, ham)
        return _StepData(energy, -rule.step_size * g, 1.0, False)
    if rule.variant == "imag-time-mixed":
        y = y_from_derivatives(rho, drhos, ham)
        m = mixed_metric_from_derivatives(drhos)
        inv, fb = rule.invert(m)
        return _StepData(energy, rule.step_size * (inv @ y), _cond(m.values), fb)
    g = gradient_from_derivatives(drhos, ham)
    if rule.metric == "qfi-exact":
        f = qfi_from_derivatives(rho, drhos)
    else:
        fid = fidelity_pure(rho, run_circuit_pure(circ, theta)) if rule.fidelity_mode == "divide" else None
        f = qfi_approx_from_derivatives(drhos, fid, rule.fidelity_mode, FIDELITY_FLOOR)
    inv, fb = rule.invert(f)
    return _StepData(energy, -rule.step_size * (inv @ g), _cond(f.values), fb)


def step(rule: UpdateRule, problem: OptimizationProblem, theta: Sequence[float]) -> tuple[np.ndarray, bool]:
    """One update from ``theta``; returns ``(theta_next, fallback_flag)``."""
    theta = np.asarray(theta, dtype=float)
    data = _evaluate(rule, problem, theta)
    return theta + data.direction, data.fallback


def optimize(
    problem: OptimizationProblem,
    rule: UpdateRule,
    steps: int,
    e_opt: float | None = None,
) -> Trajectory:
    """Run ``steps`` updates and record ``steps + 1`` points.

    ``e_opt`` (or ``problem.e_opt``) is the reference energy for ``delta_e``.
    A non-finite energy or parameter vector, or ``|E| > 1e6 ||H||``, stops
    the run with status ``"aborted"`` or ``"diverged"``.
    """
    if steps < 0:
        raise ValueError("steps must be non-negative")
    ref = problem.e_opt if e_opt is None else e_opt
    limit = DIVERGENCE_FACTOR * max(problem.hamiltonian.norm(), 1e-300)
    traj = Trajectory(rule.label)
    theta = problem.theta0.copy()
    for t in range(steps + 1):
        if t < steps:
            try:
                data = _evaluate(rule, problem, theta)
            except (np.linalg.LinAlgError, DecompositionError, FloatingPointError, ValueError) as exc:
                traj.status, traj.message = "aborted", f"step {t}: {exc}"
                return traj
            energy, cond, fb = data.energy, data.cond_number, data.fallback
        else:
            energy, cond, fb = problem.energy(theta), math.nan, False
        traj.records.append(StepRecord(t, theta.copy(), energy, None if ref is None else energy - ref, cond, fb))
        if not (np.isfinite(energy) and np.all(np.isfinite(theta))):
            traj.status, traj.message = "aborted", f"non-finite value at step {t}"
            return traj
        if abs(energy) > limit:
            traj.status, traj.message = "diverged", f"|E| = {abs(energy):.3e} exceeds {limit:.3e} at step {t}"
            return traj
        if t < steps:
            if not np.all(np.isfinite(data.direction)):
                traj.status, traj.message = "aborted", f"non-finite update direction at step {t}"
                return traj
            theta = theta + data.direction
    traj.status = "completed"
    return traj
