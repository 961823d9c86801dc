"""Optimisation studies: reference optimum, landscape scan, noise sweeps, QFI error scaling."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..channels import CircuitSpec, circuit_jacobian, run_circuit, run_circuit_pure
from ..metrics import qfi_approx_from_derivatives, qfi_from_derivatives
from ..optimizers import OptimizationProblem, Trajectory, UpdateRule, optimize, step
from ..pauli import PauliSum
from ..states import DecompositionError, expectation, fidelity_pure
from .benchmarks import (
    TWO_QUBIT_FACTOR,
    HeisenbergRingSpec,
    build_ansatz,
    build_heisenberg_ring,
    landscape_circuit,
    landscape_hamiltonian,
)

LOG_FLOOR = 1e-16
P_ERROR_MAX = 0.1


def log_delta(delta_e: float | np.ndarray) -> np.ndarray:
    """``log10`` of an energy gap, floored at ``1e-16``."""
    return np.log10(np.maximum(np.asarray(delta_e, dtype=float), LOG_FLOOR))


# ------------------------------------------------------------ reference optimum


@dataclass(frozen=True)
class OptimumEstimate:
    theta: np.ndarray
    energy: float
    start_index: int
    steps_taken: int


def locate_optimum(
    circuit: CircuitSpec,
    hamiltonian: PauliSum,
    starts: np.ndarray,
    step_size: float = 0.05,
    steps: int = 500,
    tol: float = 1e-13,
    patience: int = 10,
    metric: str = "qfi-exact",
    noise: bool = True,
) -> OptimumEstimate:
    """Best endpoint of natural-gradient runs from every row of ``starts``.

    A run stops early once the energy has moved by less than ``tol`` for
    ``patience`` consecutive steps. The lowest energy seen on any run wins.
    """
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    rule = UpdateRule("natural-gradient", step_size, metric=metric)
    best: OptimumEstimate | None = None
    for i, theta in enumerate(starts):
        problem = OptimizationProblem(circuit, hamiltonian, theta, noise=noise)
        energy = problem.energy(theta)
        cur = (energy, theta.copy(), 0)
        quiet = 0
        for t in range(1, steps + 1):
            try:
                theta, _ = step(rule, problem, theta)
            except (np.linalg.LinAlgError, DecompositionError, ValueError):
                break
            e = problem.energy(theta)
            if not (math.isfinite(e) and np.all(np.isfinite(theta))):
                break
            quiet = quiet + 1 if abs(e - energy) < tol else 0
            energy = e
            if e < cur[0]:
                cur = (e, theta.copy(), t)
            if quiet >= patience:
                break
        if best is None or cur[0] < best.energy:
            best = OptimumEstimate(cur[1], float(cur[0]), i, cur[2])
    if best is None:
        raise ValueError("no starting points given")
    return best


def random_starts(rng: np.random.Generator, count: int, n_params: int) -> np.ndarray:
    return rng.uniform(-np.pi, np.pi, (count, n_params))


# ------------------------------------------------------------------- landscape


@dataclass
class LandscapeResult:
    theta1: np.ndarray
    theta2: np.ndarray
    energies: np.ndarray  # shape (len(theta1), len(theta2))
    optimum: OptimumEstimate
    start: np.ndarray
    trajectories: dict[str, Trajectory] = field(default_factory=dict)

    def rows(self):
        for i, a in enumerate(self.theta1):
            for j, b in enumerate(self.theta2):
                yield float(a), float(b), float(self.energies[i, j])


def landscape_optimum(circuit: CircuitSpec, hamiltonian: PauliSum, grid: int = 6) -> OptimumEstimate:
    """Reference optimum from a coarse grid of starts on the two-parameter landscape."""
    a = np.linspace(0.3, 3.0, grid)
    b = np.linspace(-3.0, 3.0, grid + 1)
    starts = np.array([(x, y) for x in a for y in b])
    return locate_optimum(circuit, hamiltonian, starts)


def default_rules(step_size: float = 0.2, metric: str = "qfi-exact", **kwargs) -> list[UpdateRule]:
    """All four update rules, with imaginary-time steps matched through ``lam = 4 dt``."""
    rules = []
    for v in ("gradient-descent", "natural-gradient", "imag-time-mixed", "imag-time-pure-naive"):
        extra = {"metric": metric} if v == "natural-gradient" else {}
        rules.append(UpdateRule.matched(v, step_size, **extra, **kwargs))
    return rules


def landscape_scan(
    grid_points: int = 41,
    p_error: float = 0.01,
    start: Sequence[float] | None = None,
    rules: Sequence[UpdateRule] | None = None,
    steps: int = 30,
    two_qubit_factor: float = TWO_QUBIT_FACTOR,
    theta_noise: float = 0.0,
    seed: int = 0,
    init_radius: float = 0.5,
) -> LandscapeResult:
    """Energy on a ``grid_points`` x ``grid_points`` lattice over ``[-pi, pi]^2``.

    Every rule is run from the same start; without an explicit ``start`` one is
    drawn within ``init_radius`` of the located optimum.
    """
    circuit = landscape_circuit(p_error, two_qubit_factor, theta_noise)
    ham = landscape_hamiltonian()
    axis = np.linspace(-np.pi, np.pi, grid_points)
    energies = np.array([[expectation_at(circuit, ham, (a, b)) for b in axis] for a in axis])
    opt = landscape_optimum(circuit, ham)
    if start is None:
        rng = np.random.default_rng(seed)
        start = opt.theta + rng.uniform(-init_radius, init_radius, 2)
    start = np.asarray(start, dtype=float)
    problem = OptimizationProblem(circuit, ham, start, e_opt=opt.energy)
    trajs = {r.label: optimize(problem, r, steps) for r in (rules or default_rules())}
    return LandscapeResult(axis, axis.copy(), energies, opt, start, trajs)


def expectation_at(circuit: CircuitSpec, hamiltonian: PauliSum, theta: Sequence[float], noise: bool = True) -> float:
    return expectation(run_circuit(circuit, theta, noise=noise), hamiltonian)


# ---------------------------------------------------------------- noise sweeps


@dataclass(frozen=True)
class SweepSpec:
    """Noise sweep over ``p_errors`` on the Heisenberg ring benchmark.

    ``theta_noise`` defaults to 0 here (see the README); the channel default of
    0.1 is still available through this field.
    """

    n_qubits: int = 4
    p_errors: tuple[float, ...] = (1e-4, 1e-3, 1e-2)
    repetitions: int = 25
    steps: int = 30
    init_radius: float = 0.5
    master_seed: int = 0
    layers: int = 1
    coupling: float = 1.0
    omega_seed: int | None = 0
    omega: tuple[float, ...] | None = None
    two_qubit_factor: float = TWO_QUBIT_FACTOR
    theta_noise: float = 0.0
    optimum_starts: int = 3
    optimum_steps: int = 500
    optimum_step_size: float = 0.05
    optimum_metric: str = "qfi-exact"

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if self.steps < 0:
            raise ValueError("steps must be non-negative")
        if not self.p_errors:
            raise ValueError("empty p_error grid")
        for p in self.p_errors:
            if not 0.0 <= p <= P_ERROR_MAX:
                raise ValueError(f"p_error {p} outside [0, {P_ERROR_MAX}]")
        if self.init_radius < 0:
            raise ValueError("init radius must be non-negative")

    def hamiltonian(self) -> PauliSum:
        return build_heisenberg_ring(HeisenbergRingSpec(self.n_qubits, self.coupling, self.omega_seed, self.omega))

    def circuit(self, p_error: float) -> CircuitSpec:
        return build_ansatz(self.n_qubits, self.layers, p_error, self.two_qubit_factor, self.theta_noise)


@dataclass
class RunRecord:
    p_error: float
    rule: str
    seed: int
    final_energy: float
    lowest_energy: float
    status: str
    trajectory: Trajectory | None = None

    @property
    def diverged(self) -> bool:
        return self.status != "completed"


@dataclass
class SweepCell:
    p_error: float
    rule: str
    mean_log_delta: float
    std_log_delta: float
    completed: int
    diverged: int


@dataclass
class SweepResult:
    spec: SweepSpec
    e_opt: dict[float, float]
    e_opt_located: dict[float, float]
    runs: list[RunRecord]
    cells: list[SweepCell]

    def cell(self, p_error: float, rule: str) -> SweepCell:
        for c in self.cells:
            if c.p_error == p_error and c.rule == rule:
                return c
        raise KeyError((p_error, rule))

    def final_delta(self, run: RunRecord) -> float:
        return run.final_energy - self.e_opt[run.p_error]

    def rows(self):
        for r in self.runs:
            yield r.p_error, r.rule, r.seed, self.final_delta(r), r.diverged


def repetition_rng(master_seed: int, p_index: int, repetition: int) -> np.random.Generator:
    """Generator tied to ``(master seed, grid index, repetition)``, not to scheduling."""
    return np.random.default_rng(np.random.SeedSequence([master_seed, p_index, repetition]))


def _optimum_task(args):
    spec, p_index = args
    p = spec.p_errors[p_index]
    circuit = spec.circuit(p)
    rng = np.random.default_rng(np.random.SeedSequence([spec.master_seed, p_index, 2**31]))
    starts = random_starts(rng, spec.optimum_starts, circuit.n_params)
    return locate_optimum(
        circuit, spec.hamiltonian(), starts, spec.optimum_step_size, spec.optimum_steps, metric=spec.optimum_metric
    )


def _repetition_task(args):
    spec, rules, p_index, rep, theta_opt, keep = args
    p = spec.p_errors[p_index]
    circuit = spec.circuit(p)
    rng = repetition_rng(spec.master_seed, p_index, rep)
    theta0 = theta_opt + rng.uniform(-spec.init_radius, spec.init_radius, theta_opt.size)
    problem = OptimizationProblem(circuit, spec.hamiltonian(), theta0)
    out = []
    for rule in rules:
        traj = optimize(problem, rule, spec.steps)
        final = traj.final.energy if traj.records else math.nan
        low = float(np.min(traj.energies)) if traj.records else math.nan
        out.append(RunRecord(p, rule.label, rep, final, low, traj.status, traj if keep else None))
    return out


def _map(fn, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def default_workers() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def noise_sweep(
    spec: SweepSpec,
    rules: Sequence[UpdateRule] | None = None,
    workers: int = 1,
    keep_trajectories: bool = False,
) -> SweepResult:
    """Run every rule from shared starts near the located optimum.

    The reference energy per ``p_error`` is the lower of the located optimum
    and the lowest energy any run reaches, so ``delta_e`` is never negative.
    Runs that diverge or abort are excluded from the statistics and counted.
    """
    rules = list(rules or default_rules()[:3])
    labels = [r.label for r in rules]
    if len(set(labels)) != len(labels):
        raise ValueError("duplicate update rules in sweep")
    optima = _map(_optimum_task, [(spec, i) for i in range(len(spec.p_errors))], workers)
    tasks = [
        (spec, rules, i, rep, optima[i].theta, keep_trajectories)
        for i in range(len(spec.p_errors))
        for rep in range(spec.repetitions)
    ]
    runs = [r for batch in _map(_repetition_task, tasks, workers) for r in batch]

    located = {p: optima[i].energy for i, p in enumerate(spec.p_errors)}
    e_opt = dict(located)
    for r in runs:
        if not r.diverged and math.isfinite(r.lowest_energy):
            e_opt[r.p_error] = min(e_opt[r.p_error], r.lowest_energy)

    cells = []
    for p in spec.p_errors:
        for label in labels:
            sel = [r for r in runs if r.p_error == p and r.rule == label]
            ok = [r for r in sel if not r.diverged]
            logs = log_delta([r.final_energy - e_opt[p] for r in ok]) if ok else np.array([])
            cells.append(
                SweepCell(
                    p,
                    label,
                    float(np.mean(logs)) if logs.size else math.nan,
                    float(np.std(logs)) if logs.size else math.nan,
                    len(ok),
                    len(sel) - len(ok),
                )
            )
    return SweepResult(spec, e_opt, located, runs, cells)


# ------------------------------------------------------------ QFI error scaling


@dataclass
class QFIErrorRow:
    n_qubits: int
    p_error: float
    one_minus_fidelity: float
    delta_avg: float


def qfi_error_study(
    n_qubits: Sequence[int] = (2, 3, 4, 5),
    p_errors: Sequence[float] = (1e-5, 3e-5, 1e-4, 3e-4, 1e-3),
    samples: int = 5,
    radius: float = 0.1,
    seed: int = 0,
    layers: int = 1,
    two_qubit_factor: float = TWO_QUBIT_FACTOR,
    theta_noise: float = 0.0,
    optimum_starts: int = 2,
) -> list[QFIErrorRow]:
    """Mean entrywise gap between the exact and Hilbert-Schmidt QFI near the optimum.

    The optimum of the noiseless ring energy is located once per qubit count;
    ``samples`` points within ``radius`` of it are shared across the
    ``p_errors`` grid. ``1 - F`` and the gap are averaged over those points.
    """
    rows = []
    for n in n_qubits:
        ham = build_heisenberg_ring(HeisenbergRingSpec(n))
        pure = build_ansatz(n, layers, 0.0)
        rng = np.random.default_rng(np.random.SeedSequence([seed, n]))
        opt = locate_optimum(
            pure, ham, random_starts(rng, optimum_starts, pure.n_params), 0.2, 200, metric="qfi-approx", noise=False
        )
        points = opt.theta + rng.uniform(-radius, radius, (samples, pure.n_params))
        for p in p_errors:
            circuit = build_ansatz(n, layers, p, two_qubit_factor, theta_noise)
            infid, gaps = [], []
            for theta in points:
                rho, drhos = circuit_jacobian(circuit, theta)
                fid = fidelity_pure(rho, run_circuit_pure(circuit, theta))
                exact = qfi_from_derivatives(rho, drhos).values
                approx = qfi_approx_from_derivatives(drhos, fid, "divide").values
                infid.append(1.0 - fid)
                gaps.append(float(np.mean(np.abs(exact - approx))))
            rows.append(QFIErrorRow(n, p, float(np.mean(infid)), float(np.mean(gaps))))
    return rows


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    lx, ly = np.log10(np.asarray(x)), np.log10(np.asarray(y))
    return float(np.polyfit(lx, ly, 1)[0])


__all__ = [
    "LandscapeResult",
    "OptimumEstimate",
    "QFIErrorRow",
    "RunRecord",
    "SweepCell",
    "SweepResult",
    "SweepSpec",
    "default_rules",
    "default_workers",
    "expectation_at",
    "landscape_optimum",
    "landscape_scan",
    "locate_optimum",
    "log_delta",
    "loglog_slope",
    "noise_sweep",
    "qfi_error_study",
    "random_starts",
    "repetition_rng",
]
