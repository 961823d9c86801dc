"""Execute a validated :class:`RunConfig` and write its output files."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .config import RunConfig
from .experiments.appendix import appendix_checks
from .experiments.benchmarks import HeisenbergRingSpec, build_ansatz, build_heisenberg_ring
from .experiments.scalability import scalability_calc
from .experiments.studies import (
    SweepSpec,
    landscape_scan,
    locate_optimum,
    loglog_slope,
    noise_sweep,
    qfi_error_study,
    random_starts,
)
from .io import write_csv, write_json
from .optimizers import VARIANTS, OptimizationProblem, Trajectory, optimize

TRAJECTORY_HEADER = ("step", "energy", "delta_e", "cond_number", "fallback_flag")
SWEEP_HEADER = ("p_error", "rule", "seed", "final_delta_e", "diverged")
QFI_ERROR_HEADER = ("n_qubits", "p_error", "one_minus_fidelity", "delta_avg")


def trajectory_rows(traj: Trajectory):
    for r in traj.records:
        yield (r.step, r.energy, r.delta_e, r.cond_number, r.fallback, *r.theta)


def write_trajectory(path: Path, traj: Trajectory) -> Path:
    n = traj.records[0].theta.size if traj.records else 0
    header = TRAJECTORY_HEADER + tuple(f"theta_{i}" for i in range(n))
    return write_csv(path, header, trajectory_rows(traj))


def _hamiltonian(cfg: RunConfig, n_qubits: int | None = None):
    h = cfg.system.hamiltonian
    omega = tuple(h.omega_list) if h.omega_list is not None else None
    return build_heisenberg_ring(HeisenbergRingSpec(n_qubits or cfg.system.n_qubits, h.J, h.omega_seed, omega))


def _run_optimize(cfg: RunConfig, out: Path, workers: int) -> list[Path]:
    s, o = cfg.system, cfg.optimizer
    circuit = build_ansatz(s.n_qubits, s.layers, s.p_error, s.two_qubit_error_factor, s.theta_noise_coefficient)
    ham = _hamiltonian(cfg)
    rng = np.random.default_rng(cfg.master_seed)
    e_opt = None
    centre = np.zeros(circuit.n_params)
    if o.locate_optimum:
        opt = locate_optimum(circuit, ham, random_starts(rng, 3, circuit.n_params))
        e_opt, centre = opt.energy, opt.theta
    if o.theta0 is not None:
        if len(o.theta0) != circuit.n_params:
            raise ValueError(f"theta0 has {len(o.theta0)} entries, the circuit needs {circuit.n_params}")
        theta0 = np.asarray(o.theta0, dtype=float)
    elif o.locate_optimum:
        theta0 = centre + rng.uniform(-o.init_radius, o.init_radius, circuit.n_params)
    else:
        theta0 = rng.uniform(-np.pi, np.pi, circuit.n_params)
    problem = OptimizationProblem(circuit, ham, theta0, e_opt=e_opt)
    traj = optimize(problem, o.rule_for(), o.steps)
    files = [write_trajectory(out / "trajectory.csv", traj)]
    files.append(write_json(out / "summary.json", {"status": traj.status, "message": traj.message, "e_opt": e_opt}))
    return files


def _run_landscape(cfg: RunConfig, out: Path, workers: int) -> list[Path]:
    lc, o = cfg.landscape, cfg.optimizer
    rules = [o.rule_for(v) for v in VARIANTS]
    res = landscape_scan(
        lc.grid_points,
        lc.p_error,
        lc.start,
        rules,
        o.steps,
        cfg.system.two_qubit_error_factor,
        lc.theta_noise_coefficient,
        cfg.master_seed,
        lc.init_radius,
    )
    files = [write_csv(out / "landscape.csv", ("theta_1", "theta_2", "energy"), res.rows())]
    summary = {"e_opt": res.optimum.energy, "theta_opt": res.optimum.theta, "start": res.start, "rules": {}}
    for label, traj in res.trajectories.items():
        name = "trajectory_" + re.sub(r"[^A-Za-z0-9.-]+", "_", label).strip("_") + ".csv"
        files.append(write_trajectory(out / name, traj))
        summary["rules"][label] = {"file": name, "status": traj.status, "final_delta_e": traj.final.delta_e}
    files.append(write_json(out / "summary.json", summary))
    return files


def sweep_spec(cfg: RunConfig) -> SweepSpec:
    s, w, o = cfg.system, cfg.sweep, cfg.optimizer
    h = s.hamiltonian
    return SweepSpec(
        n_qubits=s.n_qubits,
        p_errors=tuple(w.p_error),
        repetitions=w.repetitions,
        steps=o.steps,
        init_radius=w.init_radius,
        master_seed=cfg.master_seed,
        layers=s.layers,
        coupling=h.J,
        omega_seed=h.omega_seed,
        omega=tuple(h.omega_list) if h.omega_list is not None else None,
        two_qubit_factor=s.two_qubit_error_factor,
        theta_noise=s.theta_noise_coefficient,
        optimum_starts=w.optimum_starts,
        optimum_steps=w.optimum_steps,
        optimum_step_size=w.optimum_step_size,
        optimum_metric=w.optimum_metric,
    )


def _run_sweep(cfg: RunConfig, out: Path, workers: int) -> list[Path]:
    rules = [cfg.optimizer.rule_for(r.rule, r.metric) for r in cfg.sweep.rules]
    res = noise_sweep(sweep_spec(cfg), rules, workers=workers)
    files = [write_csv(out / "sweep.csv", SWEEP_HEADER, res.rows())]
    summary = {
        "e_opt": {format(p, "g"): e for p, e in res.e_opt.items()},
        "e_opt_located": {format(p, "g"): e for p, e in res.e_opt_located.items()},
        "cells": [vars(c) for c in res.cells],
    }
    files.append(write_json(out / "summary.json", summary))
    return files


def _run_qfi_error(cfg: RunConfig, out: Path, workers: int) -> list[Path]:
    q = cfg.qfi_error
    rows = qfi_error_study(
        q.n_qubits,
        q.p_error,
        q.samples,
        q.radius,
        cfg.master_seed,
        cfg.system.layers,
        cfg.system.two_qubit_error_factor,
        q.theta_noise_coefficient,
    )
    files = [write_csv(out / "qfi_error.csv", QFI_ERROR_HEADER, ((r.n_qubits, r.p_error, r.one_minus_fidelity, r.delta_avg) for r in rows))]
    slopes = {}
    for n in q.n_qubits:
        sel = [r for r in rows if r.n_qubits == n and r.delta_avg > 0 and r.one_minus_fidelity > 0]
        if len(sel) >= 2:
            slopes[str(n)] = loglog_slope([r.one_minus_fidelity for r in sel], [r.delta_avg for r in sel])
    files.append(write_json(out / "summary.json", {"loglog_slopes": slopes}))
    return files


def _run_appendix(cfg: RunConfig, out: Path, workers: int) -> list[Path]:
    a = cfg.appendix
    rep = appendix_checks(a.trials, tuple(a.dims), (a.eps_min, a.eps_max), a.anticommutator_eps, a.anticommutator_trials, cfg.master_seed)
    return [write_json(out / "appendix.json", rep.as_dict())]


def _run_scalability(cfg: RunConfig, out: Path, workers: int) -> list[Path]:
    c = cfg.scalability
    rep = scalability_calc(c.p_err, c.n_samples, c.gates_per_qubit, c.log_depth_coefficient)
    return [write_json(out / "scalability.json", rep.as_dict())]


RUNNERS = {
    "optimize": _run_optimize,
    "landscape": _run_landscape,
    "sweep": _run_sweep,
    "qfi-error": _run_qfi_error,
    "appendix-check": _run_appendix,
    "scalability": _run_scalability,
}


def execute(cfg: RunConfig, output_dir: str | Path, workers: int = 1) -> list[Path]:
    """Run ``cfg.experiment`` and return the paths written."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return RUNNERS[cfg.experiment](cfg, out, workers)
