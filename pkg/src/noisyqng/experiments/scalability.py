"""Closed-form limits on circuit size for the Hilbert-Schmidt QFI estimate.

With ``n_gates`` independent gates of error ``p`` the fidelity decays as
``F = (1-p)^n_gates``. The measured overlap ``tr[d rho d rho]`` is ``O(F^2)``
and needs ``N_s = O(F^-4)`` samples, which bounds the gate count at a fixed
sampling overhead.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass


def _log1m(p: float) -> float:
    if not 0.0 <= p < 1.0:
        raise ValueError("error rate must lie in [0, 1)")
    return math.log1p(-p)


def max_gate_count(p_err: float, n_samples: float) -> float:
    """Largest ``n_gates`` with ``F^-4 <= n_samples``; ``inf`` for ``p_err = 0``."""
    if n_samples < 1:
        raise ValueError("sampling overhead must be at least 1")
    if p_err == 0:
        return math.inf
    return math.log(n_samples) / (-4.0 * _log1m(p_err))


def max_qubits_linear(p_err: float, n_samples: float, gates_per_qubit: float) -> float:
    """Qubit limit for ``n_gates = a N`` at fixed sampling overhead."""
    if gates_per_qubit <= 0:
        raise ValueError("gates per qubit must be positive")
    return max_gate_count(p_err, n_samples) / gates_per_qubit


def max_linear_depth(p_err: float) -> float:
    """Largest ``a`` for which ``F^2`` decays slower than ``2^-N`` under ``n_gates = a N``."""
    if p_err == 0:
        return math.inf
    return -math.log(2.0) / (2.0 * _log1m(p_err))


def optimal_qubits_log_depth(p_err: float, depth_coefficient: float) -> float:
    """Qubit count minimising the relative error when ``n_gates = a N log N``."""
    if depth_coefficient <= 0:
        raise ValueError("depth coefficient must be positive")
    if p_err == 0:
        return math.inf
    return math.exp(max_linear_depth(p_err) / depth_coefficient - 1.0)


@dataclass(frozen=True)
class ScalabilityReport:
    p_err: float
    n_samples: float
    gates_per_qubit: float
    log_depth_coefficient: float
    max_gate_count: float
    max_qubits: float
    max_qubits_floor: float
    max_linear_depth: float
    max_linear_depth_floor: float
    log_depth_optimal_qubits: float

    def as_dict(self) -> dict:
        # JSON has no infinity; the unbounded case is reported as a string
        return {k: ("unbounded" if isinstance(v, float) and math.isinf(v) else v) for k, v in asdict(self).items()}


def scalability_calc(
    p_err: float,
    n_samples: float = 16.0,
    gates_per_qubit: float = 3.0,
    log_depth_coefficient: float = 10.0,
) -> ScalabilityReport:
    ng = max_gate_count(p_err, n_samples)
    nq = max_qubits_linear(p_err, n_samples, gates_per_qubit)
    depth = max_linear_depth(p_err)
    return ScalabilityReport(
        p_err=p_err,
        n_samples=n_samples,
        gates_per_qubit=gates_per_qubit,
        log_depth_coefficient=log_depth_coefficient,
        max_gate_count=ng,
        max_qubits=nq,
        max_qubits_floor=float(math.floor(nq)) if math.isfinite(nq) else math.inf,
        max_linear_depth=depth,
        max_linear_depth_floor=float(math.floor(depth)) if math.isfinite(depth) else math.inf,
        log_depth_optimal_qubits=optimal_qubits_log_depth(p_err, log_depth_coefficient),
    )
