import math

import numpy as np
import pytest

from noisyqng.channels import run_circuit
from noisyqng.experiments.appendix import (
    appendix_checks,
    epsilon_mixed_spectrum,
    square_identity_residual,
    anticommutator_residuals,
)
from noisyqng.experiments.benchmarks import (
    HeisenbergRingSpec,
    build_ansatz,
    build_heisenberg_ring,
    landscape_circuit,
    landscape_hamiltonian,
)
from noisyqng.experiments.scalability import scalability_calc
from noisyqng.experiments.studies import (
    SweepSpec,
    expectation_at,
    landscape_scan,
    locate_optimum,
    log_delta,
    loglog_slope,
    noise_sweep,
    qfi_error_study,
)
from noisyqng.optimizers import OptimizationProblem, UpdateRule, optimize, y_vector
from noisyqng.states import projector, random_unitary, zero_state

# ------------------------------------------------------------ benchmarks


def test_ring_two_sites_ground_energy():
    h = build_heisenberg_ring(HeisenbergRingSpec(2, omega=(0.0, 0.0)))
    # the chain bond and the closure bond coincide: 2 (XX + YY + ZZ), singlet energy -6
    assert h.spectrum[0] == pytest.approx(-6.0)
    assert len(h.terms) == 8


def test_ring_shape_and_determinism():
    a = build_heisenberg_ring(HeisenbergRingSpec(3, omega_seed=7))
    b = build_heisenberg_ring(HeisenbergRingSpec(3, omega_seed=7))
    assert a.matrix.shape == (8, 8)
    assert np.array_equal(a.matrix, b.matrix)
    assert np.allclose(a.matrix, a.matrix.conj().T)
    w = HeisenbergRingSpec(5, omega_seed=3).frequencies()
    assert np.all(np.abs(w) <= 1)
    with pytest.raises(ValueError):
        HeisenbergRingSpec(1)
    with pytest.raises(ValueError):
        HeisenbergRingSpec(2, omega=(0.5, 1.5))
    with pytest.raises(ValueError):
        HeisenbergRingSpec(3, omega=(0.5, 0.1))


def test_ring_field_terms():
    h = build_heisenberg_ring(HeisenbergRingSpec(3, coupling=0.0, omega=(0.2, -0.4, 1.0)))
    diag = np.real(np.diag(h.matrix))
    # |000> carries the sum of the fields, |111> its negative
    assert diag[0] == pytest.approx(0.8) and diag[-1] == pytest.approx(-0.8)


def test_ansatz_structure():
    c = build_ansatz(4, 1)
    assert c.n_params == 4 * 2 + 3 * 3 == 17
    assert build_ansatz(6, 2).n_params == 2 * 27
    assert np.allclose(run_circuit(c, np.zeros(17), noise=False), projector(zero_state(4)))
    noisy = build_ansatz(3, 1, 2e-3)
    probs = {len(g.targets): g.noise.p for g in noisy.gates}
    assert probs == {1: pytest.approx(2e-3), 2: pytest.approx(2e-2)}
    assert [g.paulis for g in noisy.gates[:6]] == ["Z", "X"] * 3
    with pytest.raises(ValueError):
        build_ansatz(1, 1)
    with pytest.raises(ValueError):
        build_ansatz(3, 0)
    with pytest.raises(ValueError):
        build_ansatz(3, 1, rotations="ZQ")


def test_landscape_circuit_noiseless_energy():
    c, h = landscape_circuit(0.0), landscape_hamiltonian()
    for a, b in [(0.3, 1.0), (2.0, -0.7), (np.pi, 0.2)]:
        expected = np.cos(a) - 0.1 * np.sin(a) * np.sin(b)
        assert expectation_at(c, h, (a, b)) == pytest.approx(expected, abs=1e-14)


# ------------------------------------------------------------ landscape


def test_landscape_scan_noiseless():
    res = landscape_scan(grid_points=21, p_error=0.0, steps=2)
    bound = math.sqrt(1.01)
    assert np.all(np.abs(res.energies) <= bound + 1e-12)
    # spacing pi/10: worst-case miss is about (pi/20)^2 / 2 along the stiff axis
    assert res.energies.min() == pytest.approx(-bound, abs=0.02)
    assert res.optimum.energy == pytest.approx(-bound, abs=1e-9)
    assert len(list(res.rows())) == 21 * 21
    starts = {tuple(t.records[0].theta) for t in res.trajectories.values()}
    assert len(starts) == 1 and len(res.trajectories) == 4


def test_mixed_rule_stalls_where_y_is_nonzero():
    c, h = landscape_circuit(0.01), landscape_hamiltonian()
    opt = locate_optimum(c, h, np.array([[2.5, 1.0], [2.5, -1.0]]))
    assert np.linalg.norm(y_vector(c, opt.theta, h)) > 1e-4
    start = opt.theta + np.array([0.3, -0.4])
    p = OptimizationProblem(c, h, start, e_opt=opt.energy)
    ng = optimize(p, UpdateRule.matched("natural-gradient"), 60)
    mixed = optimize(p, UpdateRule.matched("imag-time-mixed"), 300)
    assert ng.delta_e[30] < 1e-3
    assert mixed.delta_e[30] > 10 * ng.delta_e[30]
    # the mixed rule settles on a point where Y vanishes, above the optimum
    plateau = mixed.delta_e[-1]
    assert plateau > 1e-8 and abs(mixed.delta_e[-50] - plateau) < 0.05 * plateau
    assert ng.delta_e[-1] < 0.1 * plateau


# ------------------------------------------------------------ sweeps


def tiny_spec(**kw):
    base = dict(
        n_qubits=2,
        p_errors=(1e-3, 1e-2),
        repetitions=2,
        steps=3,
        optimum_starts=1,
        optimum_steps=30,
        master_seed=11,
    )
    base.update(kw)
    return SweepSpec(**base)


def test_sweep_shares_starts_and_is_deterministic():
    spec = tiny_spec()
    a = noise_sweep(spec, keep_trajectories=True)
    for p in spec.p_errors:
        for rep in range(spec.repetitions):
            starts = [r.trajectory.records[0].theta for r in a.runs if r.p_error == p and r.seed == rep]
            assert len(starts) == 3
            assert all(np.array_equal(s, starts[0]) for s in starts)
    b = noise_sweep(spec)
    assert list(a.rows()) == list(b.rows())
    assert all(d >= -1e-9 for _, _, _, d, _ in a.rows())
    assert len(a.cells) == 2 * 3
    assert all(c.completed + c.diverged == 2 for c in a.cells)


def test_sweep_independent_of_worker_count():
    spec = tiny_spec(p_errors=(1e-3,))
    assert list(noise_sweep(spec, workers=1).rows()) == list(noise_sweep(spec, workers=2).rows())


def test_sweep_from_optimum_starts_at_zero_gap():
    spec = tiny_spec(p_errors=(1e-3,), init_radius=0.0, steps=0, repetitions=1)
    res = noise_sweep(spec)
    for _, _, _, d, _ in res.rows():
        assert abs(d) < 1e-12


def test_sweep_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec(p_errors=(-0.1,))
    with pytest.raises(ValueError):
        SweepSpec(p_errors=(0.2,))
    with pytest.raises(ValueError):
        SweepSpec(repetitions=0)
    with pytest.raises(ValueError):
        noise_sweep(tiny_spec(), rules=[UpdateRule("gradient-descent")] * 2)


def test_log_delta_and_slope():
    assert log_delta(1e-3) == pytest.approx(-3)
    assert log_delta(0.0) == -16 and log_delta(-1.0) == -16
    x = np.logspace(-4, -1, 5)
    assert loglog_slope(x, 3 * x**1.5) == pytest.approx(1.5)


# ------------------------------------------------------------ QFI error study


def test_qfi_error_vanishes_without_noise():
    rows = qfi_error_study(n_qubits=(2, 3), p_errors=(0.0,), samples=2)
    for r in rows:
        assert r.delta_avg < 1e-9
        assert abs(r.one_minus_fidelity) < 1e-12


def test_qfi_error_grows_with_infidelity():
    rows = qfi_error_study(n_qubits=(2,), p_errors=(1e-4, 1e-3), samples=2)
    assert rows[0].one_minus_fidelity < rows[1].one_minus_fidelity
    assert rows[0].delta_avg < rows[1].delta_avg


# ------------------------------------------------------------ appendix


def test_square_identity_examples(rng):
    u = random_unitary(16, rng)
    assert square_identity_residual(epsilon_mixed_spectrum(16, 0.0), u) < 1e-14
    assert square_identity_residual(epsilon_mixed_spectrum(16, 0.1), u) < 1e-12
    spread = epsilon_mixed_spectrum(16, 0.1, rng, spread=0.5)
    assert spread.sum() == pytest.approx(1.0) and spread[0] == pytest.approx(0.9)
    with pytest.raises(ValueError):
        epsilon_mixed_spectrum(16, 0.6)
    with pytest.raises(ValueError):
        epsilon_mixed_spectrum(16, 0.1, spread=0.5)


def test_anticommutator_residual_shrinks_with_dimension(rng):
    res = {}
    for d in (8, 64):
        u = random_unitary(d, rng)
        gens = []
        for _ in range(2):
            a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
            gens.append(0.5 * (a + a.conj().T))
        res[d] = anticommutator_residuals(epsilon_mixed_spectrum(d, 0.05), u, gens).corrected
    assert res[8] >= 2 * res[64]


def test_appendix_checks_pass():
    report = appendix_checks(trials=30, anticommutator_trials=3)
    assert report.passed
    d = report.as_dict()
    assert d["square_trials"] == 30 and d["qfi_bound_failures"] == 0


# ------------------------------------------------------------ scalability


@pytest.mark.parametrize(
    "p, a, field, expected",
    [
        (1e-3, 3, "max_qubits_floor", 230),
        (1e-4, 3, "max_qubits_floor", 2310),
        (1e-3, 3, "max_linear_depth_floor", 346),
        (1e-4, 3, "max_linear_depth_floor", 3465),
    ],
)
def test_scalability_counts(p, a, field, expected):
    assert getattr(scalability_calc(p, 16, a), field) == expected


def test_scalability_log_depth():
    assert float(f"{scalability_calc(1e-3, log_depth_coefficient=10).log_depth_optimal_qubits:.2g}") == 4.1e14
    assert float(f"{scalability_calc(1e-4, log_depth_coefficient=50).log_depth_optimal_qubits:.2g}") == 4.6e29


def test_scalability_closed_forms():
    r = scalability_calc(1e-3, 16, 3)
    assert r.max_gate_count == pytest.approx(math.log(16) / (-4 * math.log1p(-1e-3)))
    assert r.max_qubits == pytest.approx(r.max_gate_count / 3)
    assert scalability_calc(0.0).as_dict()["max_qubits"] == "unbounded"
    with pytest.raises(ValueError):
        scalability_calc(1.0)
    with pytest.raises(ValueError):
        scalability_calc(1e-3, n_samples=0.5)
