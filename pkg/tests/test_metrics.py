import numpy as np
import pytest

from conftest import MINUS, PLUS, kron_label, random_circuit
from noisyqng.channels import CircuitSpec, NoiseSpec, ParametricGate, circuit_jacobian, run_circuit_pure
from noisyqng.experiments.benchmarks import build_ansatz
from noisyqng.metrics import (
    ApproximationRegimeWarning,
    classical_fisher,
    fubini_study_A,
    fubini_study_from_vectors,
    mixed_metric_from_derivatives,
    mixed_metric_M,
    qfi_approx,
    qfi_approx_from_derivatives,
    qfi_exact,
    qfi_from_derivatives,
    qfi_oracle,
    regularized_inverse,
    sld,
)
from noisyqng.states import eigendecompose, fidelity_pure, projector, random_density_matrix, random_unitary

Y = kron_label("Y")
Z = kron_label("Z")


def rz_family(eps):
    """Rz on (1-eps)|+><+| + eps|-><-| at theta = 0: returns (rho, [d rho])."""
    rho0 = (1 - eps) * projector(PLUS) + eps * projector(MINUS)
    c = CircuitSpec(1, (ParametricGate("Z", (0,), 0),))
    return circuit_jacobian(c, [0.0], rho0=rho0)


def brute_force_qfi(rho, drhos):
    """Solve d rho = (L rho + rho L)/2 as a dense linear system, then F = Re tr[rho {L_k, L_l}] / 2 * 2."""
    d = rho.shape[0]
    eye = np.eye(d)
    # vec(L rho + rho L) = (rho^T (x) I + I (x) rho) vec(L), row-major vec
    op = 0.5 * (np.kron(eye, rho.T) + np.kron(rho, eye))
    ls = []
    for dr in drhos:
        sol, *_ = np.linalg.lstsq(op, dr.reshape(-1), rcond=1e-12)
        ls.append(sol.reshape(d, d))
    n = len(ls)
    f = np.zeros((n, n))
    for k in range(n):
        for l in range(n):
            f[k, l] = 0.5 * np.real(np.trace(rho @ (ls[k] @ ls[l] + ls[l] @ ls[k])))
    return f


# ------------------------------------------------------------------ SLD


def test_sld_pure_state_is_twice_derivative():
    rho, (dr,) = rz_family(0.0)
    L = sld(eigendecompose(rho), dr)
    assert np.allclose(L.matrix, 2 * dr, atol=1e-14)
    assert L.residual(rho, dr) < 1e-14


def test_sld_zero_and_two_level_example():
    rho = np.diag([0.9, 0.1]).astype(complex)
    assert not np.any(sld(eigendecompose(rho), np.zeros((2, 2))).matrix)
    a = 0.3
    L = sld(eigendecompose(rho), a * kron_label("X")).matrix
    assert L[0, 1] == pytest.approx(2 * a / (0.9 + 0.1))
    assert L[1, 0] == pytest.approx(2 * a)
    with pytest.raises(ValueError):
        sld(eigendecompose(np.zeros((2, 2))), np.zeros((2, 2)))


def test_sld_residual_on_random_states(rng):
    for dim, rank in [(4, 4), (8, 8), (8, 3), (16, 5)]:
        rho = random_density_matrix(dim, rank, rng)
        u = random_unitary(dim, rng)
        g = u @ np.diag(rng.normal(size=dim)) @ u.conj().T
        dr = -1j * (g @ rho - rho @ g)
        L = sld(eigendecompose(rho), dr)
        assert L.residual(rho, dr) <= 1e-8
        assert np.allclose(L.matrix, L.matrix.conj().T)


# ------------------------------------------------------------------ QFI


def test_qfi_examples():
    rho, drhos = rz_family(0.0)
    assert qfi_from_derivatives(rho, drhos).values[0, 0] == pytest.approx(1.0, abs=1e-10)
    rho, drhos = rz_family(0.1)
    assert qfi_from_derivatives(rho, drhos).values[0, 0] == pytest.approx(0.64, abs=1e-9)
    assert qfi_oracle(rho, drhos).values[0, 0] == pytest.approx(0.64, abs=1e-12)
    assert brute_force_qfi(rho, drhos)[0, 0] == pytest.approx(0.64, abs=1e-10)
    # maximally mixed input is invariant under every gate
    c = random_circuit(2, 4, np.random.default_rng(0))
    rho, drhos = circuit_jacobian(c, np.ones(4), rho0=np.eye(4) / 4)
    assert np.max(np.abs(qfi_from_derivatives(rho, drhos).values)) < 1e-14
    assert np.max(np.abs(qfi_oracle(rho, [np.zeros((4, 4))]).values)) == 0.0


def test_oracle_matches_brute_force_sld(rng):
    for dim, rank in [(2, 2), (4, 2), (4, 4), (8, 1), (8, 5)]:
        rho = random_density_matrix(dim, rank, rng)
        gs = [random_unitary(dim, rng) for _ in range(3)]
        drhos = []
        for u in gs:
            g = u @ np.diag(rng.normal(size=dim)) @ u.conj().T
            drhos.append(-1j * (g @ rho - rho @ g))
        assert np.allclose(qfi_oracle(rho, drhos).values, brute_force_qfi(rho, drhos), atol=1e-8)


def _random_cases(rng, count):
    for i in range(count):
        n = 1 + i % 4
        p = [0.0, 1e-3, 2e-2][i % 3]
        c = random_circuit(n, 3 + 2 * n, rng, p=p)
        th = rng.uniform(-np.pi, np.pi, c.n_params)
        rho0 = None
        if i % 5 == 4:  # rank-deficient mixed input
            rho0 = random_density_matrix(c.dim, max(1, c.dim // 2), rng)
        yield c, th, rho0


def test_exact_matches_oracle_on_random_circuits(rng):
    worst = 0.0
    for c, th, rho0 in _random_cases(rng, 50):
        rho, drhos = circuit_jacobian(c, th, rho0=rho0)
        exact = qfi_from_derivatives(rho, drhos)
        oracle = qfi_oracle(rho, drhos)
        worst = max(worst, np.max(np.abs(exact.values - oracle.values)))
        assert np.allclose(exact.values, exact.values.T, atol=1e-9)
        assert exact.min_eig >= -1e-8
    assert worst < 1e-7


def test_noiseless_exact_qfi_equals_four_fubini_study(rng):
    for n in (2, 3):
        c = build_ansatz(n, 1)
        for _ in range(3):
            th = rng.uniform(-np.pi, np.pi, c.n_params)
            f = qfi_exact(c, th, noise=False).values
            a = fubini_study_A(c, th).values
            assert np.max(np.abs(f - 4 * a)) < 1e-8


def test_fubini_study_examples():
    dpsi = -0.5j * Z @ PLUS
    assert fubini_study_from_vectors(PLUS, [dpsi]).values[0, 0] == pytest.approx(0.25)
    c = CircuitSpec(1, (ParametricGate("Z", (0,), 0),))
    assert fubini_study_A(c, [0.8]).values[0, 0] == pytest.approx(0.0, abs=1e-15)


def test_fubini_study_against_finite_difference_overlaps(rng):
    # A_kl from the second derivative of the fidelity: |<psi(t)|psi(t+h e_k + h e_l)>|^2
    c = random_circuit(2, 5, rng)
    th = rng.uniform(-np.pi, np.pi, c.n_params)
    a = fubini_study_A(c, th).values
    h = 1e-4
    psi0 = run_circuit_pure(c, th)

    def fid(shift):
        return abs(np.vdot(psi0, run_circuit_pure(c, th + shift))) ** 2

    for k in range(c.n_params):
        e = np.zeros_like(th)
        e[k] = h
        # 1 - |<psi|psi+dpsi>|^2 = A_kk h^2 + O(h^4)
        assert (1 - fid(e)) / h**2 == pytest.approx(a[k, k], abs=1e-6)


def test_mixed_metric_and_approximation():
    rho, drhos = rz_family(0.0)
    assert mixed_metric_from_derivatives(drhos).values[0, 0] == pytest.approx(0.25)
    assert mixed_metric_from_derivatives([np.zeros((2, 2))]).values[0, 0] == 0.0
    approx = qfi_approx_from_derivatives(drhos, 1.0)
    assert approx.values[0, 0] == pytest.approx(1.0)
    assert np.max(np.abs(qfi_approx_from_derivatives([np.zeros((2, 2))], 1.0).values)) == 0.0


def test_approximation_is_four_m_over_fidelity(rng):
    c = build_ansatz(3, 1, 5e-3)
    th = rng.uniform(-1, 1, c.n_params)
    m = mixed_metric_M(c, th).values
    approx = qfi_approx(c, th)
    rho, _ = circuit_jacobian(c, th)
    fid = fidelity_pure(rho, run_circuit_pure(c, th))
    assert approx.fidelity == pytest.approx(fid)
    assert np.allclose(approx.values, 4 * m / fid, rtol=1e-13, atol=0)
    omit = qfi_approx(c, th, mode="omit").values
    assert np.allclose(omit, 4 * m, rtol=1e-13, atol=0)


def test_approximation_exact_without_noise(rng):
    for n in (2, 3):
        c = build_ansatz(n, 1)
        th = rng.uniform(-np.pi, np.pi, c.n_params)
        assert np.max(np.abs(qfi_approx(c, th).values - qfi_exact(c, th).values)) < 1e-9


def test_approximation_warns_below_fidelity_floor():
    c = build_ansatz(2, 1, 0.1)
    th = np.full(c.n_params, 0.7)
    with pytest.warns(ApproximationRegimeWarning):
        t = qfi_approx(c, th, fidelity_floor=0.99)
    assert t.warning is not None
    with pytest.raises(ValueError):
        qfi_approx_from_derivatives([np.eye(2)], 0.0)


# ------------------------------------------------------- classical Fisher


def _plus_then_rz(noise=None):
    return CircuitSpec(
        1,
        (ParametricGate("Y", (0,), 0, 0.5, noise), ParametricGate("Z", (0,), 1, 0.5, noise)),
    )


def test_classical_fisher_examples():
    c = _plus_then_rz()
    th = [np.pi / 2, 0.0]
    comp = classical_fisher(c, th).values
    assert comp[1, 1] == pytest.approx(0.0, abs=1e-12)
    pm = np.stack([PLUS, MINUS], axis=1)
    # p(-) = sin^2(theta/2) vanishes at theta = 0; the limit d^2 p/2 gives 1
    assert classical_fisher(c, th, pm).values[1, 1] == pytest.approx(1.0, abs=1e-6)
    # away from the zero the plain score formula applies
    th2 = [np.pi / 2, 0.3]
    assert classical_fisher(c, th2, pm).values[1, 1] == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(ValueError, match="orthonormal"):
        classical_fisher(c, th, np.array([[1, 1], [0, 1]], dtype=complex))


def test_classical_fisher_attains_qfi_in_sld_basis(rng):
    noise = NoiseSpec(0.05, (0,))
    c = _plus_then_rz(noise)
    th = np.array([1.1, 0.4])
    rho, drhos = circuit_jacobian(c, th)
    f = qfi_oracle(rho, drhos).values
    L = sld(eigendecompose(rho), drhos[1]).matrix
    _, basis = np.linalg.eigh(L)
    fc = classical_fisher(c, th, basis).values
    assert fc[1, 1] == pytest.approx(f[1, 1], abs=1e-7)


def test_classical_fisher_below_qfi(rng):
    for _ in range(5):
        c = random_circuit(2, 4, rng, p=0.01)
        th = rng.uniform(-np.pi, np.pi, c.n_params)
        f = qfi_exact(c, th).values
        for _ in range(3):
            fc = classical_fisher(c, th, random_unitary(4, rng)).values
            assert np.linalg.eigvalsh(f - fc)[0] >= -1e-7


# ------------------------------------------------------------------ inversion


def test_regularized_inverse_examples():
    for scheme in ("truncated-pseudo", "tikhonov"):
        inv, fb = regularized_inverse(np.eye(3), scheme, lambda_reg=0.0)
        assert np.allclose(inv, np.eye(3)) and not fb
    inv, _ = regularized_inverse(np.diag([1.0, 1e-12]), "truncated-pseudo", cutoff=1e-8)
    assert np.array_equal(inv, np.diag([1.0, 0.0]))
    inv, _ = regularized_inverse(np.diag([2.0, 1.0]), "tikhonov", lambda_reg=0.0)
    assert np.allclose(inv, np.diag([0.5, 1.0]))
    inv, _ = regularized_inverse(np.diag([2.0, 1.0]), "tikhonov", lambda_reg=1.0)
    assert np.allclose(inv, np.diag([1 / 3, 0.5]))
    inv, fb = regularized_inverse(np.zeros((2, 2)))
    assert fb and np.array_equal(inv, np.eye(2))
    with pytest.raises(ValueError):
        regularized_inverse(np.eye(2), "cholesky")


def test_regularized_inverse_symmetric(rng):
    a = rng.normal(size=(5, 5))
    t = a @ a.T
    for scheme in ("truncated-pseudo", "tikhonov"):
        inv, _ = regularized_inverse(t, scheme)
        assert np.allclose(inv, inv.T, atol=1e-12)
    inv, _ = regularized_inverse(t, "truncated-pseudo", cutoff=0.0)
    assert np.allclose(inv @ t, np.eye(5), atol=1e-8)
