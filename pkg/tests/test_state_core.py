import numpy as np
import pytest

from conftest import MINUS, PLUS, kron_label
from noisyqng.pauli import build_pauli_sum, pauli_matrix
from noisyqng.states import (
    DensityMatrixError,
    check_density_matrix,
    eigendecompose,
    expectation,
    fidelity_pure,
    hilbert_schmidt,
    projector,
    purity,
    random_density_matrix,
)


@pytest.mark.parametrize("label", ["X", "Y", "Z", "XY", "ZIY", "YYXZ", "IXZI"])
def test_pauli_matrix_matches_kronecker_products(label):
    assert np.array_equal(pauli_matrix(label), kron_label(label))


def test_pauli_sum_zi_plus_xx_spectrum():
    h = build_pauli_sum([(1.0, "ZI"), (0.1, "XX")])
    # ZX + XZ anticommute, so H^2 = 1.01 I
    assert np.allclose(h.matrix @ h.matrix, 1.01 * np.eye(4), atol=1e-14)
    assert np.allclose(h.spectrum, [-np.sqrt(1.01)] * 2 + [np.sqrt(1.01)] * 2, atol=1e-12)


def test_pauli_sum_single_term_and_hermitian():
    h = build_pauli_sum([(1.0, "ZI")])
    assert np.allclose(np.sort(h.spectrum), [-1, -1, 1, 1])
    rng = np.random.default_rng(0)
    labels = ["".join(rng.choice(list("IXYZ"), 3)) for _ in range(10)]
    h = build_pauli_sum(zip(rng.normal(size=10), labels))
    assert np.max(np.abs(h.matrix - h.matrix.conj().T)) <= 1e-12
    ref = sum(c * kron_label(l) for c, l in h.terms)
    assert np.allclose(h.matrix, ref, atol=1e-14)


def test_pauli_sum_errors_and_empty():
    with pytest.raises(ValueError, match="inconsistent"):
        build_pauli_sum([(1.0, "ZI"), (1.0, "X")])
    with pytest.raises(ValueError):
        build_pauli_sum([(1.0, "ZQ")])
    assert not np.any(build_pauli_sum([], n_qubits=2).matrix)


def test_expectation_examples():
    rho0 = projector(np.array([1, 0], dtype=complex))
    assert expectation(rho0, build_pauli_sum([(1.0, "Z")])) == pytest.approx(1.0)
    assert expectation(projector(PLUS), build_pauli_sum([(0.1, "X")])) == pytest.approx(0.1)
    mixed = np.eye(4) / 4
    assert expectation(mixed, build_pauli_sum([(0.3, "XZ"), (-2.0, "YI")])) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError, match="dimension"):
        expectation(mixed, build_pauli_sum([(1.0, "Z")]))


def test_expectation_within_spectrum(rng):
    h = build_pauli_sum([(1.0, "ZIX"), (0.5, "YYI"), (-0.7, "IZZ")])
    lo, hi = h.spectrum[0], h.spectrum[-1]
    for _ in range(20):
        e = expectation(random_density_matrix(8, int(rng.integers(1, 9)), rng), h)
        assert lo - 1e-12 <= e <= hi + 1e-12


def test_eigendecompose_examples():
    d = eigendecompose(np.diag([0.5, 0.5]).astype(complex))
    assert d.rank == 2 and np.allclose(d.eigenvalues, [0.5, 0.5])
    d = eigendecompose(projector(np.array([0, 1], dtype=complex)), 1e-12)
    assert d.rank == 1 and d.eigenvalues[0] == pytest.approx(1.0)
    rho = 0.9 * projector(np.array([1, 0], dtype=complex)) + 0.1 * projector(PLUS)
    # closed form for a 2x2 Hermitian matrix: mean +- sqrt(((a-d)/2)^2 + |b|^2)
    a, b, dd = rho[0, 0].real, abs(rho[0, 1]), rho[1, 1].real
    rad = np.sqrt(((a - dd) / 2) ** 2 + b**2)
    expected = [(a + dd) / 2 + rad, (a + dd) / 2 - rad]
    got = eigendecompose(rho).eigenvalues
    assert np.allclose(got, expected, atol=1e-12)
    assert np.allclose(got, [0.5 + np.sqrt(0.205), 0.5 - np.sqrt(0.205)], atol=1e-12)


@pytest.mark.parametrize("dim", [2, 4, 8, 16, 32, 64])
def test_eigendecompose_reconstruction(dim, rng):
    for rank in {1, max(1, dim // 2), dim}:
        rho = random_density_matrix(dim, rank, rng)
        dec = eigendecompose(rho)
        assert abs(dec.eigenvalues.sum() - 1) <= 1e-10
        assert np.all(np.diff(dec.eigenvalues) <= 0)
        assert np.max(np.abs(dec.reconstruct() - rho)) <= 1e-10
        v = dec.eigenvectors
        assert np.allclose(v.conj().T @ v, np.eye(dim), atol=1e-12)


def test_fidelity_purity_hilbert_schmidt():
    psi = (PLUS + 1j * MINUS) / np.sqrt(2)
    rho = projector(psi)
    assert fidelity_pure(rho, psi) == pytest.approx(1.0)
    assert fidelity_pure(np.eye(2) / 2, PLUS) == pytest.approx(0.5)
    diag = np.diag([0.9, 0.1]).astype(complex)
    assert fidelity_pure(diag, np.array([1, 0], dtype=complex)) == pytest.approx(0.9)
    assert purity(diag) == pytest.approx(0.82)
    assert purity(np.eye(4) / 4) == pytest.approx(0.25)
    assert purity(rho) == pytest.approx(1.0)
    sy = kron_label("Y") / 2
    assert hilbert_schmidt(sy, sy) == pytest.approx(0.5)
    assert hilbert_schmidt(kron_label("X"), kron_label("Z")) == 0.0
    assert hilbert_schmidt(rho, rho) == pytest.approx(1.0)
    a, b = kron_label("XY"), kron_label("ZZ") + kron_label("XY")
    assert hilbert_schmidt(a, b) == hilbert_schmidt(b, a)


def test_density_matrix_check():
    check_density_matrix(np.eye(2) / 2)
    with pytest.raises(DensityMatrixError, match="trace"):
        check_density_matrix(np.eye(2))
    with pytest.raises(DensityMatrixError, match="Hermitian"):
        check_density_matrix(np.array([[0.5, 1j], [0, 0.5]]))
    with pytest.raises(DensityMatrixError, match="negative"):
        check_density_matrix(np.diag([1.5, -0.5]))
