import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qsimlab.circuit import CNOT, RX, RZ, Circuit, H, circuit_unitary
from qsimlab.density import (
    Bipartition, DensityMatrix, amplitude_matrix, entanglement_entropy, entropy_from_spectrum,
    partial_trace, schmidt, von_neumann_entropy,
)
from qsimlab.spin import StateVector

BELL = StateVector(np.array([1, 0, 0, 1]) / math.sqrt(2))


def random_state(n, seed):
    return StateVector.random(n, seed)


def random_mixed(n, seed, rank=3):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((1 << n, rank)) + 1j * rng.standard_normal((1 << n, rank))
    rho = a @ a.conj().T
    return DensityMatrix(rho / np.trace(rho).real)


def test_density_matrix_validation():
    with pytest.raises(ValueError):
        DensityMatrix([[0.5, 0.1], [0.2, 0.5]])
    with pytest.raises(ValueError):
        DensityMatrix(np.eye(2))
    with pytest.raises(ValueError):
        DensityMatrix(np.diag([1.5, -0.5]))
    assert DensityMatrix.maximally_mixed(4).dimension == 4


def test_bipartition_validation():
    for a, b in [((0,), (0, 1)), ((), (0,)), ((0,), (2,))]:
        with pytest.raises(ValueError):
            Bipartition(a, b)
    assert Bipartition((2, 0), (1,)).sites_a == (0, 2)


def test_bell_reduced_state():
    cut = Bipartition.split(1, 2)
    np.testing.assert_allclose(partial_trace(BELL, cut, "A").matrix, np.eye(2) / 2, atol=1e-15)
    np.testing.assert_allclose(partial_trace(BELL, cut, "B").matrix, np.eye(2) / 2, atol=1e-15)


def test_product_state_reduced_state():
    # qubit 0 in |0>, qubit 1 in |+>: index = bit0 + 2*bit1
    psi = StateVector(np.kron(np.array([1, 1]) / math.sqrt(2), [1, 0]))
    rho = partial_trace(psi, Bipartition.split(1, 2), "A")
    np.testing.assert_allclose(rho.matrix, [[1, 0], [0, 0]], atol=1e-15)
    assert von_neumann_entropy(rho) == pytest.approx(0.0, abs=1e-12)


def test_site_ordering_of_amplitude_matrix():
    # only site 2 up out of three sites
    psi = StateVector.basis(0b100, 3)
    m = amplitude_matrix(psi, Bipartition((2,), (0, 1)))
    assert m[1, 0] == 1.0


@pytest.mark.parametrize("seed", range(3))
def test_three_qubit_spectra_agree(seed):
    psi = random_state(3, seed)
    cut = Bipartition((0,), (1, 2))
    full = DensityMatrix.pure(psi)
    ra = partial_trace(full, cut, "A").eigenvalues()
    rbc = partial_trace(psi, cut, "B").eigenvalues()
    np.testing.assert_allclose(np.sort(ra), np.sort(rbc)[-2:], atol=1e-12)
    np.testing.assert_allclose(np.sort(rbc)[:2], 0.0, atol=1e-12)


def test_mixed_and_pure_partial_trace_agree():
    psi = random_state(4, 9)
    cut = Bipartition((1, 3), (0, 2))
    np.testing.assert_allclose(partial_trace(psi, cut, "A").matrix,
                               partial_trace(DensityMatrix.pure(psi), cut, "A").matrix, atol=1e-14)


def test_entropy_examples():
    assert von_neumann_entropy(DensityMatrix.pure(random_state(2, 1))) == pytest.approx(0.0, abs=1e-10)
    assert von_neumann_entropy(DensityMatrix.maximally_mixed(2)) == pytest.approx(math.log(2), abs=1e-15)
    assert von_neumann_entropy(np.diag([0.75, 0.25])) == pytest.approx(0.562335, abs=1e-6)
    assert von_neumann_entropy(DensityMatrix.maximally_mixed(2), base=2) == pytest.approx(1.0, abs=1e-15)
    assert entropy_from_spectrum([1.0, -5e-13]) == 0.0
    with pytest.raises(ValueError):
        entropy_from_spectrum([1.1, -0.1])


@settings(max_examples=25, deadline=None)
@given(n=st.integers(1, 4), seed=st.integers(0, 2**31))
def test_entropy_bounds(n, seed):
    rho = random_mixed(n, seed, rank=min(3, 1 << n))
    s = von_neumann_entropy(rho)
    assert -1e-10 <= s <= n * math.log(2) + 1e-10


def test_schmidt_examples():
    sp = schmidt(BELL, Bipartition.split(1, 2))
    np.testing.assert_allclose(sp.coefficients, [1 / math.sqrt(2)] * 2, atol=1e-15)
    prod = StateVector(np.kron(np.array([0.6, 0.8]), np.array([1, 1j]) / math.sqrt(2)))
    assert schmidt(prod, Bipartition.split(1, 2)).rank == 1


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(2, 6), data=st.data())
def test_schmidt_reconstruction(seed, n, data):
    k = data.draw(st.integers(1, n - 1))
    psi = random_state(n, seed)
    cut = Bipartition.split(k, n)
    sp = schmidt(psi, cut)
    assert np.all(np.diff(sp.coefficients) <= 1e-15)
    assert np.sum(sp.coefficients**2) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(sp.reconstruct(), amplitude_matrix(psi, cut), atol=1e-10)
    np.testing.assert_allclose(sp.left_vectors.conj().T @ sp.left_vectors, np.eye(sp.rank), atol=1e-10)
    np.testing.assert_allclose(sp.right_vectors.conj().T @ sp.right_vectors, np.eye(sp.rank), atol=1e-10)
    ra = np.sort(partial_trace(psi, cut, "A").eigenvalues())[::-1][: sp.rank]
    np.testing.assert_allclose(sp.coefficients**2, ra, atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_entropy_equal_on_both_sides(seed):
    psi = random_state(4, seed)
    cut = Bipartition.split(2, 4)
    sa = von_neumann_entropy(partial_trace(psi, cut, "A"))
    sb = von_neumann_entropy(partial_trace(psi, cut, "B"))
    assert sa == pytest.approx(sb, abs=1e-10)
    assert schmidt(psi, cut).entropy() == pytest.approx(sa, abs=1e-10)


def _states_for_subadditivity():
    for i in range(200):
        n = 2 + i % 3
        yield (random_state(n, i).amplitudes if i % 2 else random_mixed(n, i)), n


def test_subadditivity():
    for state, n in _states_for_subadditivity():
        rho = state if isinstance(state, DensityMatrix) else DensityMatrix.pure(state)
        cut = Bipartition.split(1 + n // 3, n)
        s_ab = von_neumann_entropy(rho)
        s_a = von_neumann_entropy(partial_trace(rho, cut, "A"))
        s_b = von_neumann_entropy(partial_trace(rho, cut, "B"))
        assert s_ab <= s_a + s_b + 1e-10


def test_unitary_invariance_with_gate_set():
    rng = np.random.default_rng(3)
    gates = []
    for _ in range(30):
        q = int(rng.integers(3))
        kind = rng.integers(4)
        if kind == 0:
            gates.append(H(q))
        elif kind == 1:
            gates.append(RZ(q, float(rng.uniform(-3, 3))))
        elif kind == 2:
            gates.append(RX(q, float(rng.uniform(-3, 3))))
        else:
            gates.append(CNOT(q, (q + 1 + int(rng.integers(2))) % 3))
    u = circuit_unitary(Circuit(3, gates))
    rho = random_mixed(3, 4)
    rotated = DensityMatrix(u @ rho.matrix @ u.conj().T, validate=False)
    assert von_neumann_entropy(rotated) == pytest.approx(von_neumann_entropy(rho), abs=1e-10)


def test_entanglement_entropy_helper():
    assert entanglement_entropy(BELL, Bipartition.split(1, 2), base=2) == pytest.approx(1.0, abs=1e-14)
