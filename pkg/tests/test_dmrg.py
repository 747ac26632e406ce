import math

import numpy as np
import pytest

from qsimlab.density import Bipartition, entanglement_entropy
from qsimlab.dmrg import (
    DmrgBlock, DmrgConfig, entropy_bound, finite_dmrg, grow_block, infinite_dmrg, single_site_block,
    superblock_ground, truncate,
)
from qsimlab.eigensolve import SolverConfig, dense_eigh, tfim_ground_state
from qsimlab.spin import TfimHamiltonian, dense_tfim

SZ = np.diag([1.0, -1.0])


def ed_energy(n, g):
    res, _ = tfim_ground_state(TfimHamiltonian(n, g), SolverConfig(tolerance=1e-13))
    return res.energy


def test_grow_single_site_matches_two_site_chain():
    g = 0.8
    two = grow_block(single_site_block(g), g)
    assert two.length == 2 and two.basis_size == 4
    # same spectrum as the dense oracle (basis orders differ)
    np.testing.assert_allclose(np.linalg.eigvalsh(two.block_hamiltonian),
                               np.linalg.eigvalsh(dense_tfim(TfimHamiltonian(2, g))), atol=1e-14)
    np.testing.assert_array_equal(two.block_hamiltonian, two.block_hamiltonian.T)
    np.testing.assert_array_equal(two.edge_sz, np.kron(np.eye(2), SZ))


def test_grow_zero_field():
    two = grow_block(single_site_block(0.0), 0.0)
    np.testing.assert_array_equal(np.linalg.eigvalsh(two.block_hamiltonian), [-1, -1, 1, 1])


def test_superblock_four_sites():
    g = 1.0
    left = grow_block(single_site_block(g), g)
    right = grow_block(single_site_block(g, "right"), g)
    e, psi = superblock_ground(left, right, g)
    assert e == pytest.approx(dense_eigh(dense_tfim(TfimHamiltonian(4, g)), vectors=False)[0], abs=1e-10)
    assert psi.shape == (4, 4)


def test_superblock_classical_chain():
    left = grow_block(grow_block(single_site_block(0.0), 0.0), 0.0)
    right = grow_block(single_site_block(0.0, "right"), 0.0)
    e, _ = superblock_ground(left, right, 0.0)
    assert e == pytest.approx(-4.0, abs=1e-12)


def test_superblock_needs_opposite_sides():
    b = single_site_block(1.0)
    with pytest.raises(ValueError):
        superblock_ground(b, b)


def test_mirror_symmetric_spectra():
    g = 0.7
    left = grow_block(grow_block(single_site_block(g), g), g)
    _, psi = superblock_ground(left, left.mirrored(), g)
    _, ra = truncate(psi, 64, "left")
    _, rb = truncate(psi, 64, "right")
    np.testing.assert_allclose(ra.spectrum, rb.spectrum, atol=1e-10)


def test_truncation_reports():
    psi = np.zeros((2, 2))
    psi[0, 0], psi[1, 1] = math.sqrt(0.9), math.sqrt(0.1)
    proj, rep = truncate(psi, 1)
    assert rep.kept == 1
    assert rep.discarded_weight == pytest.approx(0.1, abs=1e-14)
    assert rep.discarded_weight + rep.spectrum.sum() == pytest.approx(1.0, abs=1e-10)
    _, full = truncate(psi, 2)
    assert full.discarded_weight < 1e-12
    rng = np.random.default_rng(1)
    x = rng.standard_normal((8, 8))
    proj, rep = truncate(x / np.linalg.norm(x), 5)
    assert np.all(np.diff(rep.spectrum) <= 0)
    np.testing.assert_allclose(proj.T @ proj, np.eye(5), atol=1e-12)


def test_degenerate_multiplet_kept_whole():
    psi = np.diag([math.sqrt(0.4), math.sqrt(0.2), math.sqrt(0.2), math.sqrt(0.2)])
    proj, rep = truncate(psi, 2)
    assert rep.kept == 4 and "extended" in rep.multiplet
    assert rep.discarded_weight < 1e-12


def test_oversized_multiplet_split_deterministically():
    psi = np.diag([math.sqrt(0.5)] + [math.sqrt(0.5 / 7)] * 7)
    p1, rep = truncate(psi, 2)
    p2, _ = truncate(psi.copy(), 2)
    assert rep.kept == 2 and "lexicographic" in rep.multiplet
    np.testing.assert_array_equal(p1, p2)


def test_config_validation():
    for args in [(1, 8, 1.0), (4, 7, 1.0), (4, 2, 1.0)]:
        with pytest.raises(ValueError):
            DmrgConfig(*args)


def test_infinite_untruncated_is_exact():
    r = infinite_dmrg(DmrgConfig(16, 8, 1.0))
    assert r.energy == pytest.approx(ed_energy(8, 1.0), abs=1e-8)


@pytest.mark.parametrize("n", [4, 6, 8, 10, 12])
def test_infinite_exact_without_truncation(n):
    r = infinite_dmrg(DmrgConfig(1 << (n // 2), n, 0.9))
    assert r.energy == pytest.approx(ed_energy(n, 0.9), abs=1e-9)


def test_infinite_classical_limit():
    r = infinite_dmrg(DmrgConfig(2, 12, 0.0))
    assert r.energy_per_bond == pytest.approx(-1.0, abs=1e-10)


def test_infinite_truncated_is_variational():
    r = infinite_dmrg(DmrgConfig(8, 16, 1.0))
    assert r.energy > ed_energy(16, 1.0)


def test_finite_improves_on_infinite_stage():
    r = finite_dmrg(DmrgConfig(8, 16, 1.0, sweep_count=2))
    assert r.energy <= r.sweep_energies[0] + 1e-12


def test_finite_small_truncation_error():
    r = finite_dmrg(DmrgConfig(32, 12, 0.5))
    assert r.final_truncation.discarded_weight < 1e-10


def test_variational_in_bond_dimension():
    exact = ed_energy(12, 1.0)
    energies = [finite_dmrg(DmrgConfig(d, 12, 1.0)).energy for d in (4, 8, 16, 32)]
    assert all(e >= exact - 1e-10 for e in energies)
    assert all(b <= a + 1e-10 for a, b in zip(energies, energies[1:]))


def test_block_hamiltonians_stay_hermitian_and_bounded():
    cfg = DmrgConfig(8, 14, 1.1)
    r = finite_dmrg(cfg)
    for block in r.blocks.values():
        h = block.block_hamiltonian
        assert np.max(np.abs(h - h.conj().T)) < 1e-12
        assert block.basis_size <= cfg.d_max + 4
    for rep in r.step_truncations:
        assert rep.discarded_weight + rep.spectrum.sum() == pytest.approx(1.0, abs=1e-10)


def test_mid_chain_entropy_matches_ed_state():
    n, g = 12, 1.0
    r = finite_dmrg(DmrgConfig(32, n, g))
    res, _ = tfim_ground_state(TfimHamiltonian(n, g), SolverConfig(tolerance=1e-13))
    s_ed = entanglement_entropy(res.vector, Bipartition.split(n // 2, n))
    np.testing.assert_allclose(r.step_entropies, s_ed, atol=1e-6)
    assert max(r.step_entropies) <= entropy_bound(32) + 1e-10


def test_mirrored_block_projector_ordering():
    r = infinite_dmrg(DmrgConfig(4, 10, 1.0))
    left, right = r.blocks[("left", 4)], r.blocks[("right", 4)]
    p = left.projector.reshape(-1, 2, left.basis_size)
    q = right.projector.reshape(2, -1, right.basis_size)
    np.testing.assert_array_equal(p.transpose(1, 0, 2), q)
    assert isinstance(left, DmrgBlock)
