import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qsimlab.qmc import (
    ONSAGER_BETA_C, ClassicalLattice2D, SignedSample, SignProblemError, acceptance_probability,
    critical_line_residual, exact_enumeration, fit_power_law, map_parameters, metropolis_run,
    onsager_magnetization, sign_reweight, steepest_descent, tanh_crossover, tfim_lattice,
    tfim_qmc_magnetization,
)


def test_mapping_example():
    p = map_parameters(1.0, 1.0, 8)
    assert p.a == 0.125
    assert p.beta_cl == 0.125
    assert p.gamma == pytest.approx(-0.5 * math.log(math.tanh(0.125)), rel=1e-15)
    assert p.gamma == pytest.approx(1.04232, abs=5e-6)
    assert p.lambda_factor == pytest.approx(0.35540, abs=5e-6)
    assert p.k_y == p.gamma and p.k_x == 0.125
    assert p.coupling_y * p.beta_cl == pytest.approx(p.gamma, rel=1e-15)


def test_mapping_depends_only_on_a():
    p, q = map_parameters(1.0, 1.0, 8), map_parameters(2.0, 0.5, 8)
    assert (p.a, p.gamma, p.lambda_factor) == (q.a, q.gamma, q.lambda_factor)
    assert map_parameters(160.0, 1.0, 8).gamma < 1e-15


def test_mapping_rejects_bad_input():
    for args in [(0.0, 1.0, 8), (1.0, -1.0, 8), (1.0, 1.0, 1)]:
        with pytest.raises(ValueError):
            map_parameters(*args)


def test_mapped_lattice_couplings():
    p = map_parameters(8.0, 1.0, 64)
    lat = tfim_lattice(p, 16)
    assert lat.coupling_x * p.beta_cl == p.k_x
    assert lat.coupling_y * p.beta_cl == pytest.approx(p.k_y, rel=1e-15)
    assert lat.boundary_y == "periodic"


def test_isotropic_point_is_onsager():
    # gamma = beta/n_y makes the mapped lattice isotropic
    a = math.atanh(math.exp(-2.0 * ONSAGER_BETA_C))
    p = map_parameters(ONSAGER_BETA_C * 10 * 1.0, a * 10 / (ONSAGER_BETA_C * 10), 10)
    assert p.gamma == pytest.approx(p.k_x, rel=1e-12)
    assert abs(critical_line_residual(p.beta_cl, p.coupling_y)) < 1e-12


def test_critical_line_examples():
    assert abs(critical_line_residual(ONSAGER_BETA_C, 1.0)) < 1e-12
    assert critical_line_residual(1.0, 1.0) == pytest.approx(math.sinh(2.0) ** 2 - 1, rel=1e-14)
    assert critical_line_residual(1.0, 1.0) == pytest.approx(12.154, abs=1e-3)
    assert critical_line_residual(1e-12, 1.0) == pytest.approx(-1.0, abs=1e-20)


@settings(max_examples=50, deadline=None)
@given(de=st.floats(-20, 20), beta=st.floats(0, 5))
def test_detailed_balance(de, beta):
    forward = acceptance_probability(de, beta)
    backward = acceptance_probability(-de, beta)
    assert forward == pytest.approx(backward * math.exp(-beta * de), rel=1e-12, abs=1e-300)


def test_infinite_temperature():
    st_ = metropolis_run(ClassicalLattice2D(16, 16), 0.0, 4000, seed=3)
    assert st_.acceptance_rate == 1.0
    # <|m|> of 256 independent spins is sqrt(2/(pi N))
    assert abs(st_.mean_abs_magnetization - math.sqrt(2 / (math.pi * 256))) < 3 * st_.stderr["abs_m"] + 1e-3


@pytest.mark.parametrize("size", [2, 3])
@pytest.mark.parametrize("beta", [0.2, 0.5, 1.0])
def test_small_lattices_match_enumeration(size, beta):
    lat = ClassicalLattice2D(size, size)
    exact = exact_enumeration(lat, beta)
    st_ = metropolis_run(lat, beta, 40000, seed=11)
    assert abs(st_.mean_abs_magnetization - exact["abs_m"]) < 3 * st_.stderr["abs_m"] + 1e-12
    assert abs(st_.mean_energy_per_site - exact["energy"]) < 3 * st_.stderr["energy"] + 1e-12


def test_ordered_lattice_against_onsager():
    st_ = metropolis_run(ClassicalLattice2D(16, 16), 1.0, 2000, seed=5)
    assert onsager_magnetization(1.0) == pytest.approx(0.99928, abs=1e-5)
    assert st_.mean_abs_magnetization > 0.99


def test_enumeration_open_boundary():
    # two open columns: one x bond per row
    lat = ClassicalLattice2D(2, 2, boundary_x="open")
    e = exact_enumeration(lat, 0.0)
    assert e["energy"] == pytest.approx(0.0, abs=1e-15)
    assert lat.energy() == -2.0 - 4.0


def test_determinism_and_seed_dependence():
    a = metropolis_run(ClassicalLattice2D(8, 8), 0.4, 500, seed=9)
    b = metropolis_run(ClassicalLattice2D(8, 8), 0.4, 500, seed=9)
    c = metropolis_run(ClassicalLattice2D(8, 8), 0.4, 500, seed=10)
    assert a.mean_abs_magnetization == b.mean_abs_magnetization
    assert a.mean_energy_per_site == b.mean_energy_per_site
    assert a.mean_abs_magnetization != c.mean_abs_magnetization


def test_merge_is_order_independent():
    runs = [metropolis_run(ClassicalLattice2D(6, 6), 0.45, 320, seed=s) for s in range(3)]
    ab_c = runs[0].merge(runs[1]).merge(runs[2])
    c_ba = runs[2].merge(runs[1].merge(runs[0]))
    assert ab_c.mean_abs_magnetization == c_ba.mean_abs_magnetization
    assert ab_c.stderr == c_ba.stderr
    assert ab_c.samples == sum(r.samples for r in runs)


def test_stats_invariants():
    st_ = metropolis_run(ClassicalLattice2D(8, 8), 0.44, 1000, seed=1)
    assert all(v >= 0 for v in st_.stderr.values())
    assert 0.0 <= st_.acceptance_rate <= 1.0
    # thermalization sweeps run on top of the measured ones
    assert st_.samples == 1000


def test_tfim_chain_phases():
    ordered = tfim_qmc_magnetization(16, 0.2, 8.0, 64, 3000, seed=2)
    disordered = tfim_qmc_magnetization(16, 2.0, 8.0, 64, 3000, seed=2)
    assert ordered.mean_abs_magnetization > 0.8
    assert disordered.mean_abs_magnetization < 0.3


def test_sign_reweight():
    samples = [SignedSample(1.0, 0.2), SignedSample(3.0, 0.6)]
    est, sign = sign_reweight(samples)
    assert est == pytest.approx((0.2 + 1.8) / 0.8, abs=1e-15)
    assert sign == 1.0
    est, sign = sign_reweight([SignedSample(2.0, 0.5), SignedSample(0.0, -0.25)])
    assert est == 4.0
    assert sign == pytest.approx(1 / 3, abs=1e-16)
    with pytest.raises(SignProblemError):
        sign_reweight([SignedSample(1.0, 0.3), SignedSample(5.0, -0.3)])
    with pytest.raises(ValueError):
        SignedSample(1.0, 0.0)


def test_crossover_helpers():
    g = np.linspace(0.5, 1.5, 21)
    m = 0.5 - 0.4 * np.tanh((g - 1.03) / 0.1)
    g0, w = tanh_crossover(g, m)
    assert g0 == pytest.approx(1.03, abs=1e-6)
    assert w == pytest.approx(0.1, abs=1e-6)
    assert steepest_descent(g, m) == pytest.approx(1.025)
    beta = np.linspace(0.45, 0.55, 6)
    b, amp = fit_power_law(beta, 1.3 * (beta - ONSAGER_BETA_C) ** 0.125)
    assert b == pytest.approx(0.125, abs=1e-12)
    assert amp == pytest.approx(1.3, abs=1e-12)
