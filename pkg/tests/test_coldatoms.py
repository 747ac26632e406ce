import math
import warnings

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from qsimlab.coldatoms import (
    BoseHubbardMF, HeliumVariational, LatticeParams, band_parameters, bh_critical_point,
    bh_energy_per_site, bh_minimize_epsilon, bh_numerical_critical_point, bh_optimal_epsilon,
    helium_energy, helium_minimize, mott_lobes,
)


def test_helium_closed_form():
    z, e = helium_minimize()
    assert z == 27 / 16 == 1.6875
    assert e == -729 / 256
    assert helium_energy(2.0) == -2.75
    assert HeliumVariational(z).energy == e
    with pytest.raises(ValueError):
        helium_energy(0.0)


def test_helium_against_golden_section():
    res = minimize_scalar(helium_energy, bracket=(0.5, 1.0, 3.0), method="golden", tol=1e-12)
    z, e = helium_minimize()
    assert res.x == pytest.approx(z, abs=1e-6)
    assert res.fun == pytest.approx(e, abs=1e-10)


def test_helium_convex():
    z = np.linspace(0.1, 4, 50)
    e = np.array([helium_energy(x) for x in z])
    assert np.all(np.diff(e, 2) > 0)


def test_bh_energy_examples():
    assert bh_energy_per_site(BoseHubbardMF(3, 0.2, 0.0, 1.7)) == pytest.approx(0.5 * 6 - 1.7 * 3, abs=1e-15)
    by_hand = -0.1 * 0.1 * 0.8 * (3 + 2 * math.sqrt(2)) + 0.5 * 0.2 - 0.5
    assert bh_energy_per_site(BoseHubbardMF(1, 0.1, 0.1, 0.5)) == pytest.approx(by_hand, abs=1e-15)
    assert by_hand == pytest.approx(-0.44663, abs=1e-5)


def test_bh_superfluid_lowers_energy():
    zj = 0.3
    eps = bh_minimize_epsilon(1, zj)
    assert eps > 0
    assert bh_energy_per_site(BoseHubbardMF(1, zj, eps)) < bh_energy_per_site(BoseHubbardMF(1, zj, 0.0))
    assert eps == pytest.approx(bh_optimal_epsilon(1, zj), abs=1e-8)


def test_bh_validation():
    for args in [(0, 0.1), (1, -0.1), (1, 0.1, 0.7)]:
        with pytest.raises(ValueError):
            BoseHubbardMF(*args)


def test_critical_point():
    assert abs(bh_critical_point(1) - (3 + 2 * math.sqrt(2))) < 1e-12
    assert bh_critical_point(100) / 400 == pytest.approx(1.0, rel=0.01)
    assert abs(bh_numerical_critical_point(1) - bh_critical_point(1)) < 1e-4
    vals = [bh_critical_point(n) for n in range(1, 20)]
    assert np.all(np.diff(vals) > 0)


def test_mott_lobes():
    for n in range(1, 11):
        assert mott_lobes(n, 0.0) == (n - 1, n)
    lo, hi = mott_lobes(1, 0.2)
    assert lo == pytest.approx(0.4, abs=1e-15) and hi == 1.0
    lo, hi = mott_lobes(2, 0.25)
    assert (lo, hi) == (2.0, 1.5) and lo >= hi


def test_band_parameters():
    bp = band_parameters(LatticeParams(10.0))
    expected = 16 / math.sqrt(math.pi) * 10**0.75 * math.exp(-4 * math.sqrt(10))
    assert bp.w == pytest.approx(expected, rel=1e-15)
    assert bp.w == pytest.approx(1.63e-4, rel=5e-3)
    assert bp.j_hop == bp.w / 4
    assert bp.a_osc == pytest.approx(10**-0.25, rel=1e-15)
    assert bp.deep_lattice
    w = [band_parameters(LatticeParams(v)).w for v in np.linspace(5, 40, 30)]
    assert np.all(np.diff(w) < 0)


def test_band_onsite_and_shallow_warning():
    bp = band_parameters(LatticeParams(20.0, recoil_er=2.0, k_l=3.0, a_s=0.01))
    assert bp.u_onsite == pytest.approx(math.sqrt(8 / math.pi) * 3.0 * 0.01 * 2.0 * 20**0.75, rel=1e-15)
    w, j, a, u = bp
    assert j == w / 4
    with pytest.warns(RuntimeWarning):
        shallow = band_parameters(LatticeParams(2.0))
    assert not shallow.deep_lattice
    with pytest.raises(ValueError):
        LatticeParams(0.0)


def test_bandwidth_monotone_from_one():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        w = [band_parameters(LatticeParams(v)).w for v in np.linspace(1, 40, 80)]
    assert np.all(np.diff(w) < 0)
