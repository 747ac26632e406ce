"""Closed-form calculators for variational helium, Bose-Hubbard mean field and
optical-lattice band parameters.

Bose-Hubbard quantities are in units of the on-site repulsion ``U``; lattice
quantities are in units of the recoil energy unless a recoil value is given.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

HELIUM_Z_STAR = 27.0 / 16.0
HELIUM_E_MIN = -729.0 / 256.0
DEEP_LATTICE_DEPTH = 5.0


@dataclass(frozen=True)
class HeliumVariational:
    z_eff: float

    def __post_init__(self):
        if not self.z_eff > 0:
            raise ValueError("effective charge must be positive")

    @property
    def energy(self) -> float:
        return helium_energy(self.z_eff)


def helium_energy(z: float) -> float:
    """Trial energy ``z^2 - 4z + 5z/8 = z^2 - 27z/8`` in hartree."""
    if not z > 0:
        raise ValueError("effective charge must be positive")
    return z * z - 27.0 * z / 8.0


def helium_minimize() -> tuple[float, float]:
    return HELIUM_Z_STAR, helium_energy(HELIUM_Z_STAR)


@dataclass(frozen=True)
class BoseHubbardMF:
    """Two-state mean-field ansatz: weight ``epsilon`` moved off the ``n_star`` Fock state."""

    n_star: int
    zJ_over_U: float
    epsilon: float = 0.0
    mu_over_U: float = 0.0

    def __post_init__(self):
        if int(self.n_star) != self.n_star or self.n_star < 1:
            raise ValueError("n_star must be an integer >= 1")
        if self.zJ_over_U < 0:
            raise ValueError("zJ/U must be non-negative")
        if not 0.0 <= self.epsilon <= 0.5:
            raise ValueError("epsilon must lie in [0, 1/2]")


def _hop_factor(n: int) -> float:
    return (math.sqrt(n) + math.sqrt(n + 1)) ** 2


def bh_energy_per_site(m: BoseHubbardMF) -> float:
    n, eps = m.n_star, m.epsilon
    kinetic = -m.zJ_over_U * eps * (1.0 - 2.0 * eps) * _hop_factor(n)
    return kinetic + 0.5 * (2.0 * eps + n * (n - 1)) - m.mu_over_U * n


def bh_optimal_epsilon(n_star: int, zJ_over_U: float) -> float:
    """Closed-form minimizer of the quadratic energy in ``epsilon``."""
    if zJ_over_U == 0:
        return 0.0
    return max(0.0, 0.25 * (1.0 - 1.0 / (zJ_over_U * _hop_factor(n_star))))


def bh_minimize_epsilon(n_star: int, zJ_over_U: float, mu_over_U: float = 0.0,
                        tol: float = 1e-8) -> float:
    """Numerical minimizer of the energy over ``epsilon in [0, 1/2]``.

    A coarse grid brackets the minimum, then bounded Brent refinement
    narrows it to ``tol``. Independent of :func:`bh_optimal_epsilon`.
    """
    from scipy.optimize import minimize_scalar

    def f(e):
        return bh_energy_per_site(BoseHubbardMF(n_star, zJ_over_U, e, mu_over_U))

    grid = np.linspace(0.0, 0.5, 201)
    vals = np.array([f(e) for e in grid])
    k = int(np.argmin(vals))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": tol})
    best = min((res.x, lo, hi), key=f)
    return float(best) if best > tol else 0.0


def bh_critical_point(n_star: int) -> float:
    """``U_c / zJ = (sqrt(n) + sqrt(n+1))^2``."""
    if int(n_star) != n_star or n_star < 1:
        raise ValueError("n_star must be an integer >= 1")
    return _hop_factor(int(n_star))


def bh_numerical_critical_point(n_star: int, tol: float = 1e-10) -> float:
    """``U_c / zJ`` located by bisecting where the numerical ``epsilon`` minimum leaves zero."""
    lo, hi = 1e-3, 1.0  # in zJ/U: Mott at lo, superfluid at hi
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if bh_minimize_epsilon(n_star, mid, tol=1e-12) > 0.0:
            hi = mid
        else:
            lo = mid
    return 1.0 / (0.5 * (lo + hi))


def mott_lobes(n: int, zJ_over_U: float) -> tuple[float, float]:
    """Lower and upper ``mu/U`` branches of the ``n``-th lobe; closed if lower >= upper."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if zJ_over_U < 0:
        raise ValueError("zJ/U must be non-negative")
    return n - 1 + 2 * n * zJ_over_U, n - 2 * (n - 1) * zJ_over_U


@dataclass(frozen=True)
class LatticeParams:
    v0_over_er: float
    recoil_er: float = 1.0
    k_l: float = 1.0
    a_s: float = 0.0

    def __post_init__(self):
        if not self.v0_over_er > 0:
            raise ValueError("lattice depth must be positive")


@dataclass(frozen=True)
class BandParameters:
    w: float
    j_hop: float
    a_osc: float
    u_onsite: float
    deep_lattice: bool

    def __iter__(self):
        return iter((self.w, self.j_hop, self.a_osc, self.u_onsite))


def band_parameters(p: LatticeParams) -> BandParameters:
    """Deep-lattice bandwidth, hopping, oscillator length and on-site energy.

    ``a_osc = (1 / (4 m^2 V0 E_r))^(1/4)`` with ``hbar = 1`` and
    ``E_r = k_L^2 / 2m`` reduces to ``1 / (k_L v^(1/4))``. The asymptotic
    formulas are unreliable for ``v < 5``; a warning is issued and the
    ``deep_lattice`` flag cleared.
    """
    v = p.v0_over_er
    deep = v >= DEEP_LATTICE_DEPTH
    if not deep:
        warnings.warn(f"V0/E_r = {v} is outside the deep-lattice regime", RuntimeWarning, stacklevel=2)
    w = 16.0 / math.sqrt(math.pi) * v**0.75 * math.exp(-4.0 * math.sqrt(v)) * p.recoil_er
    a_osc = 1.0 / (p.k_l * v**0.25)
    u = math.sqrt(8.0 / math.pi) * p.k_l * p.a_s * p.recoil_er * v**0.75
    return BandParameters(w, w / 4.0, a_osc, u, deep)
