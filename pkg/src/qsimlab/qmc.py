"""Quantum Monte Carlo for the transverse-field Ising chain.

The chain of ``n_x`` spins at inverse temperature ``beta`` maps onto an
``n_x x n_y`` classical Ising model: the Trotter direction (y) carries the
coupling ``gamma = -1/2 log tanh(beta g / n_y)`` and is periodic, the chain
direction (x) carries ``beta / n_y``. The classical model is sampled with
single-spin-flip Metropolis.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import product

import numba
import numpy as np
from scipy.optimize import curve_fit

log = logging.getLogger(__name__)

N_BLOCKS = 32
ONSAGER_BETA_C = 0.5 * math.log(1.0 + math.sqrt(2.0))
_CHUNK_DRAWS = 1 << 20


@dataclass(frozen=True)
class MappingParameters:
    beta: float
    n_y: int
    g: float
    a: float
    gamma: float
    lambda_factor: float
    beta_cl: float

    @property
    def k_y(self) -> float:
        """Boltzmann-exponent coupling along the Trotter direction."""
        return self.gamma

    @property
    def k_x(self) -> float:
        """Boltzmann-exponent coupling along the chain."""
        return self.beta / self.n_y

    @property
    def coupling_y(self) -> float:
        """Trotter-direction coupling in units of the classical Hamiltonian."""
        return self.gamma / self.beta_cl

    def log_prefactor(self, n_x: int) -> float:
        """``log(Lambda**(n_x n_y))``; drops out of every observable."""
        return n_x * self.n_y * math.log(self.lambda_factor)


def map_parameters(beta: float, g: float, n_y: int) -> MappingParameters:
    if not (beta > 0 and g > 0):
        raise ValueError("beta and g must be positive")
    if n_y < 2:
        raise ValueError("need at least two Trotter slices")
    a = beta * g / n_y
    gamma = -0.5 * math.log(math.tanh(a))
    lam = math.sqrt(math.sinh(a) * math.cosh(a))
    return MappingParameters(beta, n_y, g, a, gamma, lam, beta / n_y)


@dataclass
class ClassicalLattice2D:
    """Ising spins on an ``n_y x n_x`` grid; row index is the Trotter slice.

    Energy is ``-coupling_x * sum s s'`` over chain bonds minus
    ``coupling_y * sum s s'`` over Trotter bonds; the Trotter direction is
    always periodic.
    """

    n_x: int
    n_y: int
    coupling_x: float = 1.0
    coupling_y: float = 1.0
    boundary_x: str = "periodic"
    spins: np.ndarray = None
    boundary_y: str = field(default="periodic", init=False)

    def __post_init__(self):
        if self.n_x < 1 or self.n_y < 2:
            raise ValueError("lattice needs n_x >= 1 and n_y >= 2")
        if self.boundary_x not in ("open", "periodic"):
            raise ValueError(f"unknown boundary {self.boundary_x!r}")
        if self.spins is None:
            self.spins = np.ones((self.n_y, self.n_x), dtype=np.int8)
        else:
            self.spins = np.asarray(self.spins, dtype=np.int8).reshape(self.n_y, self.n_x).copy()
            if not np.all(np.abs(self.spins) == 1):
                raise ValueError("spins must be +1 or -1")

    @property
    def size(self) -> int:
        return self.n_x * self.n_y

    def energy(self, spins=None) -> float:
        s = (self.spins if spins is None else spins).astype(np.int64)
        bond_y = np.sum(s * np.roll(s, -1, axis=0))
        if self.boundary_x == "periodic":
            bond_x = np.sum(s * np.roll(s, -1, axis=1))
        else:
            bond_x = np.sum(s[:, :-1] * s[:, 1:])
        return float(-self.coupling_x * bond_x - self.coupling_y * bond_y)


def tfim_lattice(params: MappingParameters, n_x: int, boundary_x: str = "open") -> ClassicalLattice2D:
    """Classical lattice for the mapped chain, all spins up."""
    return ClassicalLattice2D(n_x, params.n_y, 1.0, params.coupling_y, boundary_x)


def acceptance_probability(delta_e: float, beta_cl: float) -> float:
    """Metropolis acceptance ``min(1, exp(-beta_cl * delta_e))``."""
    if delta_e <= 0.0:
        return 1.0
    return math.exp(-beta_cl * delta_e)


def _acceptance_table(lattice: ClassicalLattice2D, beta_cl: float) -> np.ndarray:
    # entry [s*hx + 2, s*hy + 2] for the flip of spin s with neighbour sums hx, hy
    table = np.empty((5, 5))
    for i, j in product(range(5), repeat=2):
        de = 2.0 * (lattice.coupling_x * (i - 2) + lattice.coupling_y * (j - 2))
        table[i, j] = acceptance_probability(de, beta_cl)
    return table


@numba.njit(cache=True)
def _sweep_kernel(spins, sites, uniforms, table, periodic_x, n_sweeps,
                  cx, cy, energy, record, out_m, out_e, offset):
    n_y, n_x = spins.shape
    n = n_x * n_y
    mag = 0
    for r in range(n_y):
        for c in range(n_x):
            mag += spins[r, c]
    accepted = 0
    k = 0
    for sw in range(n_sweeps):
        for _ in range(n):
            site = sites[k]
            u = uniforms[k]
            k += 1
            r = site // n_x
            c = site - r * n_x
            s = spins[r, c]
            hy = spins[(r + 1) % n_y, c] + spins[(r - 1) % n_y, c]
            if periodic_x:
                hx = spins[r, (c + 1) % n_x] + spins[r, (c - 1) % n_x]
            else:
                hx = 0
                if c + 1 < n_x:
                    hx += spins[r, c + 1]
                if c > 0:
                    hx += spins[r, c - 1]
            if u < table[s * hx + 2, s * hy + 2]:
                spins[r, c] = -s
                mag -= 2 * s
                energy += 2.0 * s * (cx * hx + cy * hy)
                accepted += 1
        if record:
            out_m[offset + sw] = mag / n
            out_e[offset + sw] = energy / n
    return accepted, energy


@dataclass
class ChainStats:
    """Sampled observables of one or more Metropolis chains.

    Estimates come from block averages; ``stderr`` maps each observable name
    to the standard error of its block means. Merging is exact (``fsum``)
    and therefore independent of order.
    """

    samples: int
    mean_abs_magnetization: float
    mean_energy_per_site: float
    binder_cumulant: float
    stderr: dict
    acceptance_rate: float
    blocks: dict = field(repr=False, default_factory=dict)
    block_sizes: np.ndarray = field(repr=False, default=None)
    accepted: int = field(repr=False, default=0)
    proposed: int = field(repr=False, default=0)

    @classmethod
    def from_blocks(cls, blocks: dict, sizes, accepted: int, proposed: int) -> "ChainStats":
        sizes = np.asarray(sizes, dtype=np.int64)
        total = int(sizes.sum())
        w = sizes / total

        def mean(name):
            return math.fsum(blocks[name] * w)

        def err(name):
            nb = len(sizes)
            if nb < 2:
                return 0.0
            mu = mean(name)
            var = math.fsum(w * (blocks[name] - mu) ** 2) * nb / (nb - 1)
            return math.sqrt(var / nb)

        m2, m4 = mean("m2"), mean("m4")
        binder = 1.0 - m4 / (3.0 * m2 * m2) if m2 > 0 else 0.0
        return cls(
            samples=total,
            mean_abs_magnetization=mean("abs_m"),
            mean_energy_per_site=mean("energy"),
            binder_cumulant=binder,
            stderr={k: err(k) for k in ("abs_m", "energy", "m2")},
            acceptance_rate=accepted / proposed if proposed else 0.0,
            blocks=blocks,
            block_sizes=sizes,
            accepted=accepted,
            proposed=proposed,
        )

    def merge(self, other: "ChainStats") -> "ChainStats":
        keys = self.blocks.keys()
        blocks = {}
        sizes = np.concatenate([self.block_sizes, other.block_sizes])
        order = None
        for k in keys:
            joined = np.concatenate([self.blocks[k], other.blocks[k]])
            if order is None:
                # canonical block order keeps the merge order-independent
                order = np.lexsort((sizes, joined))
            blocks[k] = joined[order]
        return ChainStats.from_blocks(blocks, sizes[order], self.accepted + other.accepted,
                                      self.proposed + other.proposed)


def metropolis_run(lattice: ClassicalLattice2D, beta_cl: float, sweeps: int,
                   thermalization: int | None = None, seed: int = 0,
                   n_blocks: int = N_BLOCKS) -> ChainStats:
    """Single-spin-flip Metropolis on ``lattice`` (updated in place).

    One sweep proposes ``n_x * n_y`` flips at uniformly drawn sites.
    ``thermalization`` defaults to 20% of ``sweeps``. Site indices and
    uniforms come from a PCG64 stream seeded by ``seed``, so a given seed
    reproduces the statistics bit for bit.
    """
    if sweeps < 1:
        raise ValueError("sweeps must be >= 1")
    if thermalization is None:
        thermalization = sweeps // 5
    if thermalization < 0:
        raise ValueError("thermalization must be >= 0")
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    rng = np.random.Generator(np.random.PCG64(seed))
    table = _acceptance_table(lattice, beta_cl)
    n = lattice.size
    periodic_x = lattice.boundary_x == "periodic"
    energy = lattice.energy()
    out_m = np.empty(sweeps)
    out_e = np.empty(sweeps)
    per_chunk = max(1, _CHUNK_DRAWS // n)
    accepted = 0
    proposed = 0
    for record, total in ((False, thermalization), (True, sweeps)):
        done = 0
        while done < total:
            batch = min(per_chunk, total - done)
            sites = rng.integers(0, n, size=batch * n, dtype=np.int64)
            uniforms = rng.random(batch * n)
            acc, energy = _sweep_kernel(lattice.spins, sites, uniforms, table, periodic_x, batch,
                                        lattice.coupling_x, lattice.coupling_y, energy,
                                        record, out_m, out_e, done)
            accepted += acc
            proposed += batch * n
            done += batch
    n_blocks = min(n_blocks, sweeps)
    edges = np.linspace(0, sweeps, n_blocks + 1).astype(np.int64)
    sizes = np.diff(edges)
    series = {"abs_m": np.abs(out_m), "m2": out_m**2, "m4": out_m**4, "energy": out_e}
    blocks = {k: np.array([v[lo:hi].mean() for lo, hi in zip(edges[:-1], edges[1:])])
              for k, v in series.items()}
    return ChainStats.from_blocks(blocks, sizes, accepted, proposed)


def critical_line_residual(beta_cl: float, coupling_ratio: float) -> float:
    """``sinh(2 b) sinh(2 b r) - 1``; zero on the critical line."""
    return math.sinh(2.0 * beta_cl) * math.sinh(2.0 * beta_cl * coupling_ratio) - 1.0


def tfim_qmc_magnetization(n_x: int, g: float, beta: float, n_y: int, sweeps: int,
                           seed: int = 0, thermalization: int | None = None,
                           boundary_x: str = "open") -> ChainStats:
    """Classical order parameter of the mapped chain at transverse field ``g``.

    The spatial direction defaults to open ends so the lattice describes the
    same open chain as the exact-diagonalization routes; imaginary time is
    always periodic.
    """
    params = map_parameters(beta, g, n_y)
    log.debug("mapping a=%.6g gamma=%.6g log prefactor=%.6g", params.a, params.gamma,
              params.log_prefactor(n_x))
    lattice = tfim_lattice(params, n_x, boundary_x)
    return metropolis_run(lattice, params.beta_cl, sweeps, thermalization, seed)


def tanh_crossover(g, m, sigma=None) -> tuple[float, float]:
    """Inflection point of a fitted ``a - b tanh((g - g0) / w)`` step.

    Returns ``(g0, width)``. ``sigma`` weights the fit when error bars are
    available; zero entries are floored so exact points do not dominate.
    """
    g = np.asarray(g, dtype=float)
    m = np.asarray(m, dtype=float)
    if sigma is not None:
        sigma = np.maximum(np.asarray(sigma, dtype=float), 1e-3)
    mid = g[np.argmin(np.abs(m - 0.5 * (m.max() + m.min())))]
    p0 = [0.5 * (m.max() + m.min()), 0.5 * (m.max() - m.min()), mid, 0.2 * (g.max() - g.min())]

    def model(x, a, b, g0, w):
        return a - b * np.tanh((x - g0) / w)

    popt, _ = curve_fit(model, g, m, p0=p0, sigma=sigma, maxfev=20000)
    return float(popt[2]), float(abs(popt[3]))


def steepest_descent(g, m) -> float:
    """Midpoint of the grid interval where ``m`` drops fastest."""
    g = np.asarray(g, dtype=float)
    slope = np.diff(np.asarray(m, dtype=float)) / np.diff(g)
    k = int(np.argmin(slope))
    return float(0.5 * (g[k] + g[k + 1]))


def onsager_magnetization(beta: float) -> float:
    """Spontaneous magnetization of the isotropic square-lattice model (J = 1)."""
    if beta <= ONSAGER_BETA_C:
        return 0.0
    return (1.0 - math.sinh(2.0 * beta) ** -4) ** 0.125


def fit_power_law(beta, m, beta_c: float = ONSAGER_BETA_C) -> tuple[float, float]:
    """Least-squares ``log m = log A + b log(beta - beta_c)``; returns ``(b, A)``."""
    x = np.log(np.asarray(beta, dtype=float) - beta_c)
    y = np.log(np.asarray(m, dtype=float))
    b, log_a = np.polyfit(x, y, 1)
    return float(b), float(math.exp(log_a))


def exact_enumeration(lattice: ClassicalLattice2D, beta_cl: float) -> dict:
    """Exact ``<|m|>``, ``<m^2>`` and energy per site by summing all states."""
    n = lattice.size
    if n > 20:
        raise ValueError("enumeration limited to 20 spins")
    idx = np.arange(1 << n, dtype=np.int64)
    configs = (2 * ((idx[:, None] >> np.arange(n)) & 1) - 1).reshape(-1, lattice.n_y, lattice.n_x)
    s = configs.astype(np.int64)
    bond_y = np.sum(s * np.roll(s, -1, axis=1), axis=(1, 2))
    if lattice.boundary_x == "periodic":
        bond_x = np.sum(s * np.roll(s, -1, axis=2), axis=(1, 2))
    else:
        bond_x = np.sum(s[:, :, :-1] * s[:, :, 1:], axis=(1, 2))
    energies = -lattice.coupling_x * bond_x - lattice.coupling_y * bond_y
    weights = np.exp(-beta_cl * (energies - energies.min()))
    z = weights.sum()
    m = s.sum(axis=(1, 2)) / n
    return {
        "abs_m": float(weights @ np.abs(m) / z),
        "m2": float(weights @ m**2 / z),
        "energy": float(weights @ energies / z / n),
    }


# --- sign problem --------------------------------------------------------


class SignProblemError(ArithmeticError):
    """The signed weights cancel; the reweighted estimate does not exist."""


@dataclass(frozen=True)
class SignedSample:
    value: float
    weight: float

    def __post_init__(self):
        if self.weight == 0:
            raise ValueError("sample weight must be nonzero")


def sign_reweight(samples) -> tuple[float, float]:
    """Estimate ``<A s>_|p| / <s>_|p|`` from signed samples.

    Returns ``(estimate, mean_sign)``.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("need at least one sample")
    signed = math.fsum(s.weight for s in samples)
    absolute = math.fsum(abs(s.weight) for s in samples)
    if signed == 0.0:
        raise SignProblemError("signed weights sum to zero")
    estimate = math.fsum(s.value * s.weight for s in samples) / signed
    return estimate, signed / absolute
