"""Spin-1/2 chains in the bit-encoded z basis.

Basis state ``k`` of an ``n``-site chain stores site ``i`` in bit ``i`` of
``k``; a set bit is spin up (sigma_z = +1). The transverse-field Ising
Hamiltonian

    H = g * sum_i sigma_x^(i) - sum_<ij> sigma_z^(i) sigma_z^(j)

is applied matrix-free through :func:`apply_tfim`. :func:`dense_tfim` builds
the same operator from Kronecker products of Pauli matrices and serves as an
independent oracle.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

import numpy as np
from scipy import sparse

OPEN = "open"
PERIODIC = "periodic"

DENSE_MAX_SITES = 14
NORM_TOL = 1e-12


@dataclass(frozen=True)
class SpinConfiguration:
    bits: int
    n_sites: int

    def __post_init__(self):
        if self.n_sites < 1:
            raise ValueError("n_sites must be >= 1")
        if not 0 <= self.bits < (1 << self.n_sites):
            raise ValueError(f"bits={self.bits} out of range for {self.n_sites} sites")

    def spin(self, site: int) -> int:
        """Return +1 for up and -1 for down at ``site``."""
        return 1 if (self.bits >> site) & 1 else -1

    def flipped(self, site: int) -> "SpinConfiguration":
        return SpinConfiguration(self.bits ^ (1 << site), self.n_sites)

    @classmethod
    def from_spins(cls, spins) -> "SpinConfiguration":
        bits = 0
        for i, s in enumerate(spins):
            if s not in (1, -1):
                raise ValueError("spins must be +1 or -1")
            if s == 1:
                bits |= 1 << i
        return cls(bits, len(spins))


@dataclass(frozen=True)
class TfimHamiltonian:
    n_sites: int
    g: float
    boundary: Literal["open", "periodic"] = OPEN

    def __post_init__(self):
        if self.n_sites < 2:
            raise ValueError("TFIM needs at least 2 sites")
        if self.boundary not in (OPEN, PERIODIC):
            raise ValueError(f"unknown boundary {self.boundary!r}")

    @property
    def dim(self) -> int:
        return 1 << self.n_sites

    def bonds(self) -> list[tuple[int, int]]:
        pairs = [(i, i + 1) for i in range(self.n_sites - 1)]
        if self.boundary == PERIODIC:
            pairs.append((self.n_sites - 1, 0))
        return pairs

    def norm_bound(self) -> float:
        """Triangle-inequality bound on the operator norm."""
        return self.n_sites * abs(self.g) + len(self.bonds())


class StateVector:
    """Amplitudes over the ``2**n_sites`` basis configurations.

    The amplitude array is copied on construction and marked read-only.
    """

    __slots__ = ("amplitudes", "n_sites")

    def __init__(self, amplitudes, n_sites: int | None = None):
        amps = np.array(amplitudes, dtype=np.complex128).reshape(-1)
        dim = amps.size
        if dim < 2 or dim & (dim - 1):
            raise ValueError(f"length {dim} is not a power of two >= 2")
        inferred = dim.bit_length() - 1
        if n_sites is not None and n_sites != inferred:
            raise ValueError(f"length {dim} does not match n_sites={n_sites}")
        amps.flags.writeable = False
        self.amplitudes = amps
        self.n_sites = inferred

    @classmethod
    def basis(cls, bits: int, n_sites: int) -> "StateVector":
        amps = np.zeros(1 << n_sites, dtype=np.complex128)
        amps[bits] = 1.0
        return cls(amps, n_sites)

    @classmethod
    def random(cls, n_sites: int, seed: int = 0) -> "StateVector":
        rng = np.random.default_rng(seed)
        dim = 1 << n_sites
        amps = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        return cls(amps / np.linalg.norm(amps), n_sites)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        nrm = self.norm()
        if nrm == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.amplitudes / nrm, self.n_sites)

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(self.norm() - 1.0) <= tol

    def vdot(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def __repr__(self):
        return f"StateVector(n_sites={self.n_sites}, norm={self.norm():.3g})"


@dataclass(frozen=True)
class ObservableSpec:
    """Which observable to evaluate.

    ``kind`` is one of ``magnetization_z_sq``, ``magnetization_z``,
    ``transverse_magnetization``, ``zz_correlation`` (needs ``sites``) or
    ``energy``. Magnetizations are per site.
    """

    kind: str
    sites: tuple[int, int] | None = None

    KINDS = (
        "magnetization_z_sq",
        "magnetization_z",
        "transverse_magnetization",
        "zz_correlation",
        "energy",
    )

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown observable kind {self.kind!r}")
        if self.kind == "zz_correlation":
            if self.sites is None or len(self.sites) != 2:
                raise ValueError("zz_correlation needs two site indices")

    def check_sites(self, n_sites: int):
        if self.sites is not None:
            for s in self.sites:
                if not 0 <= s < n_sites:
                    raise ValueError(f"site {s} outside [0, {n_sites})")


# --- diagonal helpers -----------------------------------------------------


@lru_cache(maxsize=32)
def _spin_table(n_sites: int) -> np.ndarray:
    """(n_sites, 2**n_sites) array of +-1 spin values."""
    idx = np.arange(1 << n_sites, dtype=np.int64)
    table = np.empty((n_sites, idx.size), dtype=np.int8)
    for i in range(n_sites):
        table[i] = 2 * ((idx >> i) & 1) - 1
    table.flags.writeable = False
    return table


@lru_cache(maxsize=32)
def _bond_diagonal(n_sites: int, boundary: str) -> np.ndarray:
    """Classical energy -sum s_i s_j for every basis state."""
    idx = np.arange(1 << n_sites, dtype=np.int64)
    diag = np.zeros(idx.size)
    for i, j in TfimHamiltonian(n_sites, 0.0, boundary).bonds():
        # differing bits contribute +1, equal bits -1
        diag += 2.0 * (((idx >> i) ^ (idx >> j)) & 1) - 1.0
    diag.flags.writeable = False
    return diag


@lru_cache(maxsize=32)
def _total_sz(n_sites: int) -> np.ndarray:
    m = _spin_table(n_sites).sum(axis=0, dtype=np.float64)
    m.flags.writeable = False
    return m


def classical_energies(n_sites: int, boundary: str = OPEN) -> np.ndarray:
    """Diagonal (g = 0) energies of all configurations."""
    return _bond_diagonal(n_sites, boundary)


def _flip_site(amps: np.ndarray, n_sites: int, site: int) -> np.ndarray:
    # view whose entry k is amps[k ^ (1 << site)]
    return amps.reshape(1 << (n_sites - site - 1), 2, 1 << site)[:, ::-1, :].reshape(-1)


def apply_tfim_array(h: TfimHamiltonian, amps: np.ndarray, stats: dict | None = None) -> np.ndarray:
    """Raw-array version of :func:`apply_tfim`; accepts a (2**N,) vector."""
    if amps.shape != (h.dim,):
        raise ValueError(f"vector of shape {amps.shape} does not match 2**{h.n_sites}")
    out = _bond_diagonal(h.n_sites, h.boundary) * amps
    touched = amps.size
    if h.g != 0.0:
        for i in range(h.n_sites):
            out += h.g * _flip_site(amps, h.n_sites, i)
            touched += amps.size
    if stats is not None:
        stats["entries"] = stats.get("entries", 0) + touched
        stats["calls"] = stats.get("calls", 0) + 1
    return out


def apply_tfim(h: TfimHamiltonian, v: StateVector, stats: dict | None = None) -> StateVector:
    """Return ``H v`` (not normalized).

    ``stats``, if given, accumulates ``entries`` (amplitude reads) and
    ``calls``; one application reads ``(N + 1) * 2**N`` entries.
    """
    if v.n_sites != h.n_sites:
        raise ValueError(f"state has {v.n_sites} sites, Hamiltonian has {h.n_sites}")
    return StateVector(apply_tfim_array(h, v.amplitudes, stats), h.n_sites)


def tfim_operator(h: TfimHamiltonian):
    """Callable ``x -> H x`` on raw arrays, for the eigensolvers."""

    def matvec(x):
        return apply_tfim_array(h, x)

    matvec.dim = h.dim
    return matvec


_SX = sparse.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
# local basis ordered (bit 0 = down, bit 1 = up)
_SZ = sparse.csr_matrix(np.diag([-1.0, 1.0]))


def _site_operator(local, site: int, n_sites: int):
    # Kronecker order puts the most significant bit (site n-1) first
    left = sparse.identity(1 << (n_sites - site - 1), format="csr")
    right = sparse.identity(1 << site, format="csr")
    return sparse.kron(sparse.kron(left, local), right, format="csr")


def dense_tfim(h: TfimHamiltonian) -> np.ndarray:
    """Dense real symmetric matrix of ``h`` built from Pauli Kronecker products."""
    if h.n_sites > DENSE_MAX_SITES:
        raise ValueError(f"dense_tfim limited to {DENSE_MAX_SITES} sites, got {h.n_sites}")
    n = h.n_sites
    mat = sparse.csr_matrix((h.dim, h.dim))
    for i in range(n):
        mat = mat + h.g * _site_operator(_SX, i, n)
    for i, j in h.bonds():
        mat = mat - _site_operator(_SZ, i, n) @ _site_operator(_SZ, j, n)
    return mat.toarray()


def expectation(spec: ObservableSpec, v: StateVector, h: TfimHamiltonian | None = None) -> float:
    """Return ``<v|O|v>`` for a normalized ``v``."""
    if not v.is_normalized(1e-10):
        raise ValueError("expectation requires a normalized state")
    spec.check_sites(v.n_sites)
    amps = v.amplitudes
    n = v.n_sites
    prob = np.abs(amps) ** 2
    if spec.kind == "magnetization_z_sq":
        return float(prob @ (_total_sz(n) / n) ** 2)
    if spec.kind == "magnetization_z":
        return float(prob @ _total_sz(n)) / n
    if spec.kind == "zz_correlation":
        i, j = spec.sites
        table = _spin_table(n)
        return float(prob @ (table[i] * table[j]).astype(np.float64))
    if spec.kind == "transverse_magnetization":
        total = sum(np.vdot(amps, _flip_site(amps, n, i)) for i in range(n))
        return float(total.real) / n
    if h is None:
        raise ValueError("energy expectation needs a Hamiltonian")
    if h.n_sites != n:
        raise ValueError("Hamiltonian and state sizes differ")
    return float(np.vdot(amps, apply_tfim_array(h, amps)).real)


def observable_diagonal(spec: ObservableSpec, n_sites: int) -> np.ndarray | None:
    """Diagonal of z-basis-diagonal observables, ``None`` otherwise."""
    spec.check_sites(n_sites)
    if spec.kind == "magnetization_z_sq":
        return (_total_sz(n_sites) / n_sites) ** 2
    if spec.kind == "magnetization_z":
        return _total_sz(n_sites) / n_sites
    if spec.kind == "zz_correlation":
        i, j = spec.sites
        table = _spin_table(n_sites)
        return (table[i] * table[j]).astype(np.float64)
    return None


def spontaneous_magnetization(v: StateVector) -> float:
    """Finite-chain order parameter ``sqrt(<(sum sigma_z / N)^2>)``."""
    return float(np.sqrt(expectation(ObservableSpec("magnetization_z_sq"), v)))
