"""Density matrices, partial traces, Schmidt decompositions, entropies.

Multi-qubit objects follow the package-wide convention that site ``i`` is
bit ``i`` of the basis index. A reduced state on a subset of sites uses the
same rule locally: the ``j``-th kept site (in ascending order) is bit ``j``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spin import StateVector

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
NEGATIVITY_TOL = 1e-12


class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite matrix."""

    __slots__ = ("matrix",)

    def __init__(self, matrix, validate: bool = True):
        mat = np.array(matrix, dtype=np.complex128)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("density matrix must be square")
        if validate:
            asym = np.max(np.abs(mat - mat.conj().T))
            if asym > HERMITIAN_TOL:
                raise ValueError(f"density matrix not Hermitian (asymmetry {asym:.2e})")
            tr = np.trace(mat)
            if abs(tr - 1.0) > TRACE_TOL:
                raise ValueError(f"density matrix trace {tr.real:.15g} != 1")
            low = np.linalg.eigvalsh(mat).min()
            if low < -NEGATIVITY_TOL:
                raise ValueError(f"density matrix has negative eigenvalue {low:.2e}")
        mat.flags.writeable = False
        self.matrix = mat

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def pure(cls, state) -> "DensityMatrix":
        amps = state.amplitudes if isinstance(state, StateVector) else np.asarray(state).reshape(-1)
        return cls(np.outer(amps, amps.conj()))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim) / dim)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def __repr__(self):
        return f"DensityMatrix(dimension={self.dimension})"


@dataclass(frozen=True)
class Bipartition:
    sites_a: tuple[int, ...]
    sites_b: tuple[int, ...]

    def __post_init__(self):
        a, b = set(self.sites_a), set(self.sites_b)
        if not a or not b:
            raise ValueError("both halves of a bipartition must be non-empty")
        if a & b:
            raise ValueError("bipartition halves overlap")
        n = len(a) + len(b)
        if a | b != set(range(n)):
            raise ValueError("bipartition must cover sites 0..n-1")
        object.__setattr__(self, "sites_a", tuple(sorted(a)))
        object.__setattr__(self, "sites_b", tuple(sorted(b)))

    @property
    def n_sites(self) -> int:
        return len(self.sites_a) + len(self.sites_b)

    @classmethod
    def split(cls, n_a: int, n_sites: int) -> "Bipartition":
        """Sites ``0..n_a-1`` against the rest."""
        return cls(tuple(range(n_a)), tuple(range(n_a, n_sites)))


def _axes(sites, n_sites):
    # tensor axis 0 is the most significant bit, i.e. site n-1
    return [n_sites - 1 - s for s in reversed(sites)]


def amplitude_matrix(state, cut: Bipartition) -> np.ndarray:
    """Reshape a pure state into the ``(d_A, d_B)`` coefficient matrix."""
    amps = state.amplitudes if isinstance(state, StateVector) else np.asarray(state).reshape(-1)
    n = cut.n_sites
    if amps.size != 1 << n:
        raise ValueError(f"state of length {amps.size} does not match {n} sites")
    tensor = amps.reshape((2,) * n)
    perm = _axes(cut.sites_a, n) + _axes(cut.sites_b, n)
    return tensor.transpose(perm).reshape(1 << len(cut.sites_a), 1 << len(cut.sites_b))


def reduced_from_matrix(psi: np.ndarray, keep: str = "A") -> np.ndarray:
    """Reduced density matrix of one factor of a ``(d_A, d_B)`` pure state."""
    if keep == "A":
        return psi @ psi.conj().T
    if keep == "B":
        return psi.T @ psi.conj()
    raise ValueError("keep must be 'A' or 'B'")


def partial_trace(state, cut: Bipartition, keep: str = "A") -> DensityMatrix:
    """Trace out the complement of ``keep`` from a pure or mixed state."""
    if keep not in ("A", "B"):
        raise ValueError("keep must be 'A' or 'B'")
    if isinstance(state, DensityMatrix):
        n = cut.n_sites
        if state.dimension != 1 << n:
            raise ValueError("density matrix does not match the bipartition")
        kept, traced = (cut.sites_a, cut.sites_b) if keep == "A" else (cut.sites_b, cut.sites_a)
        tensor = state.matrix.reshape((2,) * (2 * n))
        row = _axes(kept, n) + _axes(traced, n)
        perm = row + [n + ax for ax in row]
        dk, dt = 1 << len(kept), 1 << len(traced)
        blocks = tensor.transpose(perm).reshape(dk, dt, dk, dt)
        rho = np.einsum("ijkj->ik", blocks)
    else:
        rho = reduced_from_matrix(amplitude_matrix(state, cut), keep)
    # restore exact Hermiticity lost to summation order
    return DensityMatrix(0.5 * (rho + rho.conj().T))


def entropy_from_spectrum(probs, base: float | None = None) -> float:
    """``-sum p log p`` with ``0 log 0 = 0``; tiny negative weights clamp to 0."""
    p = np.asarray(probs, dtype=float)
    if np.any(p < -NEGATIVITY_TOL):
        raise ValueError(f"negative weight {p.min():.2e} in spectrum")
    p = p[p > 0.0]
    s = float(-np.sum(p * np.log(p)))
    return s / math.log(base) if base else s


def von_neumann_entropy(rho: DensityMatrix, base: float | None = None) -> float:
    """``-Tr(rho log rho)`` in nats, or in ``base`` units if given."""
    if not isinstance(rho, DensityMatrix):
        rho = DensityMatrix(rho)
    return entropy_from_spectrum(rho.eigenvalues(), base)


@dataclass
class SchmidtSpectrum:
    coefficients: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray

    @property
    def rank(self) -> int:
        return self.coefficients.size

    def entropy(self, base: float | None = None) -> float:
        return entropy_from_spectrum(self.coefficients**2, base)

    def reconstruct(self) -> np.ndarray:
        """Coefficient matrix ``sum_i c_i |phi_i><chi_i*|`` of the state."""
        return (self.left_vectors * self.coefficients) @ self.right_vectors.T


def schmidt_from_matrix(psi: np.ndarray, cutoff: float = 1e-14) -> SchmidtSpectrum:
    """Schmidt decomposition of a ``(d_A, d_B)`` coefficient matrix.

    Left vectors diagonalize the reduced density matrix of A; each right
    vector is the normalized image ``psi^T conj(phi_i)``, whose norm is the
    Schmidt coefficient.
    """
    _, vecs = np.linalg.eigh(reduced_from_matrix(psi, "A"))
    vecs = vecs[:, ::-1]
    images = vecs.conj().T @ psi
    coeffs = np.linalg.norm(images, axis=1)
    order = np.argsort(-coeffs, kind="stable")
    coeffs, vecs, images = coeffs[order], vecs[:, order], images[order]
    keep = coeffs > cutoff
    coeffs, vecs, images = coeffs[keep], vecs[:, keep], images[keep]
    right = (images / coeffs[:, None]).T
    return SchmidtSpectrum(coeffs, vecs, right)


def schmidt(state, cut: Bipartition) -> SchmidtSpectrum:
    return schmidt_from_matrix(amplitude_matrix(state, cut))


def entanglement_entropy(state, cut: Bipartition, base: float | None = None) -> float:
    return von_neumann_entropy(partial_trace(state, cut, "A"), base)
