"""Ground-state eigensolvers: power iteration, Lanczos, and dense oracles.

Operators are passed as callables ``matvec(x) -> H @ x`` on 1-D arrays.
A :class:`~qsimlab.spin.TfimHamiltonian` or a square ndarray is accepted
wherever an operator is expected.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .spin import (
    ObservableSpec,
    StateVector,
    TfimHamiltonian,
    _flip_site,
    dense_tfim,
    observable_diagonal,
    tfim_operator,
)

log = logging.getLogger(__name__)

BREAKDOWN_B2 = 1e-28
DENSE_EIGH_MAX_DIM = 4096
JACOBI_MAX_DIM = 64
THERMAL_MAX_SITES = 12


class ConvergenceError(RuntimeError):
    """Raised when an iterative solver exhausts its iteration budget.

    The last iterate is kept in ``result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


@dataclass
class SolverConfig:
    tolerance: float = 1e-10
    max_iterations: int = 500
    seed: int = 0
    shift: float = 0.0
    reorthogonalize: bool = True
    # optional extra stopping condition on ||Hv - Ev||
    residual_tolerance: float | None = None

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass
class LanczosCoefficients:
    a: np.ndarray
    b: np.ndarray
    iterations: int
    # max |<phi_i|phi_j>| (i != j) after each step, when tracked
    orthogonality: list[float] = field(default_factory=list)
    ritz_history: list[float] = field(default_factory=list)

    def tridiagonal(self) -> "TridiagonalMatrix":
        return TridiagonalMatrix(self.a, self.b)


@dataclass
class TridiagonalMatrix:
    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        self.diag = np.asarray(self.diag, dtype=float).reshape(-1)
        self.offdiag = np.asarray(self.offdiag, dtype=float).reshape(-1)
        if self.diag.size < 1:
            raise ValueError("empty tridiagonal matrix")
        if self.offdiag.size != self.diag.size - 1:
            raise ValueError("offdiag must be one shorter than diag")

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)


@dataclass
class EigenResult:
    energy: float
    vector: np.ndarray
    iterations: int
    residual_norm: float

    def state(self) -> StateVector:
        return StateVector(self.vector)


def as_operator(op, dim: int | None = None):
    """Normalize ``op`` to ``(matvec, dim)``."""
    if isinstance(op, TfimHamiltonian):
        return tfim_operator(op), op.dim
    if isinstance(op, np.ndarray):
        if op.ndim != 2 or op.shape[0] != op.shape[1]:
            raise ValueError("matrix operator must be square")
        return (lambda x: op @ x), op.shape[0]
    if dim is None:
        dim = getattr(op, "dim", None)
    if dim is None:
        raise ValueError("dimension of a callable operator must be given")
    return op, int(dim)


def random_start(dim: int, seed: int) -> np.ndarray:
    v = np.random.default_rng(seed).standard_normal(dim)
    return v / np.linalg.norm(v)


def power_method(op, cfg: SolverConfig | None = None, *, dim=None, v0=None) -> EigenResult:
    """Iterate ``v <- normalize((H - shift) v)`` until the energy settles.

    Converges to the eigenvector whose eigenvalue has the largest modulus
    after the shift; the returned energy is the Rayleigh quotient of ``H``.
    """
    cfg = cfg or SolverConfig()
    matvec, dim = as_operator(op, dim)
    v = random_start(dim, cfg.seed) if v0 is None else np.asarray(v0) / np.linalg.norm(v0)
    hv = matvec(v)
    energy = float(np.vdot(v, hv).real)
    for it in range(1, cfg.max_iterations + 1):
        w = hv - cfg.shift * v
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            raise ValueError("power iteration produced the zero vector")
        v = w / nrm
        hv = matvec(v)
        new_energy = float(np.vdot(v, hv).real)
        if abs(new_energy - energy) < cfg.tolerance:
            res = float(np.linalg.norm(hv - new_energy * v))
            return EigenResult(new_energy, v, it, res)
        energy = new_energy
    res = float(np.linalg.norm(hv - energy * v))
    raise ConvergenceError(
        f"power method did not converge in {cfg.max_iterations} iterations",
        EigenResult(energy, v, cfg.max_iterations, res),
    )


def tfim_power_shift(h: TfimHamiltonian) -> float:
    """Shift making the TFIM ground state dominant: the norm bound of ``h``."""
    return h.norm_bound()


def tridiagonal_eigen(t: TridiagonalMatrix):
    """Ascending eigenvalues and eigenvectors (columns) of ``t``."""
    if t.diag.size == 1:
        return t.diag.copy(), np.ones((1, 1))
    return eigh_tridiagonal(t.diag, t.offdiag)


def _lowest_ritz(a, b) -> float:
    if len(a) == 1:
        return float(a[0])
    return float(eigh_tridiagonal(np.asarray(a), np.asarray(b), eigvals_only=True,
                                  select="i", select_range=(0, 0))[0])


def lanczos(op, cfg: SolverConfig | None = None, *, dim=None, v0=None,
            track_orthogonality: bool = False):
    """Lowest eigenpair of a Hermitian operator by the Lanczos recurrence.

    Basis vectors are kept normalized, so the tridiagonal matrix carries
    ``a_n`` on the diagonal and ``b_n`` on the off-diagonal. With
    ``cfg.reorthogonalize`` every new vector is projected out of the stored
    basis (two Gram-Schmidt passes).

    Iteration stops when the lowest Ritz value changed by less than
    ``cfg.tolerance`` on two successive steps, or on breakdown
    (``b_n**2 < 1e-28``) which signals an invariant subspace.

    Returns
    -------
    (EigenResult, LanczosCoefficients)
    """
    cfg = cfg or SolverConfig()
    matvec, dim = as_operator(op, dim)
    if dim < 1:
        raise ValueError("operator dimension must be positive")
    if v0 is None:
        v = random_start(dim, cfg.seed)
    else:
        v = np.asarray(v0).reshape(-1)
        nrm = np.linalg.norm(v)
        if not nrm > 1e-8:
            v = random_start(dim, cfg.seed)
        else:
            v = v / nrm

    w = matvec(v)
    dtype = np.result_type(v.dtype, w.dtype)
    basis = np.empty((min(dim, 32), dim), dtype=dtype)
    basis[0] = v
    a: list[float] = []
    b: list[float] = []
    ritz: list[float] = []
    ortho: list[float] = []
    v_prev = None
    converged = False
    stalls = 0
    for it in range(1, min(cfg.max_iterations, dim) + 1):
        if it > 1:
            w = matvec(v)
        a_n = float(np.vdot(v, w).real)
        a.append(a_n)
        w = w - a_n * v
        if v_prev is not None:
            w = w - b[-1] * v_prev
        if cfg.reorthogonalize:
            mat = basis[:it]
            for _ in range(2):
                w = w - mat.T @ (mat.conj() @ w)
        ritz.append(_lowest_ritz(a, b))
        if len(ritz) > 1:
            stalls = stalls + 1 if abs(ritz[-1] - ritz[-2]) < cfg.tolerance else 0
        b_next_sq = float(np.vdot(w, w).real)
        breakdown = b_next_sq < BREAKDOWN_B2 or it == dim
        if stalls >= 2 or breakdown:
            if cfg.residual_tolerance is None or breakdown:
                converged = True
                break
            if _ritz_residual(a, b, np.sqrt(b_next_sq)) < cfg.residual_tolerance:
                converged = True
                break
        b_n = np.sqrt(b_next_sq)
        b.append(b_n)
        v_prev, v = v, w / b_n
        if it == basis.shape[0]:
            grown = np.empty((min(dim, 2 * it), dim), dtype=dtype)
            grown[:it] = basis
            basis = grown
        basis[it] = v
        if track_orthogonality:
            mat = basis[: it + 1]
            gram = np.abs(mat.conj() @ mat.T)
            np.fill_diagonal(gram, 0.0)
            ortho.append(float(gram.max()))

    k = len(a)
    evals, evecs = tridiagonal_eigen(TridiagonalMatrix(a, b[: k - 1]))
    y = evecs[:, 0]
    vec = basis[:k].T @ y
    vec = vec / np.linalg.norm(vec)
    energy = float(evals[0])
    resid = float(np.linalg.norm(matvec(vec) - energy * vec))
    coeffs = LanczosCoefficients(np.array(a), np.array(b[: k - 1]), k, ortho, ritz)
    result = EigenResult(energy, vec, k, resid)
    if not converged:
        raise ConvergenceError(
            f"Lanczos did not converge in {cfg.max_iterations} iterations", result
        )
    log.debug("lanczos: E=%.12f after %d iterations, residual %.2e", energy, k, resid)
    return result, coeffs


def _ritz_residual(a, b, b_next) -> float:
    _, vecs = tridiagonal_eigen(TridiagonalMatrix(a, b[: len(a) - 1]))
    return abs(b_next * vecs[-1, 0])


# --- dense oracle ---------------------------------------------------------


def _jacobi_eigh(m: np.ndarray, tol: float = 1e-12, max_sweeps: int = 60):
    """Cyclic Jacobi: two-sided unitary rotations until off-diagonals vanish."""
    a = np.array(m, dtype=np.complex128 if np.iscomplexobj(m) else np.float64)
    n = a.shape[0]
    v = np.eye(n, dtype=a.dtype)
    scale = max(np.linalg.norm(a), 1e-300)
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off < tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag < 1e-300:
                    continue
                phase = apq / mag
                tau = (a[q, q].real - a[p, p].real) / (2.0 * mag)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # columns p, q of the rotation: [c, -s conj(phase)], [s phase, c]
                sp = s * phase
                col_p = a[:, p].copy()
                col_q = a[:, q]
                a[:, p] = c * col_p - np.conj(sp) * col_q
                a[:, q] = sp * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :]
                a[p, :] = c * row_p - sp * row_q
                a[q, :] = np.conj(sp) * row_p + c * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = v[:, p].copy()
                v[:, p] = c * vp - np.conj(sp) * v[:, q]
                v[:, q] = sp * vp + c * v[:, q]
    else:
        raise ConvergenceError("Jacobi sweeps did not converge")
    evals = np.diag(a).real
    order = np.argsort(evals, kind="stable")
    return evals[order], v[:, order]


def dense_eigh(m: np.ndarray, *, method: str = "auto", vectors: bool = True):
    """Full spectral decomposition of a Hermitian matrix.

    ``method="jacobi"`` runs cyclic Jacobi rotations (used automatically up to
    dimension 64); ``"lapack"`` defers to ``numpy.linalg.eigh``. Returns
    ascending eigenvalues and, if ``vectors``, the eigenvector columns.
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("dense_eigh needs a square matrix")
    n = m.shape[0]
    if n > DENSE_EIGH_MAX_DIM:
        raise ValueError(f"dimension {n} exceeds {DENSE_EIGH_MAX_DIM}")
    asym = np.max(np.abs(m - m.conj().T)) if n else 0.0
    if asym > 1e-12 * max(1.0, np.max(np.abs(m))):
        raise ValueError(f"matrix is not Hermitian (asymmetry {asym:.2e})")
    if method == "auto":
        method = "jacobi" if n <= JACOBI_MAX_DIM else "lapack"
    if method == "jacobi":
        evals, evecs = _jacobi_eigh(m)
    elif method == "lapack":
        if not vectors:
            return np.linalg.eigvalsh(m)
        evals, evecs = np.linalg.eigh(m)
    else:
        raise ValueError(f"unknown method {method!r}")
    return (evals, evecs) if vectors else evals


# --- thermal averages -----------------------------------------------------


def _eigenstate_expectations(spec: ObservableSpec, h: TfimHamiltonian, evals, evecs):
    n = h.n_sites
    if spec.kind == "energy":
        return evals
    probs = np.abs(evecs) ** 2
    diag = observable_diagonal(spec, n)
    if diag is not None:
        return diag @ probs
    # transverse magnetization: <phi|sum_i sigma_x^(i)|phi> / N
    total = np.zeros(evecs.shape[1])
    for i in range(n):
        flipped = np.stack([_flip_site(evecs[:, k], n, i) for k in range(evecs.shape[1])], axis=1)
        total += np.einsum("ij,ij->j", evecs.conj(), flipped).real
    return total / n


@lru_cache(maxsize=8)
def _tfim_spectrum(h: TfimHamiltonian):
    evals, evecs = dense_eigh(dense_tfim(h))
    evals.flags.writeable = False
    evecs.flags.writeable = False
    return evals, evecs


def thermal_expectation(h: TfimHamiltonian, spec: ObservableSpec, beta: float) -> float:
    """``Tr[O exp(-beta H)] / Tr[exp(-beta H)]`` from the full spectrum."""
    if h.n_sites > THERMAL_MAX_SITES:
        raise ValueError(f"thermal_expectation limited to {THERMAL_MAX_SITES} sites")
    if beta < 0:
        raise ValueError("beta must be non-negative")
    evals, evecs = _tfim_spectrum(h)
    weights = np.exp(-beta * (evals - evals[0]))
    values = _eigenstate_expectations(spec, h, evals, evecs)
    return float(weights @ values / weights.sum())


def parity_start(dim: int, seed: int, parity: int) -> np.ndarray:
    """Random start vector in one sector of the global spin flip.

    Flipping every spin maps basis index ``k`` to ``dim - 1 - k``.
    """
    v = random_start(dim, seed)
    v = v + parity * v[::-1]
    return v / np.linalg.norm(v)


def tfim_ground_state(h: TfimHamiltonian, cfg: SolverConfig | None = None, *,
                      method: str = "lanczos"):
    """TFIM ground state from the lower of the two flip-parity sectors.

    In the ordered phase the two sector ground states are split by roughly
    ``g**N``, far below what a Krylov space built from a generic start can
    resolve; starting inside each sector sidesteps the near-degeneracy.

    Returns ``(EigenResult, info)``; ``info`` holds the winning parity and,
    for Lanczos, its coefficients.
    """
    cfg = cfg or SolverConfig()
    best = None
    for parity in (1, -1):
        v0 = parity_start(h.dim, cfg.seed, parity)
        if method == "lanczos":
            res, coeffs = lanczos(h, cfg, v0=v0)
        elif method == "power":
            c = SolverConfig(cfg.tolerance, cfg.max_iterations, cfg.seed,
                             cfg.shift or tfim_power_shift(h), cfg.reorthogonalize)
            res, coeffs = power_method(h, c, v0=v0), None
        else:
            raise ValueError(f"unknown method {method!r}")
        if best is None or res.energy < best[0].energy:
            best = (res, {"parity": parity, "coefficients": coeffs})
    return best
