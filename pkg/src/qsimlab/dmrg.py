"""Infinite- and finite-system DMRG for the open transverse-field Ising chain.

Blocks carry their Hamiltonian with all field terms already folded in, plus
``sigma_z`` of the site at the block's inner edge. A superblock is
``left block + site + site + right block`` and couples the two halves only
through the single bond between the free sites.

Index conventions: an enlarged left block has basis index
``block * 2 + site``; an enlarged right block has ``site * D + block``, so the
flattened superblock vector runs left-block, left-site, right-site,
right-block from most to least significant.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .density import entropy_from_spectrum, reduced_from_matrix
from .eigensolve import SolverConfig, lanczos

log = logging.getLogger(__name__)

SX = np.array([[0.0, 1.0], [1.0, 0.0]])
SZ = np.array([[1.0, 0.0], [0.0, -1.0]])
I2 = np.eye(2)

DEGENERACY_RTOL = 1e-10
DEGENERACY_FLOOR = 1e-14
MULTIPLET_SLACK = 4
WARM_START_MIN_NORM = 1e-8


@dataclass
class DmrgBlock:
    length: int
    basis_size: int
    block_hamiltonian: np.ndarray
    edge_sz: np.ndarray
    side: str = "left"
    # enlarged-basis -> block-basis isometry this block was cut from
    projector: np.ndarray | None = field(default=None, repr=False)
    edge_sx_sum_absorbed: bool = True

    def mirrored(self) -> "DmrgBlock":
        """Reflected copy on the other side of the chain."""
        side = "right" if self.side == "left" else "left"
        proj = None
        if self.projector is not None:
            d_old = self.projector.shape[0] // 2
            # row block*2+site <-> site*D+block
            proj = self.projector.reshape(d_old, 2, -1).transpose(1, 0, 2).reshape(2 * d_old, -1)
        return replace(self, side=side, projector=proj)


def single_site_block(g: float, side: str = "left") -> DmrgBlock:
    return DmrgBlock(1, 2, g * SX, SZ.copy(), side)


@dataclass
class TruncationReport:
    kept: int
    discarded_weight: float
    spectrum: np.ndarray
    entropy: float = 0.0
    multiplet: str = "none"


@dataclass
class DmrgConfig:
    d_max: int
    target_length: int
    g: float
    energy_tolerance: float = 1e-10
    sweep_count: int = 3
    seed: int = 0
    lanczos_tolerance: float = 1e-12

    def __post_init__(self):
        if self.d_max < 2:
            raise ValueError("d_max must be >= 2")
        if self.target_length < 4 or self.target_length % 2:
            raise ValueError("target_length must be even and >= 4")


@dataclass
class DmrgResult:
    energy: float
    energy_per_bond: float
    length: int
    final_truncation: TruncationReport
    entanglement_entropy_mid: float
    sweep_energies: list[float]
    step_energies: list[float] = field(default_factory=list)
    step_entropies: list[float] = field(default_factory=list)
    step_truncations: list[TruncationReport] = field(default_factory=list, repr=False)
    blocks: dict = field(default_factory=dict, repr=False)
    psi: np.ndarray | None = field(default=None, repr=False)


def grow_block(block: DmrgBlock, g: float) -> DmrgBlock:
    """Add one site at the inner edge; the basis doubles, nothing is cut."""
    d = block.basis_size
    eye = np.eye(d)
    if block.side == "left":
        ham = np.kron(block.block_hamiltonian, I2) + np.kron(eye, g * SX) - np.kron(block.edge_sz, SZ)
        edge = np.kron(eye, SZ)
    else:
        ham = np.kron(I2, block.block_hamiltonian) + np.kron(g * SX, eye) - np.kron(SZ, block.edge_sz)
        edge = np.kron(SZ, eye)
    return DmrgBlock(block.length + 1, 2 * d, ham, edge, block.side)


def _split(sys_block, env_block):
    if sys_block.side == env_block.side:
        raise ValueError("system and environment must sit on opposite sides")
    return (sys_block, env_block) if sys_block.side == "left" else (env_block, sys_block)


def superblock_ground(sys_block: DmrgBlock, env_block: DmrgBlock, g: float = 0.0, seed: int = 0,
                      guess: np.ndarray | None = None, tolerance: float = 1e-12):
    """Ground state of two enlarged blocks joined by one ``-sz sz`` bond.

    ``g`` is unused because field terms live inside the blocks; it is kept so
    callers can pass the model parameters uniformly. Returns ``(energy, psi)``
    with ``psi`` shaped ``(dim_left, dim_right)``.
    """
    left, right = _split(sys_block, env_block)
    hl, hr = left.block_hamiltonian, right.block_hamiltonian
    el, er = left.edge_sz, right.edge_sz
    dl, dr = hl.shape[0], hr.shape[0]

    def matvec(x):
        psi = x.reshape(dl, dr)
        return (hl @ psi + psi @ hr.T - el @ psi @ er.T).reshape(-1)

    cfg = SolverConfig(tolerance=tolerance, max_iterations=max(dl * dr, 2), seed=seed)
    res, _ = lanczos(matvec, cfg, dim=dl * dr, v0=guess)
    return res.energy, res.vector.real.reshape(dl, dr)


def _choose_kept(evals: np.ndarray, d_max: int):
    n = evals.size
    if n <= d_max:
        return n, "none"
    kept = d_max
    edge = evals[d_max - 1]
    if edge > DEGENERACY_FLOOR and abs(evals[d_max] - edge) <= DEGENERACY_RTOL * edge:
        end = d_max
        while end < n and abs(evals[end] - edge) <= DEGENERACY_RTOL * edge:
            end += 1
        if end <= d_max + MULTIPLET_SLACK:
            return end, f"extended multiplet to {end}"
        return kept, "split multiplet by lexicographic rule"
    return kept, "none"


def truncate(psi: np.ndarray, d_max: int, keep: str = "left"):
    """Project the ``keep`` half onto its ``d_max`` heaviest density-matrix states.

    Returns ``(projector, report)``; projector columns are the kept
    eigenvectors of the reduced density matrix in descending weight.
    """
    rho = reduced_from_matrix(psi, "A" if keep == "left" else "B")
    rho = 0.5 * (rho + rho.conj().T).real
    evals, evecs = np.linalg.eigh(rho)
    evals, evecs = evals[::-1], evecs[:, ::-1]
    kept, note = _choose_kept(evals, d_max)
    if note.startswith("split"):
        edge = evals[d_max - 1]
        group = np.flatnonzero(np.abs(evals - edge) <= DEGENERACY_RTOL * edge)
        keys = [tuple(np.round(-np.abs(evecs[:, j]), 12)) for j in group]
        ranked = [group[i] for i in sorted(range(len(group)), key=keys.__getitem__)]
        first = group[0]
        order = list(range(first)) + ranked + list(range(group[-1] + 1, evals.size))
        evals, evecs = evals[order], evecs[:, order]
    spectrum = evals[:kept].copy()
    discarded = float(np.clip(evals[kept:], 0.0, None).sum())
    report = TruncationReport(kept, discarded, spectrum, entropy_from_spectrum(np.clip(evals, 0.0, None)), note)
    return evecs[:, :kept].copy(), report


def _project(enlarged: DmrgBlock, projector: np.ndarray) -> DmrgBlock:
    h = projector.T @ enlarged.block_hamiltonian @ projector
    e = projector.T @ enlarged.edge_sz @ projector
    return DmrgBlock(enlarged.length, projector.shape[1], 0.5 * (h + h.T), 0.5 * (e + e.T),
                     enlarged.side, projector)


def _step(sys_block, env_block, cfg: DmrgConfig, guess=None):
    """One DMRG step: enlarge, solve the superblock, cut the system side."""
    sys_enl = grow_block(sys_block, cfg.g)
    env_enl = grow_block(env_block, cfg.g)
    energy, psi = superblock_ground(sys_enl, env_enl, cfg.g, cfg.seed, guess, cfg.lanczos_tolerance)
    projector, report = truncate(psi, cfg.d_max, keep=sys_block.side)
    return _project(sys_enl, projector), energy, psi, report


def _predict(psi, new_block: DmrgBlock, other_next: DmrgBlock | None, other_current: DmrgBlock):
    """Carry the superblock state into the bases of the next step.

    ``new_block`` is the block just cut from the system side; the opposite
    side shrinks by one site, expanded through the projector of
    ``other_current`` (the block that is being dropped).
    """
    proj = new_block.projector
    shrink = other_current.projector
    if shrink is None or other_next is None:
        return None
    if new_block.side == "left":
        dl_enl, d_other = psi.shape[0], other_current.basis_size
        t = proj.T @ psi.reshape(dl_enl, 2 * d_other)
        t = t.reshape(new_block.basis_size * 2, d_other) @ shrink.T
        return t.reshape(-1)
    dr_enl, d_other = psi.shape[1], other_current.basis_size
    t = psi.reshape(d_other * 2, dr_enl) @ proj
    t = shrink @ t.reshape(d_other, 2 * new_block.basis_size)
    return t.reshape(-1)


def mid_chain_entropy(psi: np.ndarray, left: DmrgBlock, right: DmrgBlock, blocks: dict,
                      length: int) -> float:
    """Entropy across the central bond of the chain for a superblock state.

    ``left`` and ``right`` are the unenlarged blocks ``psi`` was solved with.
    When the central bond lies inside a block, the reduced density matrix of
    the larger side is pulled back through the stored projectors, tracing
    one site per level, until it covers exactly half the chain.
    """
    half = length // 2
    if left.length + 1 >= half:
        rho, covered, side, blk = psi @ psi.conj().T, left.length + 1, "left", left.length
        pattern = "asbs->ab"
    else:
        rho, covered, side, blk = psi.T @ psi.conj(), right.length + 1, "right", right.length
        pattern = "sasb->ab"
    while covered > half:
        d = rho.shape[0] // 2
        shape = (d, 2, d, 2) if side == "left" else (2, d, 2, d)
        rho = np.einsum(pattern, rho.reshape(shape))
        covered -= 1
        if covered > half:
            proj = blocks[(side, blk)].projector
            rho = proj @ rho @ proj.conj().T
            blk -= 1
    evals = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    return entropy_from_spectrum(np.clip(evals, 0.0, None))


def infinite_dmrg(cfg: DmrgConfig) -> DmrgResult:
    """Grow a mirror-symmetric superblock until it spans ``target_length`` sites."""
    left = single_site_block(cfg.g, "left")
    blocks = {("left", 1): left, ("right", 1): left.mirrored()}
    energies, entropies, reports = [], [], []
    energy, psi, report = None, None, None
    while 2 * left.length + 2 <= cfg.target_length:
        new_left, energy, psi, report = _step(left, left.mirrored(), cfg)
        energies.append(energy)
        entropies.append(report.entropy)
        reports.append(report)
        left = new_left
        blocks[("left", left.length)] = left
        blocks[("right", left.length)] = left.mirrored()
        log.debug("infinite L=%d E=%.12f eps=%.2e", 2 * left.length, energy, report.discarded_weight)
    length = cfg.target_length
    return DmrgResult(energy, energy / (length - 1), length, report, report.entropy, [energy],
                      energies, entropies, reports, blocks, psi)


def finite_dmrg(cfg: DmrgConfig) -> DmrgResult:
    """Infinite-system warm-up followed by ``sweep_count`` finite sweeps.

    Each sweep runs the system block from the middle to the right end, back
    to the left end and again to the middle; superblock solves start from the
    previous state carried into the new bases. ``sweep_energies`` holds the
    infinite-stage energy followed by the energy at the end of every sweep.
    """
    warm = infinite_dmrg(cfg)
    blocks = dict(warm.blocks)
    length = cfg.target_length
    sweep_energies = [warm.energy]
    step_energies, step_entropies, reports = [], [], []

    sys_block = blocks[("left", length // 2)]
    env_side = "right"
    guess = None
    energy, psi, report = warm.energy, warm.psi, warm.final_truncation
    for sweep in range(cfg.sweep_count):
        while True:
            env_block = blocks[(env_side, length - sys_block.length - 2)]
            if env_block.length == 1:
                sys_block, env_block = env_block, sys_block
                env_side = env_block.side
            sys_block_new, energy, psi, report = _step(sys_block, env_block, cfg, guess)
            left, right = _split(sys_block, env_block)
            step_energies.append(energy)
            step_entropies.append(mid_chain_entropy(psi, left, right, blocks, length))
            reports.append(report)
            blocks[(sys_block_new.side, sys_block_new.length)] = sys_block_new
            env_len = length - sys_block_new.length - 2
            next_env = blocks.get((env_side, env_len)) if env_len >= 1 else None
            guess = _predict(psi, sys_block_new, next_env, env_block)
            if guess is not None and np.linalg.norm(guess) < WARM_START_MIN_NORM:
                guess = None
            sys_block = sys_block_new
            if sys_block.side == "left" and 2 * sys_block.length == length:
                break
        sweep_energies.append(energy)
        log.debug("sweep %d: E=%.12f eps=%.2e", sweep + 1, energy, report.discarded_weight)
        if abs(sweep_energies[-2] - sweep_energies[-1]) < cfg.energy_tolerance:
            break
    return DmrgResult(energy, energy / (length - 1), length, report, step_entropies[-1],
                      sweep_energies, step_energies, step_entropies, reports, blocks, psi)


def entropy_bound(d_max: int) -> float:
    """Upper bound ``2 log D`` on the half-chain entropy of a bond-D state."""
    return 2.0 * math.log(d_max)
