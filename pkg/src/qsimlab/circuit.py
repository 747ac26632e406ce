"""Statevector simulation of small gate networks.

Qubit ``q`` is bit ``q`` of the amplitude index (qubit 0 least significant).
Ket labels in docstrings list qubit 0 first, so ``|10>`` is index 1.

Rotations are ``Rz(phi) = exp(i phi Z)`` and ``Rx(phi) = exp(i phi X)``; the
computational state ``|0>`` is the ``Z = +1`` eigenstate. The spin module
stores spin up as bit 1, the opposite sign, but the transverse-field Ising
Hamiltonian is invariant under a global flip so both encodings produce the
same matrix and TFIM states move between the modules unchanged.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .spin import TfimHamiltonian, apply_tfim_array

NORM_TOL = 1e-12
MAX_UNITARY_QUBITS = 10
LEAKAGE_TOL = 1e-10

_ARITY = {"RZ": 1, "RX": 1, "RY": 1, "H": 1, "T": 1, "TDG": 1, "CNOT": 2, "TOFFOLI": 3}
_ROTATIONS = ("RZ", "RX", "RY")

HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / math.sqrt(2.0)


def rz_matrix(phi: float) -> np.ndarray:
    return np.array([[np.exp(1j * phi), 0.0], [0.0, np.exp(-1j * phi)]])


def rx_matrix(phi: float) -> np.ndarray:
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, 1j * s], [1j * s, c]])


def ry_matrix(phi: float) -> np.ndarray:
    return rz_matrix(-math.pi / 4) @ rx_matrix(phi) @ rz_matrix(math.pi / 4)


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    phase: float | None = None

    def __post_init__(self):
        kind = self.kind.upper()
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if kind not in _ARITY:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if len(self.qubits) != _ARITY[kind]:
            raise ValueError(f"{kind} acts on {_ARITY[kind]} qubit(s), got {len(self.qubits)}")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"repeated qubit in {kind}{self.qubits}")
        if min(self.qubits) < 0:
            raise ValueError("qubit indices must be non-negative")
        if (kind in _ROTATIONS) != (self.phase is not None):
            raise ValueError(f"{kind} {'needs' if kind in _ROTATIONS else 'takes no'} phase")
        if self.phase is not None:
            object.__setattr__(self, "phase", float(self.phase))

    def matrix(self) -> np.ndarray:
        """2x2 matrix of a single-qubit gate."""
        if self.kind == "RZ":
            return rz_matrix(self.phase)
        if self.kind == "RX":
            return rx_matrix(self.phase)
        if self.kind == "RY":
            return ry_matrix(self.phase)
        if self.kind == "H":
            return HADAMARD
        if self.kind == "T":
            return rz_matrix(math.pi / 8)
        if self.kind == "TDG":
            return rz_matrix(-math.pi / 8)
        raise ValueError(f"{self.kind} is not a single-qubit gate")


# constructors
def RZ(q, phi): return Gate("RZ", (q,), phi)  # noqa: E704
def RX(q, phi): return Gate("RX", (q,), phi)  # noqa: E704
def RY(q, phi): return Gate("RY", (q,), phi)  # noqa: E704
def H(q): return Gate("H", (q,))  # noqa: E704
def T(q): return Gate("T", (q,))  # noqa: E704
def TDG(q): return Gate("TDG", (q,))  # noqa: E704
def CNOT(c, t): return Gate("CNOT", (c, t))  # noqa: E704
def TOFFOLI(c1, c2, t): return Gate("TOFFOLI", (c1, c2, t))  # noqa: E704


@dataclass
class Circuit:
    n_qubits: int
    gates: list[Gate] = field(default_factory=list)

    def __post_init__(self):
        self.gates = list(self.gates)
        for gate in self.gates:
            self._check(gate)

    def _check(self, gate: Gate):
        if max(gate.qubits) >= self.n_qubits:
            raise IndexError(f"{gate.kind}{gate.qubits} outside a {self.n_qubits}-qubit register")

    def append(self, gate: Gate) -> "Circuit":
        self._check(gate)
        self.gates.append(gate)
        return self

    def extend(self, gates) -> "Circuit":
        for g in gates:
            self.append(g)
        return self

    def __len__(self):
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)


class QubitRegister:
    """Normalized ``n``-qubit state; gate application returns a new register."""

    __slots__ = ("state", "n_qubits")

    def __init__(self, state, n_qubits: int | None = None, *, check: bool = True):
        amps = np.array(state, dtype=np.complex128).reshape(-1)
        n = amps.size.bit_length() - 1
        if amps.size != 1 << n:
            raise ValueError("register length must be a power of two")
        if n_qubits is not None and n_qubits != n:
            raise ValueError(f"{amps.size} amplitudes do not describe {n_qubits} qubits")
        if check:
            norm = np.linalg.norm(amps)
            if abs(norm - 1.0) > NORM_TOL:
                raise ValueError(f"register not normalized (norm {norm:.15g})")
        amps.flags.writeable = False
        self.state = amps
        self.n_qubits = n

    @classmethod
    def zeros(cls, n_qubits: int) -> "QubitRegister":
        return cls.basis(n_qubits, 0)

    @classmethod
    def basis(cls, n_qubits: int, index: int) -> "QubitRegister":
        v = np.zeros(1 << n_qubits, dtype=complex)
        v[index] = 1.0
        return cls(v)

    @classmethod
    def from_label(cls, label: str) -> "QubitRegister":
        """Basis state from a ket label such as ``'110'``, qubit 0 first."""
        index = sum(1 << q for q, ch in enumerate(label) if ch == "1")
        return cls.basis(len(label), index)

    @classmethod
    def random(cls, n_qubits: int, seed: int) -> "QubitRegister":
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(1 << n_qubits) + 1j * rng.standard_normal(1 << n_qubits)
        return cls(v / np.linalg.norm(v))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.state) ** 2

    def population(self, qubit: int, value: int = 1) -> float:
        """Probability that ``qubit`` reads ``value``."""
        mask = ((np.arange(self.state.size) >> qubit) & 1) == value
        return float(np.sum(self.probabilities()[mask]))

    def overlap(self, other: "QubitRegister") -> complex:
        return complex(np.vdot(self.state, other.state))

    def __repr__(self):
        return f"QubitRegister(n_qubits={self.n_qubits})"


# --- application ----------------------------------------------------------


def _apply_single(amps: np.ndarray, n: int, q: int, u: np.ndarray) -> np.ndarray:
    view = amps.reshape(1 << (n - q - 1), 2, 1 << q)
    out = np.empty_like(view)
    out[:, 0, :] = u[0, 0] * view[:, 0, :] + u[0, 1] * view[:, 1, :]
    out[:, 1, :] = u[1, 0] * view[:, 0, :] + u[1, 1] * view[:, 1, :]
    return out.reshape(-1)


def _apply_controlled_x(amps: np.ndarray, n: int, controls, target: int) -> np.ndarray:
    out = amps.copy()
    tensor = out.reshape((2,) * n)
    sel = [slice(None)] * n
    for c in controls:
        sel[n - 1 - c] = 1
    ax = n - 1 - target
    lo, hi = list(sel), list(sel)
    lo[ax], hi[ax] = 0, 1
    lo, hi = tuple(lo), tuple(hi)
    tmp = tensor[lo].copy()
    tensor[lo] = tensor[hi]
    tensor[hi] = tmp
    return out


def apply_gate_array(amps: np.ndarray, n: int, gate: Gate) -> np.ndarray:
    if max(gate.qubits) >= n:
        raise IndexError(f"{gate.kind}{gate.qubits} outside a {n}-qubit register")
    if gate.kind == "CNOT":
        return _apply_controlled_x(amps, n, gate.qubits[:1], gate.qubits[1])
    if gate.kind == "TOFFOLI":
        return _apply_controlled_x(amps, n, gate.qubits[:2], gate.qubits[2])
    return _apply_single(amps, n, gate.qubits[0], gate.matrix())


def apply_gate(reg: QubitRegister, gate: Gate) -> QubitRegister:
    return QubitRegister(apply_gate_array(reg.state, reg.n_qubits, gate), check=False)


def run_circuit(reg: QubitRegister, circuit: Circuit) -> QubitRegister:
    if circuit.n_qubits != reg.n_qubits:
        raise ValueError(f"{circuit.n_qubits}-qubit circuit on a {reg.n_qubits}-qubit register")
    amps = reg.state
    for gate in circuit.gates:
        amps = apply_gate_array(amps, reg.n_qubits, gate)
    return QubitRegister(amps, check=False)


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    """Dense unitary whose column ``k`` is the circuit applied to basis state ``k``."""
    n = circuit.n_qubits
    if n > MAX_UNITARY_QUBITS:
        raise ValueError(f"refusing to build a dense unitary on {n} > {MAX_UNITARY_QUBITS} qubits")
    dim = 1 << n
    cols = np.empty((dim, dim), dtype=complex)
    for k in range(dim):
        amps = np.zeros(dim, dtype=complex)
        amps[k] = 1.0
        for gate in circuit.gates:
            amps = apply_gate_array(amps, n, gate)
        cols[:, k] = amps
    return cols


def unitary_distance_up_to_phase(u, v) -> float:
    """``min_theta ||U - exp(i theta) V||_F``, i.e. ``sqrt(2d - 2|Tr U^dag V|)`` for unitaries.

    The norm is evaluated at the optimal phase rather than through the
    closed form, whose square root turns rounding near zero into ~1e-8.
    """
    u, v = np.asarray(u), np.asarray(v)
    if u.shape != v.shape or u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"shape mismatch {u.shape} vs {v.shape}")
    tr = np.vdot(v, u)  # Tr V^dag U
    phase = tr / abs(tr) if abs(tr) > 0 else 1.0
    return float(np.linalg.norm(u - phase * v))


def toffoli_matrix() -> np.ndarray:
    """Exact Toffoli on qubits (0, 1 controls; 2 target): swaps |110> and |111>."""
    perm = np.eye(8)
    perm[[3, 7]] = perm[[7, 3]]
    return perm


def toffoli_circuit() -> Circuit:
    """Toffoli (controls 0, 1; target 2) from H, CNOT, T and T-inverse.

    Here ``T = Rz(pi/8)`` equals the usual ``diag(1, e^{i pi/4})`` only up to
    conjugation and a phase, which is why the usual T and T-inverse trade
    places below.
    """
    a, b, c = 0, 1, 2
    return Circuit(3, [
        H(c), CNOT(b, c), T(c), CNOT(a, c), TDG(c), CNOT(b, c), T(c), CNOT(a, c),
        TDG(b), TDG(c), H(c), CNOT(a, b), TDG(a), T(b), CNOT(a, b),
    ])


# --- four-body gadget ------------------------------------------------------


def four_body_G(control: int, targets: Sequence[int], n_qubits: int | None = None) -> Circuit:
    """Hadamard on ``control``, CNOT onto each target in order, Hadamard again.

    Maps the eigenvalue of ``X X X X`` on the targets onto the control:
    starting from control ``|0>``, parity +1 leaves it in ``|0>`` and parity
    -1 sends it to ``|1>``.
    """
    targets = tuple(int(t) for t in targets)
    if len(targets) != 4:
        raise ValueError("four-body gadget needs exactly four targets")
    if len(set(targets)) != 4 or control in targets:
        raise ValueError("control and targets must be distinct qubits")
    n = n_qubits if n_qubits is not None else max(control, *targets) + 1
    return Circuit(n, [H(control), *(CNOT(control, t) for t in targets), H(control)])


def _four_body_array(amps, n, e0t, control, targets):
    g = four_body_G(control, targets, n)
    for gate in g.gates:
        amps = apply_gate_array(amps, n, gate)
    amps = apply_gate_array(amps, n, RZ(control, -e0t))
    for gate in g.gates:
        amps = apply_gate_array(amps, n, gate)
    return amps


def _control_population(amps, control):
    mask = ((np.arange(amps.size) >> control) & 1) == 1
    return float(np.sum(np.abs(amps[mask]) ** 2))


def simulate_four_body(e0: float, t: float, reg: QubitRegister, control: int = 4,
                       targets: Sequence[int] = (0, 1, 2, 3)) -> QubitRegister:
    """Apply ``exp(-i E0 t XXXX)`` to ``targets`` through ``G Rz(-E0 t) G``.

    The ancilla ``control`` must start (and ends) in ``|0>``.
    """
    leak = _control_population(reg.state, control)
    if leak > LEAKAGE_TOL:
        raise ValueError(f"control qubit {control} has |1> population {leak:.3e}")
    return QubitRegister(_four_body_array(reg.state, reg.n_qubits, e0 * t, control, targets),
                         check=False)


# --- time evolution ------------------------------------------------------


@dataclass
class TrotterPlan:
    """First-order product formula.

    ``terms`` holds ``(descriptor, coefficient)`` pairs, with descriptors

    * ``("x", i)`` and ``("z", i)``: single-qubit Pauli fields,
    * ``("zz", i, j)``: Ising bond,
    * ``("xxxx", (i, j, k, l), ancilla)``: four-body term through the gadget.
    """

    terms: list
    total_time: float
    steps: int

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        for desc, _ in self.terms:
            _validate_term(desc)

    @property
    def tau(self) -> float:
        return self.total_time / self.steps


def _validate_term(desc):
    kind = desc[0]
    if kind in ("x", "z") and len(desc) == 2:
        return
    if kind == "zz" and len(desc) == 3 and desc[1] != desc[2]:
        return
    if kind == "xxxx" and len(desc) == 3 and len(desc[1]) == 4:
        return
    raise ValueError(f"term {desc!r} cannot be exponentiated with the available gates")


def term_gates(desc, angle: float) -> list[Gate]:
    """Gates realizing ``exp(-i angle P)`` for the Pauli term ``desc``."""
    kind = desc[0]
    if kind == "x":
        return [RX(desc[1], -angle)]
    if kind == "z":
        return [RZ(desc[1], -angle)]
    if kind == "zz":
        i, j = desc[1], desc[2]
        return [CNOT(i, j), RZ(j, -angle), CNOT(i, j)]
    if kind == "xxxx":
        g = four_body_G(desc[2], desc[1]).gates
        return [*g, RZ(desc[2], -angle), *g]
    raise ValueError(f"term {desc!r} cannot be exponentiated with the available gates")


def trotter_slice(plan: TrotterPlan, n_qubits: int) -> Circuit:
    """One product-formula step of length ``plan.tau``."""
    c = Circuit(n_qubits)
    for desc, coeff in plan.terms:
        c.extend(term_gates(desc, coeff * plan.tau))
    return c


def trotter_evolve(plan: TrotterPlan, reg: QubitRegister) -> QubitRegister:
    n = reg.n_qubits
    ancillas = [desc[2] for desc, _ in plan.terms if desc[0] == "xxxx"]
    for a in ancillas:
        leak = _control_population(reg.state, a)
        if leak > LEAKAGE_TOL:
            raise ValueError(f"ancilla {a} has |1> population {leak:.3e}")
    gates = trotter_slice(plan, n).gates
    amps = reg.state
    for _ in range(plan.steps):
        for gate in gates:
            amps = apply_gate_array(amps, n, gate)
    return QubitRegister(amps, check=False)


def tfim_trotter_plan(h: TfimHamiltonian, total_time: float, steps: int) -> TrotterPlan:
    """Bonds first, then fields, matching ``H = g sum X - sum ZZ``."""
    terms = [(("zz", i, j), -1.0) for i, j in h.bonds()]
    terms += [(("x", i), h.g) for i in range(h.n_sites)]
    return TrotterPlan(terms, total_time, steps)


def rk4_evolve(h: TfimHamiltonian, t: float, tau: float, reg: QubitRegister,
               stats: dict | None = None) -> QubitRegister:
    """Fourth-order Runge-Kutta for ``d psi/dt = -i H psi``.

    The state is renormalized after every step; ``stats`` (if given)
    receives ``norm_drift``, the summed ``| ||psi|| - 1 |`` before each
    renormalization, and ``steps``.
    """
    if reg.n_qubits != h.n_sites:
        raise ValueError("register and Hamiltonian sizes differ")
    if tau <= 0:
        raise ValueError("tau must be positive")
    n_full = int(math.floor(t / tau + 1e-9))
    rest = t - n_full * tau
    steps = [tau] * n_full + ([rest] if rest > 1e-12 * max(tau, 1.0) else [])
    psi = reg.state.copy()
    drift = 0.0

    def f(v):
        return -1j * apply_tfim_array(h, v)

    for dt in steps:
        k1 = dt * f(psi)
        k2 = dt * f(psi + 0.5 * k1)
        k3 = dt * f(psi + 0.5 * k2)
        k4 = dt * f(psi + k3)
        psi = psi + (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        norm = np.linalg.norm(psi)
        drift += abs(norm - 1.0)
        psi /= norm
    if stats is not None:
        stats["norm_drift"] = drift
        stats["steps"] = len(steps)
    return QubitRegister(psi, check=False)


def overlap_deficit(a: QubitRegister, b: QubitRegister) -> float:
    """``1 - |<a|b>|^2``."""
    return float(1.0 - abs(a.overlap(b)) ** 2)


# --- text format ---------------------------------------------------------


def dumps(circuit: Circuit) -> str:
    """One gate per line, ``KIND q0 [q1 [q2]] [phase]``; phases use ``repr``."""
    lines = [f"# n_qubits {circuit.n_qubits}"]
    for g in circuit.gates:
        parts = [g.kind, *map(str, g.qubits)]
        if g.phase is not None:
            parts.append(repr(g.phase))
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def loads(text: str, n_qubits: int | None = None) -> Circuit:
    """Parse the text format; the register size comes from ``n_qubits``, a
    ``# n_qubits N`` comment, or the largest index used, in that order."""
    gates, declared = [], None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            words = line[1:].split()
            if len(words) == 2 and words[0] == "n_qubits":
                declared = int(words[1])
            continue
        words = line.split()
        kind = words[0].upper()
        if kind not in _ARITY:
            raise ValueError(f"line {lineno}: unknown gate {words[0]!r}")
        arity = _ARITY[kind]
        expected = arity + (1 if kind in _ROTATIONS else 0)
        if len(words) - 1 != expected:
            raise ValueError(f"line {lineno}: {kind} expects {expected} fields, got {len(words) - 1}")
        try:
            qubits = tuple(int(w) for w in words[1:1 + arity])
            phase = float(words[1 + arity]) if kind in _ROTATIONS else None
            gates.append(Gate(kind, qubits, phase))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    n = n_qubits or declared or (max((max(g.qubits) for g in gates), default=-1) + 1)
    return Circuit(max(n, 1), gates)
