"""Gate-level IR, ansatz/Trotter builders, and circuit execution."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .pauli import PauliSum, PauliError
from .statevec import StateVector, apply_unitary

ROTATION_KINDS = ("Rx", "Ry", "Rz")
FIXED_KINDS = ("H", "S", "Sdg", "X", "Z")

_SQRT2 = math.sqrt(2.0)

_FIXED_MATS = {
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / _SQRT2,
    "S": np.diag([1.0, 1j]),
    "Sdg": np.diag([1.0, -1j]),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Z": np.diag([1.0, -1.0]).astype(complex),
}


class CircuitError(ValueError):
    pass


def rotation_matrix(kind: str, angle: float) -> np.ndarray:
    c, s = math.cos(angle / 2.0), math.sin(angle / 2.0)
    if kind == "Rx":
        return np.array([[c, -1j * s], [-1j * s, c]])
    if kind == "Ry":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind == "Rz":
        return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])
    raise CircuitError(f"unknown rotation kind {kind!r}")


@dataclass(frozen=True)
class Gate:
    """Single gate: a 1-qubit base operation plus optional controls.

    CNOT is an X with one 1-control, CZ a Z with one 1-control; gates in the
    CCZ class carry two or more controls.  ``controls`` holds (qubit, polarity)
    pairs.
    """

    kind: str
    targets: tuple[int, ...]
    angle: float | None = None
    controls: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.kind in ROTATION_KINDS:
            if self.angle is None:
                raise CircuitError(f"{self.kind} requires an angle")
        elif self.kind in FIXED_KINDS:
            if self.angle is not None:
                raise CircuitError(f"{self.kind} carries no angle")
        else:
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        if len(self.targets) != 1:
            raise CircuitError("base operation acts on exactly one target")
        active = set(self.targets) | {q for q, _ in self.controls}
        if len(active) != len(self.targets) + len(self.controls):
            raise CircuitError("control and target indices must be disjoint")
        for _, pol in self.controls:
            if pol not in (0, 1):
                raise CircuitError("control polarity must be 0 or 1")

    @property
    def qubits(self) -> tuple[int, ...]:
        return tuple(q for q, _ in self.controls) + self.targets

    @property
    def n_active(self) -> int:
        return len(self.targets) + len(self.controls)

    def matrix(self) -> np.ndarray:
        if self.kind in ROTATION_KINDS:
            return rotation_matrix(self.kind, self.angle)
        return _FIXED_MATS[self.kind]


def rx(q: int, angle: float) -> Gate:
    return Gate("Rx", (q,), angle)


def ry(q: int, angle: float) -> Gate:
    return Gate("Ry", (q,), angle)


def rz(q: int, angle: float) -> Gate:
    return Gate("Rz", (q,), angle)


def h(q: int) -> Gate:
    return Gate("H", (q,))


def cnot(control: int, target: int) -> Gate:
    return Gate("X", (target,), controls=((control, 1),))


def cz(a: int, b: int) -> Gate:
    return Gate("Z", (b,), controls=((a, 1),))


@dataclass(frozen=True)
class Circuit:
    """Ordered gate list; ``global_phase`` is the overall factor e^{i*phase}."""

    n_qubits: int
    gates: tuple[Gate, ...]
    global_phase: float = 0.0

    def __post_init__(self):
        for g in self.gates:
            for q in g.qubits:
                if not 0 <= q < self.n_qubits:
                    raise CircuitError(
                        f"gate {g.kind} touches qubit {q}, circuit has "
                        f"{self.n_qubits}"
                    )

    def used_qubits(self) -> set[int]:
        used: set[int] = set()
        for g in self.gates:
            used.update(g.qubits)
        return used

    def max_gate_width(self) -> int:
        return max((g.n_active for g in self.gates), default=0)


@dataclass(frozen=True)
class AnsatzSpec:
    n_qubits: int
    layers: int

    @property
    def parameter_count(self) -> int:
        return 3 * self.n_qubits * self.layers


def run(circuit: Circuit, psi0: StateVector) -> StateVector:
    if circuit.n_qubits != psi0.n_qubits:
        raise CircuitError("qubit-count mismatch between circuit and state")
    state = psi0
    for g in circuit.gates:
        state = apply_unitary(state, g.matrix(), g.targets, g.controls)
    if circuit.global_phase != 0.0:
        state = StateVector(
            state.n_qubits,
            np.exp(1j * circuit.global_phase) * state.amplitudes,
            normalized=state.normalized,
        )
    return state


def dense_unitary(circuit: Circuit) -> np.ndarray:
    """Full matrix of the circuit, column by column."""
    dim = 2**circuit.n_qubits
    out = np.empty((dim, dim), dtype=complex)
    for col in range(dim):
        amps = np.zeros(dim, dtype=complex)
        amps[col] = 1.0
        out[:, col] = run(circuit, StateVector(circuit.n_qubits, amps)).amplitudes
    return out


def build_hea(spec: AnsatzSpec, theta: np.ndarray) -> Circuit:
    """Hardware-efficient ansatz: per layer Rx-Rz-Rx on every qubit, then
    nearest-neighbor CZ scheduled as even pairs followed by odd pairs."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (spec.parameter_count,):
        raise CircuitError(
            f"expected {spec.parameter_count} parameters, got {theta.shape}"
        )
    n = spec.n_qubits
    gates: list[Gate] = []
    idx = 0
    for _ in range(spec.layers):
        for q in range(n):
            gates.append(rx(q, theta[idx]))
            gates.append(rz(q, theta[idx + 1]))
            gates.append(rx(q, theta[idx + 2]))
            idx += 3
        for start in (0, 1):
            for q in range(start, n - 1, 2):
                gates.append(cz(q, q + 1))
    return Circuit(n, tuple(gates))


def trotter_circuit(h_herm: PauliSum, t: float) -> Circuit:
    """First-order product of per-term exponentials e^{-i c P t}.

    Each term is compiled by basis-change conjugation (H for X, Rx(+pi/2) for
    Y), a CNOT parity ladder, and a central Rz(2 c t).  Identity terms become
    global phase.  Term order follows the canonical PauliSum ordering.
    """
    if not h_herm.is_hermitian():
        raise PauliError("trotter_circuit requires a Hermitian operator")
    n = h_herm.n_qubits
    gates: list[Gate] = []
    phase = 0.0
    for term in h_herm.terms:
        coeff = term.coefficient.real
        active = [(q, letter) for q, letter in enumerate(term.letters) if letter != "I"]
        if not active:
            phase += -coeff * t
            continue
        pre: list[Gate] = []
        post: list[Gate] = []
        for q, letter in active:
            if letter == "X":
                pre.append(h(q))
                post.append(h(q))
            elif letter == "Y":
                pre.append(rx(q, math.pi / 2))
                post.append(rx(q, -math.pi / 2))
        qs = [q for q, _ in active]
        ladder = [cnot(qs[i], qs[i + 1]) for i in range(len(qs) - 1)]
        gates.extend(pre)
        gates.extend(ladder)
        gates.append(rz(qs[-1], 2.0 * coeff * t))
        gates.extend(reversed(ladder))
        gates.extend(post)
    return Circuit(n, tuple(gates), global_phase=phase)


def add_control(circuit: Circuit, ancilla_index: int, polarity: int) -> Circuit:
    """Reference construction: every gate gains the ancilla as a control.

    The circuit's global phase becomes a controlled phase, realized as an
    ancilla Rz plus a residual global phase.
    """
    if ancilla_index in circuit.used_qubits():
        raise CircuitError(f"ancilla {ancilla_index} already used by circuit")
    if polarity not in (0, 1):
        raise CircuitError("polarity must be 0 or 1")
    n = max(circuit.n_qubits, ancilla_index + 1)
    gates = [
        Gate(g.kind, g.targets, g.angle, g.controls + ((ancilla_index, polarity),))
        for g in circuit.gates
    ]
    phase = 0.0
    if circuit.global_phase != 0.0:
        phi = circuit.global_phase
        sign = 1.0 if polarity == 1 else -1.0
        gates.append(rz(ancilla_index, sign * phi))
        phase = phi / 2.0
    return Circuit(n, tuple(gates), global_phase=phase)


# --- plain-text gate-list format ------------------------------------------

_CANONICAL_NAMES = {("X", 1): "CNOT", ("Z", 1): "CZ"}


def format_gate(g: Gate) -> str:
    n_ctrl = len(g.controls)
    if n_ctrl == 0:
        name = g.kind
    else:
        name = _CANONICAL_NAMES.get((g.kind, n_ctrl), "C" * n_ctrl + g.kind)
    fields = [name] + [str(q) for q in g.qubits]
    if g.angle is not None:
        fields.append(f"{g.angle:.17g}")
    if n_ctrl:
        fields.append("".join(str(pol) for _, pol in g.controls))
    return " ".join(fields)


def format_circuit(circuit: Circuit) -> str:
    lines = [f"qubits {circuit.n_qubits}"]
    if circuit.global_phase != 0.0:
        lines.append(f"phase {circuit.global_phase:.17g}")
    lines.extend(format_gate(g) for g in circuit.gates)
    return "\n".join(lines) + "\n"


def parse_gate(line: str) -> Gate:
    parts = line.split()
    name = parts[0]
    if name == "CNOT":
        base, n_ctrl = "X", 1
    elif name == "CZ":
        base, n_ctrl = "Z", 1
    else:
        n_ctrl = 0
        rest = name
        while rest not in ROTATION_KINDS + FIXED_KINDS and rest.startswith("C"):
            rest = rest[1:]
            n_ctrl += 1
        base = rest
    if base not in ROTATION_KINDS + FIXED_KINDS:
        raise CircuitError(f"unknown gate {name!r}")
    rotation = base in ROTATION_KINDS
    n_qubit_fields = n_ctrl + 1
    rest_fields = parts[1:]
    expected = n_qubit_fields + (1 if rotation else 0)
    if len(rest_fields) not in (expected, expected + (1 if n_ctrl else 0)):
        raise CircuitError(f"malformed gate line {line!r}")
    qubits = [int(x) for x in rest_fields[:n_qubit_fields]]
    angle = float(rest_fields[n_qubit_fields]) if rotation else None
    pol_field = rest_fields[expected] if len(rest_fields) > expected else "1" * n_ctrl
    if len(pol_field) != n_ctrl or set(pol_field) - {"0", "1"}:
        raise CircuitError(f"bad polarity field in {line!r}")
    controls = tuple((q, int(p)) for q, p in zip(qubits[:n_ctrl], pol_field))
    return Gate(base, (qubits[-1],), angle, controls)


def parse_circuit(text: str) -> Circuit:
    n_qubits = None
    phase = 0.0
    gates: list[Gate] = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("qubits "):
            n_qubits = int(line.split()[1])
            continue
        if line.startswith("phase "):
            phase = float(line.split()[1])
            continue
        gates.append(parse_gate(line))
    if n_qubits is None:
        n_qubits = 1 + max((max(g.qubits) for g in gates), default=0)
    return Circuit(n_qubits, tuple(gates), global_phase=phase)
