"""Hadamard-test overlap circuits: the reference controlled construction and
the rewrite pass that eliminates every gate wider than two qubits.

The rewrite exploits two facts: a 0-controlled and a 1-controlled block
commute, and C0 g . C1 g = g.  Interleaving the two controlled ansatz copies
gate by gate then reduces each parameterized pair to one bare rotation plus
one controlled rotation carrying the angle difference, and each fixed
two-qubit gate to a single uncontrolled copy.  The controlled node unitary is
replaced by the composite C0[T(dt)] . C1[T(2dt)] built from first-order
Trotter blocks, accurate to O(dt^2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuit import (
    AnsatzSpec,
    Circuit,
    CircuitError,
    Gate,
    ROTATION_KINDS,
    add_control,
    build_hea,
    run,
    rz,
    trotter_circuit,
)
from .pauli import PauliSum
from .statevec import StateVector, basis_state, sample_counts

ANGLE_DROP_TOL = 1e-12


class RewriteError(ValueError):
    pass


@dataclass(frozen=True)
class OverlapCircuitPair:
    """Two ancilla-interference circuits measuring Re and Im of the overlap.

    P(ancilla=0) equals (1 + Re X)/2 on ``real_part`` and (1 + Im X)/2 on
    ``imag_part``; the imaginary circuit differs only by an S-dagger right
    after the first ancilla Hadamard.
    """

    real_part: Circuit
    imag_part: Circuit
    ancilla_index: int


def _with_phase_gate(n: int, ancilla: int, body: tuple[Gate, ...],
                     phase: float, imag: bool) -> Circuit:
    gates: list[Gate] = [Gate("H", (ancilla,))]
    if imag:
        gates.append(Gate("Sdg", (ancilla,)))
    gates.extend(body)
    gates.append(Gate("H", (ancilla,)))
    return Circuit(n, tuple(gates), global_phase=phase)


def _assemble_pair(n_system: int, ancilla: int, body: Circuit) -> OverlapCircuitPair:
    n = max(n_system + 1, ancilla + 1)
    return OverlapCircuitPair(
        real_part=_with_phase_gate(n, ancilla, body.gates, body.global_phase, False),
        imag_part=_with_phase_gate(n, ancilla, body.gates, body.global_phase, True),
        ancilla_index=ancilla,
    )


def build_reference_test(theta: np.ndarray, theta_m: np.ndarray,
                         uk_block: Circuit, spec: AnsatzSpec) -> OverlapCircuitPair:
    """Unsimplified construction: 0-controlled U(theta), 1-controlled
    U(theta_m), then the 1-controlled node block, framed by ancilla gates."""
    ancilla = max(spec.n_qubits, uk_block.n_qubits)
    c0 = add_control(build_hea(spec, theta), ancilla, 0)
    c1 = add_control(build_hea(spec, theta_m), ancilla, 1)
    cuk = add_control(uk_block, ancilla, 1)
    body = Circuit(
        ancilla + 1,
        c0.gates + c1.gates + cuk.gates,
        global_phase=c0.global_phase + c1.global_phase + cuk.global_phase,
    )
    return _assemble_pair(spec.n_qubits, ancilla, body)


def merge_controlled_pair(c0_block: Circuit, c1_block: Circuit,
                          ancilla: int) -> Circuit:
    """Circuit equal to C1[c1_block] . C0[c0_block] with no gate on more than
    two qubits.  The blocks must share gate structure: identical kinds,
    targets, and controls, with only rotation angles free to differ."""
    if c0_block.n_qubits != c1_block.n_qubits:
        raise RewriteError("blocks act on different registers")
    if len(c0_block.gates) != len(c1_block.gates):
        raise RewriteError("blocks have different gate counts")
    if ancilla in c0_block.used_qubits():
        raise CircuitError(f"ancilla {ancilla} already used by block")
    n = max(c0_block.n_qubits, ancilla + 1)
    gates: list[Gate] = []
    for g0, g1 in zip(c0_block.gates, c1_block.gates):
        if (g0.kind, g0.targets, g0.controls) != (g1.kind, g1.targets, g1.controls):
            raise RewriteError(
                f"structural mismatch: {g0.kind}{g0.qubits} vs {g1.kind}{g1.qubits}"
            )
        if g0.kind in ROTATION_KINDS:
            if g0.controls:
                raise RewriteError("controlled rotations in input blocks "
                                   "would need a second control")
            gates.append(g0)
            diff = g1.angle - g0.angle
            if abs(diff) > ANGLE_DROP_TOL:
                gates.append(Gate(g0.kind, g0.targets, diff,
                                  controls=((ancilla, 1),)))
        else:
            if g0.angle != g1.angle:
                raise RewriteError("fixed gates must match exactly")
            gates.append(g0)
    phase = 0.0
    phi0, phi1 = c0_block.global_phase, c1_block.global_phase
    if phi0 != 0.0 or phi1 != 0.0:
        # diag(e^{i phi0}, e^{i phi1}) on the ancilla
        if abs(phi1 - phi0) > ANGLE_DROP_TOL:
            gates.append(rz(ancilla, phi1 - phi0))
        phase = (phi0 + phi1) / 2.0
    return Circuit(n, tuple(gates), global_phase=phase)


def simplify_pair_pass(u_theta: Circuit, u_theta_m: Circuit,
                       ancilla: int) -> Circuit:
    """Rewrite of the interleaved C1 U(theta_m) . C0 U(theta) product."""
    return merge_controlled_pair(u_theta, u_theta_m, ancilla)


def simplify_uk_pass(generator: PauliSum, dt: float, ancilla: int) -> Circuit:
    """Trotterized replacement of the 1-controlled node unitary.

    Emits the composite C0[Trotter(G, dt)] . C1[Trotter(G, 2 dt)] for the
    Hermitian node generator G; the measured overlap matches the exact one up
    to O(dt^2).
    """
    t1 = trotter_circuit(generator, dt)
    t2 = trotter_circuit(generator, 2.0 * dt)
    return merge_controlled_pair(t1, t2, ancilla)


def build_simplified_test(theta: np.ndarray, theta_m: np.ndarray,
                          spec: AnsatzSpec, generator: PauliSum,
                          dt: float) -> OverlapCircuitPair:
    """Fully rewritten overlap test: ansatz pair plus Trotterized node block,
    containing no gate on three or more qubits."""
    ancilla = spec.n_qubits
    pair_part = simplify_pair_pass(
        build_hea(spec, theta), build_hea(spec, theta_m), ancilla
    )
    uk_part = simplify_uk_pass(generator, dt, ancilla)
    body = Circuit(
        ancilla + 1,
        pair_part.gates + uk_part.gates,
        global_phase=pair_part.global_phase + uk_part.global_phase,
    )
    return _assemble_pair(spec.n_qubits, ancilla, body)


def ancilla_p0(circuit: Circuit, ancilla: int,
               psi0: StateVector | None = None) -> float:
    """Exact probability of reading 0 on the ancilla after the circuit."""
    if psi0 is None:
        psi0 = basis_state(circuit.n_qubits, "0" * circuit.n_qubits)
    final = run(circuit, psi0)
    tens = np.abs(final.amplitudes.reshape((2,) * circuit.n_qubits)) ** 2
    probs = np.moveaxis(tens, ancilla, 0)
    return float(probs[0].sum())


def sampled_p0(circuit: Circuit, ancilla: int, shots: int,
               rng_seed: int) -> float:
    """Shot-sampled estimate of the ancilla-0 probability."""
    psi0 = basis_state(circuit.n_qubits, "0" * circuit.n_qubits)
    final = run(circuit, psi0)
    counts = sample_counts(final, shots, rng_seed)
    hits = sum(c for bits, c in counts.items() if bits[ancilla] == "0")
    return hits / shots


def overlap_from_probabilities(p0_real: float, p0_imag: float) -> complex:
    for name, p in (("p0_real", p0_real), ("p0_imag", p0_imag)):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"{name} = {p} outside [0, 1]")
    return complex(2.0 * p0_real - 1.0, 2.0 * p0_imag - 1.0)


def measure_overlap(pair: OverlapCircuitPair, shots: int | None = None,
                    rng_seed: int = 0) -> complex:
    """X from the circuit pair; exact probabilities unless shots are given."""
    if shots is None:
        p_re = ancilla_p0(pair.real_part, pair.ancilla_index)
        p_im = ancilla_p0(pair.imag_part, pair.ancilla_index)
    else:
        p_re = sampled_p0(pair.real_part, pair.ancilla_index, shots, rng_seed)
        p_im = sampled_p0(pair.imag_part, pair.ancilla_index, shots, rng_seed + 1)
    return overlap_from_probabilities(p_re, p_im)
