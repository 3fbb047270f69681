"""Dense statevector simulator and the exact evolution oracle.

Amplitudes are indexed with qubit 0 as the most significant bit, matching the
Pauli-letter ordering in :mod:`nhsim.pauli`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .pauli import PauliSum, PauliError, to_dense, DENSE_CAP


class StateError(ValueError):
    pass


@dataclass(frozen=True)
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (2**self.n_qubits,):
            raise StateError(
                f"expected {2**self.n_qubits} amplitudes, got {amps.shape}"
            )
        object.__setattr__(self, "amplitudes", amps)
        if self.normalized:
            norm = np.linalg.norm(amps)
            if abs(norm - 1.0) > 1e-10:
                raise StateError(f"state labeled normalized has norm {norm}")

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.n_qubits)


@dataclass(frozen=True)
class EvolutionResult:
    """Normalized evolved state plus ln of the discarded norm factor."""

    state: StateVector
    log_norm: float


def basis_state(n: int, bits: str) -> StateVector:
    if len(bits) != n:
        raise StateError(f"bit-string length {len(bits)} != {n}")
    if set(bits) - {"0", "1"}:
        raise StateError(f"invalid bit-string {bits!r}")
    amps = np.zeros(2**n, dtype=complex)
    amps[int(bits, 2)] = 1.0
    return StateVector(n, amps)


def _apply_unitary(amps: np.ndarray, n: int, u: np.ndarray, targets: tuple[int, ...]) -> np.ndarray:
    """Apply a k-qubit unitary to the given target axes of the amplitude tensor."""
    k = len(targets)
    tens = amps.reshape((2,) * n)
    tens = np.moveaxis(tens, targets, range(k))
    tens = (u.reshape((2,) * (2 * k)).reshape(2**k, 2**k) @ tens.reshape(2**k, -1)).reshape(
        (2,) * n
    )
    return np.moveaxis(tens, range(k), targets).reshape(-1)


def apply_unitary(state: StateVector, u: np.ndarray, targets: tuple[int, ...],
                  controls: tuple[tuple[int, int], ...] = ()) -> StateVector:
    """Apply a (possibly controlled) unitary on target qubits.

    ``controls`` is a tuple of (qubit, polarity) pairs; the unitary acts only
    on the subspace where every control qubit matches its polarity.
    """
    n = state.n_qubits
    for q in targets + tuple(c for c, _ in controls):
        if not 0 <= q < n:
            raise StateError(f"qubit index {q} out of range for n={n}")
    active = set(targets) | {c for c, _ in controls}
    if len(active) != len(targets) + len(controls):
        raise StateError("control and target indices must be disjoint")
    if not controls:
        new = _apply_unitary(state.amplitudes, n, u, targets)
    else:
        tens = state.amplitudes.reshape((2,) * n).copy()
        sel: list = [slice(None)] * n
        for q, pol in controls:
            sel[q] = pol
        block = tens[tuple(sel)]
        rem_n = n - len(controls)
        # target positions inside the control-sliced tensor
        ctrl_qs = sorted(q for q, _ in controls)
        remap = {}
        shift = 0
        for ax in range(n):
            if ax in ctrl_qs:
                shift += 1
            else:
                remap[ax] = ax - shift
        sub_targets = tuple(remap[t] for t in targets)
        tens[tuple(sel)] = _apply_unitary(
            block.reshape(-1), rem_n, u, sub_targets
        ).reshape(block.shape)
        new = tens.reshape(-1)
    return StateVector(n, new, normalized=state.normalized)


def inner_product(a: StateVector, b: StateVector) -> complex:
    if a.n_qubits != b.n_qubits:
        raise StateError("qubit-count mismatch")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def apply_pauli_sum(state: StateVector, op: PauliSum) -> np.ndarray:
    """Raw amplitudes of op|state> computed term by term (no dense matrix)."""
    if op.n_qubits != state.n_qubits:
        raise StateError("qubit-count mismatch")
    n = state.n_qubits
    out = np.zeros_like(state.amplitudes)
    for term in op.terms:
        tens = state.amplitudes.reshape((2,) * n)
        for q, letter in enumerate(term.letters):
            if letter == "I":
                continue
            tens = np.moveaxis(tens, q, 0)
            if letter == "X":
                tens = tens[::-1]
            elif letter == "Y":
                tens = np.stack([-1j * tens[1], 1j * tens[0]])
            else:  # Z
                tens = np.stack([tens[0], -tens[1]])
            tens = np.moveaxis(tens, 0, q)
        out += term.coefficient * tens.reshape(-1)
    return out


def expectation(state: StateVector, obs: PauliSum) -> float:
    if not obs.is_hermitian():
        raise PauliError("expectation requires a Hermitian observable")
    val = complex(np.vdot(state.amplitudes, apply_pauli_sum(state, obs)))
    if abs(val.imag) > 1e-10:
        raise StateError(f"expectation has imaginary residue {val.imag}")
    return val.real


def exact_evolve(h: PauliSum, t: float, psi0: StateVector,
                 cap: int = DENSE_CAP) -> EvolutionResult:
    """e^{-iHt}|psi0> by dense matrix exponential, normalized with log-norm."""
    if h.n_qubits != psi0.n_qubits:
        raise StateError("qubit-count mismatch")
    mat = to_dense(h, cap=cap)
    raw = scipy.linalg.expm(-1j * t * mat) @ psi0.amplitudes
    norm = np.linalg.norm(raw)
    if norm == 0.0:
        raise StateError("evolution annihilated the state")
    return EvolutionResult(
        state=StateVector(psi0.n_qubits, raw / norm),
        log_norm=float(np.log(norm)),
    )


class ExactPropagator:
    """Eigendecomposition-cached e^{-iHt} for evaluating many time points.

    Falls back to per-call expm when H is too ill-conditioned to diagonalize.
    """

    def __init__(self, h: PauliSum, cap: int = DENSE_CAP):
        self.h = h
        self.n = h.n_qubits
        mat = to_dense(h, cap=cap)
        self._mat = mat
        try:
            if np.abs(mat - mat.conj().T).max() < 1e-12:
                evals, evecs = np.linalg.eigh(mat)
                self._evals = evals.astype(complex)
                self._evecs = evecs
                self._evecs_inv = evecs.conj().T
            else:
                evals, evecs = np.linalg.eig(mat)
                if np.linalg.cond(evecs) > 1e8:
                    raise np.linalg.LinAlgError("ill-conditioned eigenbasis")
                self._evals = evals
                self._evecs = evecs
                self._evecs_inv = np.linalg.inv(evecs)
        except np.linalg.LinAlgError:
            self._evals = None

    def evolve(self, t: float, psi0: StateVector) -> EvolutionResult:
        if self._evals is None:
            return exact_evolve(self.h, t, psi0)
        coeffs = self._evecs_inv @ psi0.amplitudes
        raw = self._evecs @ (np.exp(-1j * t * self._evals) * coeffs)
        norm = np.linalg.norm(raw)
        return EvolutionResult(
            state=StateVector(self.n, raw / norm),
            log_norm=float(np.log(norm)),
        )


def sample_counts(state: StateVector, shots: int, rng_seed: int) -> dict[str, int]:
    """Multinomial shot sampling of |amplitudes|^2; deterministic per seed."""
    if shots <= 0:
        raise StateError("shots must be positive")
    probs = np.abs(state.amplitudes) ** 2
    probs = probs / probs.sum()
    rng = np.random.default_rng(rng_seed)
    draws = rng.multinomial(shots, probs)
    n = state.n_qubits
    return {
        format(idx, f"0{n}b"): int(c) for idx, c in enumerate(draws) if c > 0
    }
