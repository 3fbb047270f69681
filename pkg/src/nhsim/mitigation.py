"""Readout-error model and tensor-product confusion-matrix mitigation.

Each qubit gets a 2x2 column-stochastic confusion matrix C with
C[read | true]; the full-register matrix is the tensor product and its
inverse is applied classically to measured count distributions.  Inversion
can produce negative quasi-probabilities; they are reported, then clipped
and renormalized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MitigationError(ValueError):
    pass


def _check_confusion(mat: np.ndarray) -> np.ndarray:
    mat = np.asarray(mat, dtype=float)
    if mat.shape != (2, 2):
        raise MitigationError(f"confusion matrix must be 2x2, got {mat.shape}")
    if np.any(mat < -1e-12) or np.any(mat > 1.0 + 1e-12):
        raise MitigationError("confusion entries must lie in [0, 1]")
    if np.abs(mat.sum(axis=0) - 1.0).max() > 1e-9:
        raise MitigationError("confusion matrix columns must sum to 1")
    if abs(np.linalg.det(mat)) < 1e-12:
        raise MitigationError(
            "confusion matrix is singular (flip probabilities sum to 1)"
        )
    return mat


@dataclass(frozen=True)
class ReadoutNoiseModel:
    """Per-qubit bit-flip readout channel; matrices[q][read, true]."""

    matrices: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "matrices", tuple(_check_confusion(m) for m in self.matrices)
        )

    @property
    def n_qubits(self) -> int:
        return len(self.matrices)

    @classmethod
    def symmetric(cls, n: int, p: float) -> "ReadoutNoiseModel":
        """Uniform symmetric bit-flip with probability p on every qubit."""
        m = np.array([[1.0 - p, p], [p, 1.0 - p]])
        return cls(tuple(m.copy() for _ in range(n)))

    @classmethod
    def asymmetric(cls, pairs) -> "ReadoutNoiseModel":
        """From (p01, p10) pairs: p01 = P(read 0 | true 1), p10 = P(read 1 | true 0)."""
        mats = []
        for p01, p10 in pairs:
            mats.append(np.array([[1.0 - p10, p01], [p10, 1.0 - p01]]))
        return cls(tuple(mats))


@dataclass(frozen=True)
class CalibrationMatrix:
    """Inverse-ready calibration: per-qubit confusion matrices and inverses."""

    matrices: tuple[np.ndarray, ...]
    inverses: tuple[np.ndarray, ...]

    @property
    def n_qubits(self) -> int:
        return len(self.matrices)


def calibrate(model: ReadoutNoiseModel) -> CalibrationMatrix:
    return CalibrationMatrix(
        matrices=model.matrices,
        inverses=tuple(np.linalg.inv(m) for m in model.matrices),
    )


def _as_prob_vector(counts: dict[str, int] | dict[str, float], n: int) -> np.ndarray:
    vec = np.zeros(2**n)
    total = 0.0
    for bits, c in counts.items():
        if len(bits) != n or set(bits) - {"0", "1"}:
            raise MitigationError(f"bad bit-string key {bits!r} for n={n}")
        if c < 0:
            raise MitigationError("counts must be nonnegative")
        vec[int(bits, 2)] += c
        total += c
    if total <= 0:
        raise MitigationError("empty count distribution")
    return vec / total


def _apply_kron(per_qubit: tuple[np.ndarray, ...], vec: np.ndarray) -> np.ndarray:
    """(M_0 x ... x M_{n-1}) vec without forming the dense Kronecker product."""
    n = len(per_qubit)
    tens = vec.reshape((2,) * n)
    for q, m in enumerate(per_qubit):
        tens = np.moveaxis(np.tensordot(m, tens, axes=([1], [q])), 0, q)
    return tens.reshape(-1)


def apply_readout_noise(probs: np.ndarray, model: ReadoutNoiseModel,
                        shots: int | None = None,
                        rng_seed: int = 0) -> np.ndarray | dict[str, int]:
    """Push ideal outcome probabilities through the readout channel.

    Returns noisy probabilities, or sampled counts when shots is given.
    """
    probs = np.asarray(probs, dtype=float)
    n = model.n_qubits
    if probs.shape != (2**n,):
        raise MitigationError(f"expected {2**n} probabilities")
    noisy = _apply_kron(model.matrices, probs)
    noisy = np.clip(noisy, 0.0, None)
    noisy = noisy / noisy.sum()
    if shots is None:
        return noisy
    rng = np.random.default_rng(rng_seed)
    draws = rng.multinomial(shots, noisy)
    return {
        format(i, f"0{n}b"): int(c) for i, c in enumerate(draws) if c > 0
    }


@dataclass(frozen=True)
class MitigationResult:
    """Corrected distribution plus the raw quasi-probabilities before clipping."""

    probabilities: np.ndarray
    quasi_probabilities: np.ndarray
    negative_mass: float

    def as_counts_fraction(self) -> dict[str, float]:
        n = int(np.log2(len(self.probabilities)))
        return {
            format(i, f"0{n}b"): float(p)
            for i, p in enumerate(self.probabilities)
            if p > 0.0
        }


def mitigate(counts: dict[str, int] | dict[str, float],
             calibration: CalibrationMatrix) -> MitigationResult:
    """Tensor-product inverse correction of a measured distribution."""
    n = calibration.n_qubits
    measured = _as_prob_vector(counts, n)
    quasi = _apply_kron(calibration.inverses, measured)
    negative_mass = float(-quasi[quasi < 0.0].sum()) + 0.0
    clipped = np.clip(quasi, 0.0, None)
    total = clipped.sum()
    if total <= 0:
        raise MitigationError("mitigation clipped away all probability mass")
    return MitigationResult(
        probabilities=clipped / total,
        quasi_probabilities=quasi,
        negative_mass=negative_mass,
    )


def expectation_from_probabilities(probs: np.ndarray, diagonal: np.ndarray) -> float:
    """<O> for a diagonal observable given outcome probabilities."""
    probs = np.asarray(probs, dtype=float)
    diagonal = np.asarray(diagonal, dtype=float)
    if probs.shape != diagonal.shape:
        raise MitigationError("probability/diagonal length mismatch")
    return float(probs @ diagonal)
