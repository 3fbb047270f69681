"""Pauli-string operator algebra.

Operators are stored as complex-weighted words over {I, X, Y, Z}.  Qubit 0 is
the leftmost letter and the most significant bit of basis-state indices; every
module in this package shares that convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DROP_TOL = 1e-12
DENSE_CAP = 12

_LETTERS = "IXYZ"

_MATS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class PauliError(ValueError):
    pass


@dataclass(frozen=True)
class PauliTerm:
    """One Pauli word with a complex coefficient."""

    coefficient: complex
    letters: str

    def __post_init__(self):
        if not np.isfinite(self.coefficient):
            raise PauliError(f"non-finite coefficient {self.coefficient!r}")
        bad = set(self.letters) - set(_LETTERS)
        if bad:
            raise PauliError(f"invalid Pauli letters {sorted(bad)}")


@dataclass(frozen=True)
class PauliSum:
    """Canonicalized sum of Pauli terms on a fixed qubit register.

    Terms with matching words are merged on construction; coefficients below
    ``drop_tol`` in magnitude are removed.  Instances are immutable.
    """

    n_qubits: int
    terms: tuple[PauliTerm, ...]
    drop_tol: float = field(default=DROP_TOL, compare=False)

    def __post_init__(self):
        if self.n_qubits < 1:
            raise PauliError("n_qubits must be positive")
        merged: dict[str, complex] = {}
        for t in self.terms:
            if len(t.letters) != self.n_qubits:
                raise PauliError(
                    f"term {t.letters!r} has length {len(t.letters)}, "
                    f"expected {self.n_qubits}"
                )
            merged[t.letters] = merged.get(t.letters, 0.0) + complex(t.coefficient)
        kept = tuple(
            PauliTerm(c, w)
            for w, c in sorted(merged.items())
            if abs(c) > self.drop_tol
        )
        object.__setattr__(self, "terms", kept)

    @classmethod
    def from_terms(cls, n_qubits: int, terms, drop_tol: float = DROP_TOL) -> "PauliSum":
        return cls(n_qubits, tuple(PauliTerm(complex(c), w) for c, w in terms), drop_tol)

    @classmethod
    def zero(cls, n_qubits: int) -> "PauliSum":
        return cls(n_qubits, ())

    def coefficient(self, letters: str) -> complex:
        for t in self.terms:
            if t.letters == letters:
                return t.coefficient
        return 0.0

    def __add__(self, other: "PauliSum") -> "PauliSum":
        if other.n_qubits != self.n_qubits:
            raise PauliError("qubit-count mismatch")
        return PauliSum(self.n_qubits, self.terms + other.terms, self.drop_tol)

    def __mul__(self, scalar: complex) -> "PauliSum":
        return PauliSum(
            self.n_qubits,
            tuple(PauliTerm(scalar * t.coefficient, t.letters) for t in self.terms),
            self.drop_tol,
        )

    __rmul__ = __mul__

    def __sub__(self, other: "PauliSum") -> "PauliSum":
        return self + (-1.0) * other

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        """Hermitian iff every coefficient is real (Pauli words are Hermitian)."""
        return all(abs(t.coefficient.imag) <= tol for t in self.terms)


@dataclass(frozen=True)
class SplitHamiltonian:
    """Decomposition H = H0 + iV with Hermitian H0, V and shift bound x."""

    h0: PauliSum
    v: PauliSum
    shift: float


def adjoint(h: PauliSum) -> PauliSum:
    """Conjugate transpose; Pauli words are Hermitian so only coefficients flip."""
    return PauliSum(
        h.n_qubits,
        tuple(PauliTerm(t.coefficient.conjugate(), t.letters) for t in h.terms),
        h.drop_tol,
    )


def shift_bound(v: PauliSum) -> float:
    """Bound x with v - x*I negative semidefinite: sum of |coefficients|.

    The pure-identity term commutes exactly, so it enters with its sign
    instead of its magnitude.  Clamped at zero so the bound is never negative.
    """
    if not v.is_hermitian():
        raise PauliError("shift_bound requires a Hermitian operator")
    identity = "I" * v.n_qubits
    total = 0.0
    for t in v.terms:
        if t.letters == identity:
            total += t.coefficient.real
        else:
            total += abs(t.coefficient)
    return max(0.0, total)


def hermitian_split(h: PauliSum) -> SplitHamiltonian:
    """Split h = H0 + iV with H0 = (h + h†)/2 and V = (h - h†)/2i."""
    h_dag = adjoint(h)
    h0 = 0.5 * (h + h_dag)
    v = (-0.5j) * (h - h_dag)
    return SplitHamiltonian(h0=h0, v=v, shift=shift_bound(v))


def to_dense(h: PauliSum, cap: int = DENSE_CAP) -> np.ndarray:
    """Dense 2^n x 2^n matrix of the operator (qubit 0 = leftmost factor)."""
    if h.n_qubits > cap:
        raise PauliError(f"dense realization capped at {cap} qubits")
    dim = 2**h.n_qubits
    out = np.zeros((dim, dim), dtype=complex)
    for t in h.terms:
        m = np.array([[1.0]], dtype=complex)
        for letter in t.letters:
            m = np.kron(m, _MATS[letter])
        out += t.coefficient * m
    return out


def parse_operator(text: str, n_qubits: int | None = None) -> PauliSum:
    """Parse the plain-text operator format: one `<re> <im> <letters>` per line."""
    terms = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise PauliError(f"line {lineno}: expected '<re> <im> <letters>'")
        re_s, im_s, letters = parts
        try:
            coeff = complex(float(re_s), float(im_s))
        except ValueError as exc:
            raise PauliError(f"line {lineno}: bad coefficient") from exc
        terms.append((coeff, letters.upper()))
    if not terms:
        raise PauliError("empty operator file")
    n = n_qubits if n_qubits is not None else len(terms[0][1])
    return PauliSum.from_terms(n, terms)


def format_operator(h: PauliSum) -> str:
    lines = [
        f"{t.coefficient.real:.17g} {t.coefficient.imag:.17g} {t.letters}"
        for t in h.terms
    ]
    return "\n".join(lines) + "\n"
