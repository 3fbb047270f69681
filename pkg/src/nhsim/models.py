"""Model zoo: dissipative Ising chain, interacting Hatano-Nelson chain
(Jordan-Wigner mapped), and the single-qubit non-Hermitian SSH model."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .pauli import PauliSum
from .statevec import StateVector, basis_state


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class IsingSpec:
    n: int = 6
    j: float = 1.0
    g_r: float = 2.0
    g_i: float = 0.0

    def __post_init__(self):
        if self.n < 2:
            raise ModelError("Ising chain needs n >= 2")


@dataclass(frozen=True)
class HatanoNelsonSpec:
    n: int = 10
    g: float = 1.0
    u: float = 1.0
    dual: bool = False

    def __post_init__(self):
        if self.n < 2:
            raise ModelError("Hatano-Nelson chain needs n >= 2")

    @property
    def t_r(self) -> float:
        return math.exp(-self.g) if self.dual else math.exp(self.g)

    @property
    def t_l(self) -> float:
        return math.exp(self.g) if self.dual else math.exp(-self.g)


@dataclass(frozen=True)
class SshSpec:
    v: float = 0.3
    r: float = 1.0
    gamma: float = 3.5
    k_bloch: float = 0.3 * math.pi

    @property
    def h_x(self) -> float:
        return self.v + self.r * math.cos(self.k_bloch)

    @property
    def h_z(self) -> float:
        return self.r * math.sin(self.k_bloch)


@dataclass(frozen=True)
class ObservableSpec:
    """Named observable; ``operator`` is None for the Loschmidt echo, which is
    a squared overlap with the reference state rather than a Pauli expectation."""

    name: str
    operator: PauliSum | None


def _word(n: int, placed: dict[int, str]) -> str:
    return "".join(placed.get(q, "I") for q in range(n))


def ising_hamiltonian(spec: IsingSpec) -> PauliSum:
    """H = -J sum Z_i Z_{i+1} - (g_r + i g_i) sum X_i, open boundary."""
    n = spec.n
    terms = []
    for i in range(n - 1):
        terms.append((-spec.j, _word(n, {i: "Z", i + 1: "Z"})))
    g = complex(spec.g_r, spec.g_i)
    for i in range(n):
        terms.append((-g, _word(n, {i: "X"})))
    return PauliSum.from_terms(n, terms)


def hn_hamiltonian(spec: HatanoNelsonSpec) -> PauliSum:
    """Jordan-Wigner image of the interacting Hatano-Nelson chain.

    Occupation convention: qubit |1> = occupied, n_j = (I - Z_j)/2.  For
    nearest-neighbor bonds the JW strings cancel, leaving

        t_R c†_{j+1} c_j + t_L c†_j c_{j+1}
            -> (t_R + t_L)/4 (X_j X_{j+1} + Y_j Y_{j+1})
               + i (t_L - t_R)/4 (X_j Y_{j+1} - Y_j X_{j+1})

    verified against the brute-force fermionic Fock-space matrix in the tests.
    """
    n = spec.n
    t_r, t_l, u = spec.t_r, spec.t_l, spec.u
    sym = (t_r + t_l) / 4.0
    anti = 1j * (t_l - t_r) / 4.0
    # dual run: interaction U (1-n_j)(1-n_{j+1}) from the particle-hole
    # transform; flips the sign of the single-Z terms.
    zsign = 1.0 if spec.dual else -1.0
    terms: list[tuple[complex, str]] = []
    for j in range(n - 1):
        terms.append((sym, _word(n, {j: "X", j + 1: "X"})))
        terms.append((sym, _word(n, {j: "Y", j + 1: "Y"})))
        terms.append((anti, _word(n, {j: "X", j + 1: "Y"})))
        terms.append((-anti, _word(n, {j: "Y", j + 1: "X"})))
        terms.append((u / 4.0, _word(n, {})))
        terms.append((zsign * u / 4.0, _word(n, {j: "Z"})))
        terms.append((zsign * u / 4.0, _word(n, {j + 1: "Z"})))
        terms.append((u / 4.0, _word(n, {j: "Z", j + 1: "Z"})))
    return PauliSum.from_terms(n, terms)


def hn_initial_state(spec: HatanoNelsonSpec) -> StateVector:
    """Centered filling: two occupied sites (particle run) or their complement
    (dual run); reproduces |0000110000> / |1111001111> at n = 10."""
    n = spec.n
    lo = n // 2 - 1
    bits = "".join("1" if q in (lo, lo + 1) else "0" for q in range(n))
    if spec.dual:
        bits = "".join("0" if b == "1" else "1" for b in bits)
    return basis_state(n, bits)


def ssh_hamiltonian(spec: SshSpec) -> PauliSum:
    """Single-qubit H = gamma [h_x X + (h_z + i/2) Z]."""
    return PauliSum.from_terms(
        1,
        [
            (spec.gamma * spec.h_x, "X"),
            (spec.gamma * complex(spec.h_z, 0.5), "Z"),
        ],
    )


def number_operator(n: int) -> PauliSum:
    """Total particle number N = sum_j (I - Z_j)/2."""
    terms: list[tuple[complex, str]] = [(n / 2.0, "I" * n)]
    for j in range(n):
        terms.append((-0.5, _word(n, {j: "Z"})))
    return PauliSum.from_terms(n, terms)


def site_occupation(n: int, j: int) -> PauliSum:
    return PauliSum.from_terms(n, [(0.5, "I" * n), (-0.5, _word(n, {j: "Z"}))])


def spin_polarization(n: int) -> PauliSum:
    """S_z = (1/n) sum_j Z_j."""
    return PauliSum.from_terms(n, [(1.0 / n, _word(n, {j: "Z"})) for j in range(n)])


def observables_for(model: str, n: int) -> list[ObservableSpec]:
    if model == "ising":
        return [ObservableSpec("S_z", spin_polarization(n))]
    if model in ("hatano-nelson", "hatano-nelson-dual"):
        obs = [ObservableSpec(f"n_{j}", site_occupation(n, j)) for j in range(n)]
        obs.append(ObservableSpec("N", number_operator(n)))
        return obs
    if model == "ssh":
        return [ObservableSpec("P_0", None)]
    raise ModelError(f"unknown model {model!r}")


def fock_matrix(n: int, t_r: float, t_l: float, u: float,
                hole_interaction: bool = False) -> np.ndarray:
    """Brute-force fermionic oracle built from creation/annihilation matrices
    in the same qubit ordering (site 0 = most significant bit)."""
    lower = np.array([[0, 1], [0, 0]], dtype=complex)  # |1> -> |0>
    z = np.diag([1.0, -1.0]).astype(complex)
    eye = np.eye(2, dtype=complex)

    def annihilate(j: int) -> np.ndarray:
        m = np.array([[1.0]], dtype=complex)
        for q in range(n):
            if q < j:
                m = np.kron(m, z)
            elif q == j:
                m = np.kron(m, lower)
            else:
                m = np.kron(m, eye)
        return m

    c = [annihilate(j) for j in range(n)]
    dim = 2**n
    ham = np.zeros((dim, dim), dtype=complex)
    for j in range(n - 1):
        ham += t_r * c[j + 1].conj().T @ c[j]
        ham += t_l * c[j].conj().T @ c[j + 1]
        nj = c[j].conj().T @ c[j]
        nj1 = c[j + 1].conj().T @ c[j + 1]
        if hole_interaction:
            eye = np.eye(dim, dtype=complex)
            ham += u * (eye - nj) @ (eye - nj1)
        else:
            ham += u * nj @ nj1
    return ham


MODEL_NAMES = ("ising", "hatano-nelson", "hatano-nelson-dual", "ssh")


def build_model(name: str, params: dict):
    """Registry entry point: returns (hamiltonian, initial_state, observables)."""
    if name == "ising":
        spec = IsingSpec(
            n=int(params.get("n", 6)),
            j=float(params.get("J", params.get("j", 1.0))),
            g_r=float(params.get("g_r", 2.0)),
            g_i=float(params.get("g_i", 0.0)),
        )
        ham = ising_hamiltonian(spec)
        psi0 = basis_state(spec.n, "0" * spec.n)
        return ham, psi0, observables_for("ising", spec.n)
    if name in ("hatano-nelson", "hatano-nelson-dual"):
        spec = HatanoNelsonSpec(
            n=int(params.get("n", 10)),
            g=float(params.get("g", 1.0)),
            u=float(params.get("U", params.get("u", 1.0))),
            dual=(name == "hatano-nelson-dual") or bool(params.get("dual", False)),
        )
        ham = hn_hamiltonian(spec)
        psi0 = hn_initial_state(spec)
        return ham, psi0, observables_for(name, spec.n)
    if name == "ssh":
        spec = SshSpec(
            v=float(params.get("v", 0.3)),
            r=float(params.get("r", 1.0)),
            gamma=float(params.get("gamma", 3.5)),
            k_bloch=float(params.get("k", 0.3 * math.pi)),
        )
        ham = ssh_hamiltonian(spec)
        psi0 = basis_state(1, "0")
        return ham, psi0, observables_for("ssh", 1)
    raise ModelError(f"unknown model {name!r}")
