import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nhsim.pauli import (
    PauliError,
    PauliSum,
    PauliTerm,
    adjoint,
    format_operator,
    hermitian_split,
    parse_operator,
    shift_bound,
    to_dense,
)

words = st.text(alphabet="IXYZ", min_size=3, max_size=3)
coeffs = st.complex_numbers(
    min_magnitude=0.0, max_magnitude=5.0, allow_nan=False, allow_infinity=False
)
pauli_sums = st.lists(st.tuples(coeffs, words), min_size=1, max_size=6).map(
    lambda ts: PauliSum.from_terms(3, ts)
)


def dense_oracle(op: PauliSum) -> np.ndarray:
    mats = {
        "I": np.eye(2),
        "X": np.array([[0, 1], [1, 0]]),
        "Y": np.array([[0, -1j], [1j, 0]]),
        "Z": np.diag([1, -1]),
    }
    dim = 2**op.n_qubits
    out = np.zeros((dim, dim), dtype=complex)
    for t in op.terms:
        m = np.array([[1.0]], dtype=complex)
        for letter in t.letters:
            m = np.kron(m, mats[letter])
        out += t.coefficient * m
    return out


class TestConstruction:
    def test_merges_duplicate_words(self):
        s = PauliSum.from_terms(2, [(1.0, "XZ"), (0.5, "XZ")])
        assert len(s.terms) == 1
        assert s.coefficient("XZ") == 1.5

    def test_drops_small_coefficients(self):
        s = PauliSum.from_terms(2, [(1.0, "XZ"), (-1.0, "XZ")])
        assert s.terms == ()

    def test_rejects_bad_letters(self):
        with pytest.raises(PauliError):
            PauliTerm(1.0, "XQ")

    def test_rejects_length_mismatch(self):
        with pytest.raises(PauliError):
            PauliSum.from_terms(3, [(1.0, "XZ")])

    def test_terms_sorted_canonically(self):
        s = PauliSum.from_terms(2, [(1.0, "ZZ"), (2.0, "IX")])
        assert [t.letters for t in s.terms] == ["IX", "ZZ"]


class TestAlgebra:
    @given(pauli_sums, pauli_sums)
    @settings(max_examples=50, deadline=None)
    def test_addition_matches_dense(self, a, b):
        np.testing.assert_allclose(
            dense_oracle(a + b), dense_oracle(a) + dense_oracle(b), atol=1e-9
        )

    @given(pauli_sums, coeffs)
    @settings(max_examples=50, deadline=None)
    def test_scalar_multiplication_matches_dense(self, a, c):
        np.testing.assert_allclose(
            dense_oracle(c * a), c * dense_oracle(a), atol=1e-9
        )

    @given(pauli_sums)
    @settings(max_examples=50, deadline=None)
    def test_adjoint_matches_dense(self, a):
        np.testing.assert_allclose(
            dense_oracle(adjoint(a)), dense_oracle(a).conj().T, atol=1e-9
        )

    def test_qubit_count_mismatch_rejected(self):
        a = PauliSum.from_terms(2, [(1.0, "XX")])
        b = PauliSum.from_terms(3, [(1.0, "XXX")])
        with pytest.raises(PauliError):
            a + b


class TestHermitianSplit:
    @given(pauli_sums)
    @settings(max_examples=50, deadline=None)
    def test_reconstruction_exact(self, h):
        split = hermitian_split(h)
        recon = dense_oracle(split.h0) + 1j * dense_oracle(split.v)
        np.testing.assert_allclose(recon, dense_oracle(h), atol=1e-12)

    @given(pauli_sums)
    @settings(max_examples=50, deadline=None)
    def test_parts_hermitian(self, h):
        split = hermitian_split(h)
        assert split.h0.is_hermitian()
        assert split.v.is_hermitian()

    def test_hermitian_input_gives_zero_v(self):
        h = PauliSum.from_terms(2, [(1.0, "XX"), (0.5, "ZI")])
        split = hermitian_split(h)
        assert split.v.terms == ()
        assert split.shift == 0.0

    def test_ising_shift_values(self):
        # H = -J sum ZZ - (2 + i g_i) sum X on 6 qubits: x = 6 g_i
        from nhsim.models import IsingSpec, ising_hamiltonian

        for g_i, expected in ((1.0, 6.0), (2.0, 12.0)):
            h = ising_hamiltonian(IsingSpec(n=6, g_i=g_i))
            assert hermitian_split(h).shift == pytest.approx(expected)

    def test_single_qubit_gain_loss_split(self):
        # H = a X + (b + i/2) Z: V = Z/2, x = 1/2
        h = PauliSum.from_terms(1, [(1.2, "X"), (complex(0.7, 0.5), "Z")])
        split = hermitian_split(h)
        assert split.v.coefficient("Z") == pytest.approx(0.5)
        assert split.shift == pytest.approx(0.5)


class TestShiftBound:
    @given(st.lists(st.tuples(st.floats(-3, 3), words), min_size=1, max_size=6))
    @settings(max_examples=100, deadline=None)
    def test_dominates_max_eigenvalue(self, terms):
        v = PauliSum.from_terms(3, terms)
        x = shift_bound(v)
        evals = np.linalg.eigvalsh(dense_oracle(v))
        assert x >= evals.max() - 1e-9
        assert x >= 0.0

    def test_identity_enters_with_sign(self):
        v = PauliSum.from_terms(1, [(-2.0, "I"), (1.0, "Z")])
        assert shift_bound(v) == 0.0  # -2 + 1 clamped at zero
        v2 = PauliSum.from_terms(1, [(2.0, "I"), (1.0, "Z")])
        assert shift_bound(v2) == 3.0

    def test_rejects_non_hermitian(self):
        with pytest.raises(PauliError):
            shift_bound(PauliSum.from_terms(1, [(1j, "Z")]))


class TestDense:
    def test_single_letters(self):
        np.testing.assert_allclose(
            to_dense(PauliSum.from_terms(1, [(1.0, "Y")])),
            np.array([[0, -1j], [1j, 0]]),
        )

    def test_qubit0_most_significant(self):
        # Z on qubit 0 of two: diag(1, 1, -1, -1)
        zi = to_dense(PauliSum.from_terms(2, [(1.0, "ZI")]))
        np.testing.assert_allclose(np.diag(zi), [1, 1, -1, -1])

    def test_cap_enforced(self):
        big = PauliSum.from_terms(13, [(1.0, "I" * 13)])
        with pytest.raises(PauliError):
            to_dense(big)


class TestTextFormat:
    def test_parse_example_line(self):
        op = parse_operator("-1.0 0.0 ZZIIII\n")
        assert op.n_qubits == 6
        assert op.coefficient("ZZIIII") == -1.0

    def test_comments_and_blanks_ignored(self):
        op = parse_operator("# header\n\n1.0 0.5 XY  # trailing\n")
        assert op.coefficient("XY") == complex(1.0, 0.5)

    def test_empty_rejected(self):
        with pytest.raises(PauliError):
            parse_operator("# nothing\n")

    @given(pauli_sums)
    @settings(max_examples=50, deadline=None)
    def test_round_trip(self, op):
        if not op.terms:
            return
        again = parse_operator(format_operator(op))
        assert again == PauliSum(op.n_qubits, op.terms)
