import math

import numpy as np
import pytest

from nhsim.circuit import (
    AnsatzSpec,
    Circuit,
    add_control,
    build_hea,
    dense_unitary,
    h,
    run,
    rx,
    rz,
    trotter_circuit,
)
from nhsim.hadamard import (
    RewriteError,
    ancilla_p0,
    build_reference_test,
    build_simplified_test,
    measure_overlap,
    merge_controlled_pair,
    overlap_from_probabilities,
    sampled_p0,
    simplify_uk_pass,
)
from nhsim.pauli import PauliSum, to_dense
from nhsim.statevec import basis_state, inner_product


def random_theta(spec, seed):
    rng = np.random.default_rng(seed)
    return rng.uniform(-math.pi, math.pi, spec.parameter_count)


def hea_state(spec, theta):
    return run(build_hea(spec, theta), basis_state(spec.n_qubits, "0" * spec.n_qubits))


class TestOverlapFromProbabilities:
    def test_formula(self):
        assert overlap_from_probabilities(1.0, 0.5) == 1.0 + 0.0j
        assert overlap_from_probabilities(0.5, 1.0) == 0.0 + 1.0j
        assert overlap_from_probabilities(0.0, 0.5) == -1.0 + 0.0j

    def test_range_validation(self):
        with pytest.raises(ValueError):
            overlap_from_probabilities(1.2, 0.5)


class TestReferenceTest:
    def test_measures_ansatz_overlap(self):
        spec = AnsatzSpec(2, 2)
        theta, theta_m = random_theta(spec, 0), random_theta(spec, 1)
        empty_uk = Circuit(2, ())
        pair = build_reference_test(theta, theta_m, empty_uk, spec)
        x = measure_overlap(pair)
        expected = inner_product(hea_state(spec, theta), hea_state(spec, theta_m))
        assert abs(x - expected) < 1e-12

    def test_with_uk_block(self):
        spec = AnsatzSpec(2, 2)
        theta, theta_m = random_theta(spec, 2), random_theta(spec, 3)
        gen = PauliSum.from_terms(2, [(0.6, "XZ"), (-0.4, "YI")])
        uk = trotter_circuit(gen, 0.3)
        pair = build_reference_test(theta, theta_m, uk, spec)
        x = measure_overlap(pair)
        u = dense_unitary(uk)
        expected = np.vdot(
            hea_state(spec, theta).amplitudes,
            u @ hea_state(spec, theta_m).amplitudes,
        )
        assert abs(x - expected) < 1e-12

    def test_identical_parameters_give_unit_overlap(self):
        spec = AnsatzSpec(2, 1)
        theta = random_theta(spec, 4)
        pair = build_reference_test(theta, theta, Circuit(2, ()), spec)
        assert abs(measure_overlap(pair) - 1.0) < 1e-12


class TestMergeControlledPair:
    def _reference(self, u, u_m, ancilla):
        c0 = add_control(u, ancilla, 0)
        c1 = add_control(u_m, ancilla, 1)
        return Circuit(
            ancilla + 1,
            c0.gates + c1.gates,
            global_phase=c0.global_phase + c1.global_phase,
        )

    @pytest.mark.parametrize("seed", range(5))
    def test_equivalent_to_reference(self, seed):
        spec = AnsatzSpec(3, 2)
        u = build_hea(spec, random_theta(spec, seed))
        u_m = build_hea(spec, random_theta(spec, seed + 100))
        merged = merge_controlled_pair(u, u_m, 3)
        ref = self._reference(u, u_m, 3)
        dist = np.abs(dense_unitary(merged) - dense_unitary(ref)).max()
        assert dist < 1e-10

    def test_output_width_capped_at_two(self):
        spec = AnsatzSpec(3, 2)
        u = build_hea(spec, random_theta(spec, 7))
        u_m = build_hea(spec, random_theta(spec, 8))
        merged = merge_controlled_pair(u, u_m, 3)
        assert merged.max_gate_width() <= 2
        ref = self._reference(u, u_m, 3)
        assert ref.max_gate_width() == 3

    def test_equal_angles_drop_controlled_rotations(self):
        spec = AnsatzSpec(2, 2)
        theta = random_theta(spec, 9)
        u = build_hea(spec, theta)
        merged = merge_controlled_pair(u, build_hea(spec, theta.copy()), 2)
        assert all(not g.controls or g.kind == "Z" for g in merged.gates)

    def test_global_phases_become_ancilla_rz(self):
        u = Circuit(1, (rx(0, 0.3),), global_phase=0.4)
        u_m = Circuit(1, (rx(0, 0.5),), global_phase=-0.2)
        merged = merge_controlled_pair(u, u_m, 1)
        ref = self._reference(u, u_m, 1)
        dist = np.abs(dense_unitary(merged) - dense_unitary(ref)).max()
        assert dist < 1e-12

    def test_structural_mismatch_rejected(self):
        u = Circuit(1, (rx(0, 0.3),))
        u_m = Circuit(1, (rz(0, 0.3),))
        with pytest.raises(RewriteError):
            merge_controlled_pair(u, u_m, 1)

    def test_fixed_gate_width_preserved(self):
        u = Circuit(2, (h(0),))
        merged = merge_controlled_pair(u, u, 2)
        assert merged.gates == (h(0),)


class TestUkReplacement:
    def test_small_dt_matches_exact_controlled_uk(self):
        gen = PauliSum.from_terms(2, [(0.5, "XI"), (0.3, "ZZ"), (0.2, "YX")])
        dt = 0.02
        approx = simplify_uk_pass(gen, dt, 2)
        # exact target: C0[e^{-iG dt}] C1[e^{-iG 2dt}]
        import scipy.linalg

        g_dense = to_dense(gen)
        u1 = scipy.linalg.expm(-1j * dt * g_dense)
        u2 = scipy.linalg.expm(-2j * dt * g_dense)
        exact = np.zeros((8, 8), dtype=complex)
        for anc, block in ((0, u1), (1, u2)):
            for i in range(4):
                for j in range(4):
                    exact[2 * i + anc, 2 * j + anc] = block[i, j]
        dist = np.abs(dense_unitary(approx) - exact).max()
        assert dist < 5e-3

    def test_error_scales_quadratically(self):
        import scipy.linalg

        # the two words must not commute or the Trotter block is exact
        gen = PauliSum.from_terms(2, [(0.7, "XZ"), (0.4, "ZZ")])
        g_dense = to_dense(gen)

        def err(dt):
            approx = dense_unitary(simplify_uk_pass(gen, dt, 2))
            u1 = scipy.linalg.expm(-1j * dt * g_dense)
            u2 = scipy.linalg.expm(-2j * dt * g_dense)
            exact = np.zeros((8, 8), dtype=complex)
            for anc, block in ((0, u1), (1, u2)):
                for i in range(4):
                    for j in range(4):
                        exact[2 * i + anc, 2 * j + anc] = block[i, j]
            return np.abs(approx - exact).max()

        assert err(0.2) / err(0.1) == pytest.approx(4.0, abs=0.8)

    def test_width_capped_at_two(self):
        gen = PauliSum.from_terms(3, [(0.5, "XYZ"), (0.2, "ZZI")])
        c = simplify_uk_pass(gen, 0.1, 3)
        assert c.max_gate_width() <= 2


class TestSimplifiedTest:
    def test_matches_reference_overlap(self):
        spec = AnsatzSpec(2, 2)
        theta, theta_m = random_theta(spec, 20), random_theta(spec, 21)
        gen = PauliSum.from_terms(2, [(0.4, "XI"), (0.3, "ZZ")])
        dt = 0.01
        pair = build_simplified_test(theta, theta_m, spec, gen, dt)
        assert pair.real_part.max_gate_width() <= 2
        x = measure_overlap(pair)
        import scipy.linalg

        u = scipy.linalg.expm(-1j * dt * to_dense(gen))
        expected = np.vdot(
            hea_state(spec, theta).amplitudes,
            u @ hea_state(spec, theta_m).amplitudes,
        )
        assert abs(x - expected) < 5e-4

    def test_probabilities_valid(self):
        spec = AnsatzSpec(2, 1)
        theta, theta_m = random_theta(spec, 30), random_theta(spec, 31)
        gen = PauliSum.from_terms(2, [(0.5, "ZI")])
        pair = build_simplified_test(theta, theta_m, spec, gen, 0.1)
        p = ancilla_p0(pair.real_part, pair.ancilla_index)
        assert 0.0 <= p <= 1.0


class TestSampling:
    def test_sampled_estimate_converges(self):
        spec = AnsatzSpec(2, 1)
        theta, theta_m = random_theta(spec, 40), random_theta(spec, 41)
        pair = build_reference_test(theta, theta_m, Circuit(2, ()), spec)
        exact = measure_overlap(pair)
        sampled = measure_overlap(pair, shots=200_000, rng_seed=5)
        assert abs(sampled - exact) < 0.01

    def test_sampled_p0_deterministic(self):
        spec = AnsatzSpec(2, 1)
        theta = random_theta(spec, 50)
        pair = build_reference_test(theta, theta + 0.1, Circuit(2, ()), spec)
        a = sampled_p0(pair.real_part, pair.ancilla_index, 1000, 3)
        b = sampled_p0(pair.real_part, pair.ancilla_index, 1000, 3)
        assert a == b
