import math

import numpy as np
import pytest

from nhsim.models import (
    HatanoNelsonSpec,
    IsingSpec,
    ModelError,
    SshSpec,
    build_model,
    fock_matrix,
    hn_hamiltonian,
    hn_initial_state,
    ising_hamiltonian,
    number_operator,
    observables_for,
    site_occupation,
    spin_polarization,
    ssh_hamiltonian,
)
from nhsim.pauli import hermitian_split, to_dense
from nhsim.statevec import basis_state, expectation


class TestIsing:
    def test_term_inventory(self):
        h = ising_hamiltonian(IsingSpec(n=3, j=1.0, g_r=2.0, g_i=0.5))
        assert h.coefficient("ZZI") == -1.0
        assert h.coefficient("IZZ") == -1.0
        assert h.coefficient("XII") == complex(-2.0, -0.5)
        assert len(h.terms) == 5

    def test_hermitian_when_gi_zero(self):
        assert ising_hamiltonian(IsingSpec(g_i=0.0)).is_hermitian()
        assert not ising_hamiltonian(IsingSpec(g_i=1.0)).is_hermitian()

    def test_shift_is_n_times_gi(self):
        for g_i in (0.5, 1.0, 2.0):
            h = ising_hamiltonian(IsingSpec(n=6, g_i=g_i))
            assert hermitian_split(h).shift == pytest.approx(6 * g_i)

    def test_minimum_size(self):
        with pytest.raises(ModelError):
            IsingSpec(n=1)


class TestHatanoNelson:
    @pytest.mark.parametrize("n", [2, 3, 4])
    @pytest.mark.parametrize("dual", [False, True])
    def test_jw_matches_fock_oracle(self, n, dual):
        spec = HatanoNelsonSpec(n=n, g=0.7, u=1.3, dual=dual)
        dense = to_dense(hn_hamiltonian(spec))
        oracle = fock_matrix(n, spec.t_r, spec.t_l, spec.u,
                             hole_interaction=dual)
        np.testing.assert_allclose(dense, oracle, atol=1e-12)

    def test_hopping_amplitudes(self):
        spec = HatanoNelsonSpec(g=1.0)
        assert spec.t_r == pytest.approx(math.e)
        assert spec.t_l == pytest.approx(1 / math.e)
        dual = HatanoNelsonSpec(g=1.0, dual=True)
        assert dual.t_r == pytest.approx(1 / math.e)
        assert dual.t_l == pytest.approx(math.e)

    def test_number_conservation(self):
        h = to_dense(hn_hamiltonian(HatanoNelsonSpec(n=4)))
        n_op = to_dense(number_operator(4))
        assert np.abs(h @ n_op - n_op @ h).max() < 1e-12

    def test_initial_states(self):
        psi = hn_initial_state(HatanoNelsonSpec(n=10))
        assert psi.amplitudes[int("0000110000", 2)] == 1.0
        psi_d = hn_initial_state(HatanoNelsonSpec(n=10, dual=True))
        assert psi_d.amplitudes[int("1111001111", 2)] == 1.0

    def test_initial_filling(self):
        psi = hn_initial_state(HatanoNelsonSpec(n=6))
        assert expectation(psi, number_operator(6)) == pytest.approx(2.0)
        psi_d = hn_initial_state(HatanoNelsonSpec(n=6, dual=True))
        assert expectation(psi_d, number_operator(6)) == pytest.approx(4.0)

    def test_particle_hole_duality_exact(self):
        # normalized dynamics: <n_j>_particle(t) + <n_j>_dual(t) = 1 sitewise
        import scipy.linalg

        n, t = 4, 0.9
        for dual in (False, True):
            spec = HatanoNelsonSpec(n=n, dual=dual)
            h = to_dense(hn_hamiltonian(spec))
            psi0 = hn_initial_state(spec).amplitudes
            raw = scipy.linalg.expm(-1j * t * h) @ psi0
            state = raw / np.linalg.norm(raw)
            occ = [
                float(np.vdot(state, to_dense(site_occupation(n, j)) @ state).real)
                for j in range(n)
            ]
            if dual:
                occ_dual = occ
            else:
                occ_particle = occ
        for a, b in zip(occ_particle, occ_dual):
            assert a + b == pytest.approx(1.0, abs=1e-10)


class TestSsh:
    def test_bloch_components(self):
        spec = SshSpec()
        assert spec.h_x == pytest.approx(0.3 + math.cos(0.3 * math.pi))
        assert spec.h_z == pytest.approx(math.sin(0.3 * math.pi))

    def test_hamiltonian_structure(self):
        spec = SshSpec()
        h = ssh_hamiltonian(spec)
        assert h.n_qubits == 1
        assert h.coefficient("X") == pytest.approx(spec.gamma * spec.h_x)
        assert h.coefficient("Z") == pytest.approx(
            complex(spec.gamma * spec.h_z, spec.gamma * 0.5)
        )

    def test_split_shift(self):
        split = hermitian_split(ssh_hamiltonian(SshSpec()))
        assert split.shift == pytest.approx(3.5 * 0.5)
        assert split.v.coefficient("Z") == pytest.approx(1.75)


class TestObservables:
    def test_number_operator_diagonal(self):
        n_op = to_dense(number_operator(3))
        expected = [bin(i).count("1") for i in range(8)]
        np.testing.assert_allclose(np.diag(n_op), expected)

    def test_site_occupation_on_basis_states(self):
        assert expectation(basis_state(3, "010"), site_occupation(3, 1)) == 1.0
        assert expectation(basis_state(3, "010"), site_occupation(3, 0)) == 0.0

    def test_spin_polarization_range(self):
        sz = spin_polarization(4)
        assert expectation(basis_state(4, "0000"), sz) == pytest.approx(1.0)
        assert expectation(basis_state(4, "1111"), sz) == pytest.approx(-1.0)

    def test_observables_for_each_model(self):
        assert [o.name for o in observables_for("ising", 6)] == ["S_z"]
        hn = observables_for("hatano-nelson", 4)
        assert [o.name for o in hn] == ["n_0", "n_1", "n_2", "n_3", "N"]
        ssh = observables_for("ssh", 1)
        assert ssh[0].name == "P_0" and ssh[0].operator is None

    def test_unknown_model_rejected(self):
        with pytest.raises(ModelError):
            observables_for("xyz", 2)


class TestRegistry:
    def test_ising_defaults(self):
        ham, psi0, obs = build_model("ising", {})
        assert ham.n_qubits == 6
        assert psi0.amplitudes[0] == 1.0

    def test_parameter_overrides(self):
        ham, _, _ = build_model("ising", {"n": "4", "g_i": "1.5"})
        assert ham.n_qubits == 4
        assert ham.coefficient("XIII") == complex(-2.0, -1.5)

    def test_dual_registry_name(self):
        ham, psi0, _ = build_model("hatano-nelson-dual", {"n": "4"})
        assert psi0.amplitudes[int("1001", 2)] == 1.0

    def test_unknown_name(self):
        with pytest.raises(ModelError):
            build_model("nope", {})
