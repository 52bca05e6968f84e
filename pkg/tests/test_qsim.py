"""Simulation-core tests against explicit Kronecker-product oracles."""
import numpy as np
import pytest

from qnnlab import qsim
from qnnlab.qsim import (
    DensityMatrix,
    GateOp,
    PauliString,
    Statevector,
    apply_channel,
    apply_gate,
    basis_state,
    expectation,
    r_matrix,
    to_density,
)

I2 = np.eye(2, dtype=complex)
P0 = np.diag([1.0, 0.0]).astype(complex)
P1 = np.diag([0.0, 1.0]).astype(complex)


def oracle_r(t1, t2, t3):
    """R written out entry by entry, independent of qsim.r_matrix."""
    return np.array(
        [
            [np.exp(1j * t2) * np.cos(t1), np.exp(1j * t3) * np.sin(t1)],
            [-np.exp(-1j * t3) * np.sin(t1), np.exp(-1j * t2) * np.cos(t1)],
        ]
    )


def oracle_embed(gate: GateOp, n: int) -> np.ndarray:
    """Full-register unitary via raw kron products (qubit 0 = leftmost factor)."""
    r = oracle_r(*gate.params)
    if gate.kind == "r":
        factors = [r if k == gate.target else I2 for k in range(n)]
        out = factors[0]
        for f in factors[1:]:
            out = np.kron(out, f)
        return out
    lo = [P0 if k == gate.control else I2 for k in range(n)]
    hi = [P1 if k == gate.control else (r if k == gate.target else I2) for k in range(n)]
    a, b = lo[0], hi[0]
    for f, g in zip(lo[1:], hi[1:]):
        a, b = np.kron(a, f), np.kron(b, g)
    return a + b


def rand_state(n, rng):
    z = rng.normal(size=2 ** n) + 1j * rng.normal(size=2 ** n)
    return Statevector(n, z / np.linalg.norm(z))


class TestGateMatrix:
    def test_identity_params_give_identity(self):
        assert np.allclose(r_matrix(0, 0, 0), I2)

    def test_unitarity_random_triples(self):
        rng = np.random.default_rng(7)
        thetas = rng.uniform(-2 * np.pi, 2 * np.pi, size=(1000, 3))
        mats = r_matrix(thetas[:, 0], thetas[:, 1], thetas[:, 2])
        prod = np.einsum("bji,bjk->bik", mats.conj(), mats)
        assert np.max(np.abs(prod - I2)) < 1e-12

    def test_matches_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            t = rng.uniform(-np.pi, np.pi, size=3)
            assert np.allclose(r_matrix(*t), oracle_r(*t), atol=1e-14)

    def test_controlled_matrix_unitary(self):
        g = GateOp("cr", target=1, control=0, params=(0.3, -1.2, 2.5))
        u = qsim.gate_matrix_full(g, 2)
        assert np.max(np.abs(u.conj().T @ u - np.eye(4))) < 1e-12


class TestApplyGate:
    def test_identity_gate_keeps_state(self):
        rng = np.random.default_rng(0)
        psi = rand_state(2, rng)
        out = apply_gate(psi, GateOp("r", target=0, params=(0, 0, 0)))
        assert np.allclose(out.amplitudes, psi.amplitudes)

    def test_half_pi_rotation_on_zero(self):
        # hand evaluation of the R matrix row (-e^{-i t3} sin t1, e^{-i t2} cos t1)
        out = apply_gate(basis_state(1), GateOp("r", target=0, params=(np.pi / 2, 0, 0)))
        assert np.allclose(out.amplitudes, [0.0, -1.0], atol=1e-12)

    def test_inactive_control_leaves_state(self):
        rng = np.random.default_rng(1)
        # control qubit 0 fixed to |0>: amplitudes with index >= 4 vanish
        z = np.zeros(8, dtype=complex)
        z[:4] = rng.normal(size=4) + 1j * rng.normal(size=4)
        z /= np.linalg.norm(z)
        psi = Statevector(3, z)
        out = apply_gate(psi, GateOp("cr", target=2, control=0, params=(1.0, 2.0, 3.0)))
        assert np.allclose(out.amplitudes, psi.amplitudes, atol=1e-12)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_brute_force_equivalence(self, n):
        rng = np.random.default_rng(10 + n)
        for _ in range(40):
            psi = rand_state(n, rng)
            t = tuple(rng.uniform(-np.pi, np.pi, size=3))
            if n == 1 or rng.random() < 0.5:
                gate = GateOp("r", target=int(rng.integers(n)), params=t)
            else:
                c, tq = rng.choice(n, size=2, replace=False)
                gate = GateOp("cr", target=int(tq), control=int(c), params=t)
            expect = oracle_embed(gate, n) @ psi.amplitudes
            got = apply_gate(psi, gate).amplitudes
            assert np.max(np.abs(got - expect)) < 1e-12

    def test_norm_preserved(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            psi = rand_state(3, rng)
            c, tq = rng.choice(3, size=2, replace=False)
            gate = GateOp("cr", target=int(tq), control=int(c), params=tuple(rng.uniform(0, 6, 3)))
            out = apply_gate(psi, gate)
            assert abs(np.linalg.norm(out.amplitudes) - 1.0) < 1e-12

    def test_bad_indices_rejected(self):
        psi = basis_state(2)
        with pytest.raises(ValueError):
            apply_gate(psi, GateOp("r", target=2, params=(0, 0, 0)))
        with pytest.raises(ValueError):
            GateOp("cr", target=1, control=1, params=(0, 0, 0))


class TestExpectation:
    def test_computational_basis_eigenstate(self):
        assert expectation(basis_state(2), PauliString("ZZ")) == pytest.approx(1.0)

    def test_bell_state_xx(self):
        bell = Statevector(2, np.array([1, 0, 0, 1]) / np.sqrt(2))
        assert expectation(bell, PauliString("XX")) == pytest.approx(1.0)

    def test_bell_state_marginal_z(self):
        bell = Statevector(2, np.array([1, 0, 0, 1]) / np.sqrt(2))
        assert expectation(bell, PauliString("ZI")) == pytest.approx(0.0, abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            expectation(basis_state(2), PauliString("Z"))

    def test_bounds_and_pure_mixed_agreement(self):
        rng = np.random.default_rng(8)
        letters = ["XY", "ZX", "YY", "IZ", "XI"]
        for _ in range(50):
            psi = rand_state(2, rng)
            rho = to_density(psi)
            for ls in letters:
                ev_pure = expectation(psi, PauliString(ls))
                ev_mixed = expectation(rho, PauliString(ls))
                assert abs(ev_pure) <= 1.0 + 1e-9
                assert ev_pure == pytest.approx(ev_mixed, abs=1e-10)

    def test_all_identity_is_one(self):
        rng = np.random.default_rng(2)
        psi = rand_state(3, rng)
        assert expectation(psi, PauliString("III")) == pytest.approx(1.0)

    def test_dense_oracle(self):
        rng = np.random.default_rng(4)
        psi = rand_state(3, rng)
        p = PauliString("XZY")
        want = np.real(psi.amplitudes.conj() @ p.matrix() @ psi.amplitudes)
        assert expectation(psi, p) == pytest.approx(want, abs=1e-12)


class TestToDensity:
    def test_zero_state(self):
        rho = to_density(basis_state(1))
        assert np.allclose(rho.matrix, np.diag([1.0, 0.0]))

    def test_plus_state(self):
        plus = Statevector(1, np.array([1, 1]) / np.sqrt(2))
        assert np.allclose(to_density(plus).matrix, 0.5 * np.ones((2, 2)))

    def test_trace_and_purity(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            rho = to_density(rand_state(3, rng)).matrix
            assert np.trace(rho).real == pytest.approx(1.0, abs=1e-12)
            assert np.trace(rho @ rho).real == pytest.approx(1.0, abs=1e-9)


def oracle_twirl(rho: np.ndarray, control: int, target: int, n: int) -> np.ndarray:
    """(1/16) sum over all 16 two-qubit Pauli conjugations, built by raw kron."""
    paulis = {
        "I": I2,
        "X": np.array([[0, 1], [1, 0]], dtype=complex),
        "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
        "Z": np.diag([1.0, -1.0]).astype(complex),
    }
    acc = np.zeros_like(rho)
    for a in "IXYZ":
        for b in "IXYZ":
            full = np.array([[1.0 + 0j]])
            for k in range(n):
                if k == control:
                    full = np.kron(full, paulis[a])
                elif k == target:
                    full = np.kron(full, paulis[b])
                else:
                    full = np.kron(full, I2)
            acc += full @ rho @ full.conj().T
    return acc / 16.0


class TestChannel:
    def test_p_zero_is_unitary_conjugation(self):
        rng = np.random.default_rng(9)
        rho = to_density(rand_state(2, rng))
        gate = GateOp("cr", target=1, control=0, params=(0.7, 0.1, -0.4))
        out = apply_channel(rho, gate, 0.0)
        u = oracle_embed(gate, 2)
        assert np.allclose(out.matrix, u @ rho.matrix @ u.conj().T, atol=1e-12)

    def test_full_twirl_of_00_is_maximally_mixed(self):
        # Pauli-twirl identity: (1/16) sum_P P rho P^dag = I/4 on two qubits
        rho = to_density(basis_state(2))
        gate = GateOp("cr", target=1, control=0, params=(0, 0, 0))
        out = apply_channel(rho, gate, 1.0)
        assert np.allclose(out.matrix, np.eye(4) / 4.0, atol=1e-12)
        assert np.allclose(oracle_twirl(rho.matrix, 0, 1, 2), np.eye(4) / 4.0, atol=1e-12)

    def test_matches_twirl_oracle_on_three_qubits(self):
        rng = np.random.default_rng(11)
        rho = to_density(rand_state(3, rng))
        gate = GateOp("cr", target=0, control=2, params=(1.3, 0.2, 0.9))
        p = 0.37
        out = apply_channel(rho, gate, p)
        u = oracle_embed(gate, 3)
        conj = u @ rho.matrix @ u.conj().T
        want = (1 - p) * conj + p * oracle_twirl(conj, 2, 0, 3)
        assert np.max(np.abs(out.matrix - want)) < 1e-12

    def test_trace_preserved_and_positive(self):
        rng = np.random.default_rng(12)
        for p in [0.0, 0.05, 0.5, 1.0]:
            rho = to_density(rand_state(2, rng))
            gate = GateOp("cr", target=0, control=1, params=tuple(rng.uniform(0, 6, 3)))
            out = apply_channel(rho, gate, p)
            assert np.trace(out.matrix).real == pytest.approx(1.0, abs=1e-10)
            evals = np.linalg.eigvalsh(out.matrix)
            assert evals.min() >= -1e-9

    def test_rejects_bad_inputs(self):
        rho = to_density(basis_state(2))
        with pytest.raises(ValueError):
            apply_channel(rho, GateOp("r", target=0, params=(0, 0, 0)), 0.1)
        with pytest.raises(ValueError):
            apply_channel(rho, GateOp("cr", target=1, control=0, params=(0, 0, 0)), 1.5)


class TestInvariantConstruction:
    def test_statevector_rejects_unnormalized(self):
        with pytest.raises(ValueError):
            Statevector(1, np.array([1.0, 1.0]))

    def test_density_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            DensityMatrix(1, np.array([[1.0, 0.5], [0.0, 0.0]]))

    def test_pauli_rejects_bad_letters(self):
        with pytest.raises(ValueError):
            PauliString("XQ")
