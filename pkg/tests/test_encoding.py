"""Encoding tests; expected amplitudes computed by direct substitution."""
import numpy as np
import pytest

from qnnlab.encoding import (
    EncodedState,
    amplitude_decode,
    amplitude_encode,
    duplicate,
    n_qubits_for,
    pad_bounds,
    qcl_encode,
)
from qnnlab.qsim import Statevector


def direct_encoding(x):
    """Straight substitution oracle: gamma^-1 (x, xpad, 0...) padded to 2**n."""
    x = np.asarray(x, dtype=float)
    norm = np.linalg.norm(x)
    xpad = norm / (1.0 + norm)
    gamma = np.sqrt(norm ** 2 + xpad ** 2)
    body = np.concatenate([x, [xpad]]) / gamma
    n = n_qubits_for(len(x))
    out = np.zeros(2 ** n)
    out[: len(body)] = body
    return out


class TestAmplitudeEncode:
    def test_unit_x_axis(self):
        # xpad = 0.5, gamma = sqrt(1.25)
        got = amplitude_encode(np.array([1.0, 0.0]))
        want = direct_encoding([1.0, 0.0])
        assert np.allclose(want, [0.8944271909999159, 0.0, 0.4472135954999579, 0.0], atol=1e-15)
        assert got.n_qubits == 2
        assert np.allclose(got.amplitudes, want, atol=1e-12)

    def test_unit_circle_point(self):
        got = amplitude_encode(np.array([0.6, 0.8]))
        want = direct_encoding([0.6, 0.8])
        assert np.allclose(
            want, [0.5366563145999494, 0.7155417527999327, 0.4472135954999579, 0.0], atol=1e-15
        )
        assert np.allclose(got.amplitudes, want, atol=1e-12)

    def test_three_dim_fills_register(self):
        # d + 1 = 4 exactly fills two qubits: no zero padding
        got = amplitude_encode(np.array([1.0, 1.0, 1.0]))
        want = direct_encoding([1.0, 1.0, 1.0])
        assert np.allclose(
            want,
            [0.5421727800849750, 0.5421727800849750, 0.5421727800849750, 0.3437237693334403],
            atol=1e-15,
        )
        assert got.n_qubits == 2
        assert np.allclose(got.amplitudes, want, atol=1e-12)
        assert np.min(np.abs(got.amplitudes)) > 0.0

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            amplitude_encode(np.zeros(3))

    def test_unit_norm_random(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            x = rng.normal(size=rng.integers(1, 9))
            if np.linalg.norm(x) < 1e-6:
                continue
            s = amplitude_encode(x)
            assert abs(np.linalg.norm(s.amplitudes) - 1.0) < 1e-10

    def test_unpadded_variant(self):
        s = amplitude_encode(np.array([3.0, 4.0]), pad=False)
        assert s.n_qubits == 1
        assert np.allclose(s.amplitudes, [0.6, 0.8])

    def test_pad_bound_over_random_draws(self):
        # every pad amplitude sits strictly inside the (kappa1, kappa2) interval
        rng = np.random.default_rng(42)
        k1, k2 = 0.2, 2.0
        lo, hi = pad_bounds(k1, k2)
        for _ in range(1000):
            d = int(rng.integers(1, 7))
            x = rng.normal(size=d)
            x *= rng.uniform(k1, k2) / np.linalg.norm(x)
            s = amplitude_encode(x)
            pad_amp = s.amplitudes[d].real
            assert lo < pad_amp < hi


class TestAmplitudeDecode:
    def test_round_trip_examples(self):
        for x in ([0.6, 0.8], [1.0, 0.0]):
            s = amplitude_encode(np.array(x))
            back = amplitude_decode(s, len(x), 0.5, 2.0)
            assert np.allclose(back, x, atol=1e-9)

    def test_round_trip_random(self):
        rng = np.random.default_rng(13)
        k1, k2 = 0.2, 2.0
        for _ in range(200):
            d = int(rng.integers(1, 7))
            x = rng.normal(size=d)
            x *= rng.uniform(k1, k2) / np.linalg.norm(x)
            back = amplitude_decode(amplitude_encode(x), d, k1, k2)
            assert np.max(np.abs(back - x)) < 1e-9

    def test_zero_pad_amp_rejected(self):
        s = Statevector(1, np.array([1.0, 0.0]))
        with pytest.raises(ValueError):
            amplitude_decode(s, 1, 0.2, 2.0)


class TestQclEncode:
    def test_zero_input_is_ground_state(self):
        assert np.allclose(qcl_encode(np.array([0.0])).matrix, np.diag([1.0, 0.0]))

    def test_extreme_input_is_plus_state(self):
        assert np.allclose(qcl_encode(np.array([1.0])).matrix, 0.5 * np.ones((2, 2)), atol=1e-12)

    def test_two_zeros(self):
        rho = qcl_encode(np.array([0.0, 0.0]))
        want = np.zeros((4, 4))
        want[0, 0] = 1.0
        assert np.allclose(rho.matrix, want)

    def test_matches_product_formula(self):
        # oracle: (1/2^d) kron of (I + x X + sqrt(1-x^2) Z)
        X = np.array([[0, 1], [1, 0]], dtype=complex)
        Z = np.diag([1.0, -1.0]).astype(complex)
        rng = np.random.default_rng(3)
        for _ in range(25):
            x = rng.uniform(-1, 1, size=int(rng.integers(1, 4)))
            want = np.array([[1.0 + 0j]])
            for xi in x:
                want = np.kron(want, 0.5 * (np.eye(2) + xi * X + np.sqrt(1 - xi ** 2) * Z))
            assert np.max(np.abs(qcl_encode(x).matrix - want)) < 1e-12

    def test_purity(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            rho = qcl_encode(rng.uniform(-1, 1, size=3)).matrix
            assert np.trace(rho @ rho).real == pytest.approx(1.0, abs=1e-10)

    def test_domain_violation(self):
        with pytest.raises(ValueError):
            qcl_encode(np.array([1.2]))


class TestDuplicate:
    def test_single_copy_unchanged(self):
        s = amplitude_encode(np.array([1.0, 0.0]))
        enc = EncodedState(s, 1, "amplitude")
        assert duplicate(enc, 1).state is s

    def test_zero_state_doubles(self):
        s = Statevector(1, np.array([1.0, 0.0]))
        out = duplicate(EncodedState(s, 1, "ccq-copies"), 2)
        assert out.state.n_qubits == 2
        assert np.allclose(out.state.amplitudes, [1, 0, 0, 0])

    def test_pairwise_products(self):
        # two copies of an encoded 2-qubit state: amplitudes are all pairwise products
        s = amplitude_encode(np.array([0.6, 0.8]))
        out = duplicate(EncodedState(s, 1, "ccq-copies"), 2)
        want = np.kron(s.amplitudes, s.amplitudes)
        assert np.allclose(out.state.amplitudes, want, atol=1e-14)

    def test_additive_composition(self):
        s = amplitude_encode(np.array([0.3, -0.4, 1.1]))
        enc = EncodedState(s, 1, "ccq-copies")
        whole = duplicate(enc, 3).state.amplitudes
        parts = np.kron(duplicate(enc, 2).state.amplitudes, duplicate(enc, 1).state.amplitudes)
        assert np.array_equal(whole, parts)

    def test_register_limit(self):
        s = amplitude_encode(np.arange(1.0, 16.0))  # 4 qubits
        with pytest.raises(ValueError):
            duplicate(EncodedState(s, 1, "ccq-copies"), 4)

    def test_density_duplication_purity(self):
        rho = qcl_encode(np.array([0.3, -0.7]))
        out = duplicate(EncodedState(rho, 1, "qcl-product"), 2)
        m = out.state.matrix
        assert np.trace(m @ m).real == pytest.approx(1.0, abs=1e-10)
