import numpy as np
import pytest

from qnnlab.noise import NoiseSpec, draw_matrix, perturb


class TestPerturb:
    def test_zero_delta_is_identity(self):
        params = np.linspace(0, 1, 7)
        out = perturb(params, NoiseSpec(delta=0.0, seed=3))
        assert np.array_equal(out, params)

    def test_same_seed_same_draw(self):
        params = np.zeros(10)
        a = perturb(params, NoiseSpec(delta=0.1, seed=5))
        b = perturb(params, NoiseSpec(delta=0.1, seed=5))
        c = perturb(params, NoiseSpec(delta=0.1, seed=6))
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_sample_variance_matches_delta(self):
        draws = perturb(np.zeros(100_000), NoiseSpec(delta=0.1, seed=11))
        var = float(np.var(draws))
        assert 0.0095 <= var <= 0.0105

    def test_validation(self):
        with pytest.raises(ValueError):
            NoiseSpec(delta=-0.1)
        with pytest.raises(ValueError):
            NoiseSpec(p=1.5)


class TestDrawMatrix:
    def test_shape_and_determinism(self):
        spec = NoiseSpec(delta=0.05, seed=2)
        a = draw_matrix(spec, iteration=4, n_samples=6, n_slots=3)
        b = draw_matrix(spec, iteration=4, n_samples=6, n_slots=3)
        assert a.shape == (6, 3)
        assert np.array_equal(a, b)

    def test_fresh_draws_per_iteration(self):
        spec = NoiseSpec(delta=0.05, seed=2)
        a = draw_matrix(spec, iteration=1, n_samples=4, n_slots=3)
        b = draw_matrix(spec, iteration=2, n_samples=4, n_slots=3)
        assert not np.array_equal(a, b)

    def test_rows_differ_across_samples(self):
        m = draw_matrix(NoiseSpec(delta=0.1, seed=0), iteration=0, n_samples=5, n_slots=4)
        assert not np.allclose(m[0], m[1])

    def test_noiseless_is_zero(self):
        m = draw_matrix(NoiseSpec(), iteration=9, n_samples=3, n_slots=2)
        assert not m.any()
