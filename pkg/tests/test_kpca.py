import numpy as np
import pytest
from helpers import centered_gram, jacobi_eigenvalues

from eegvad.frames import FrameSequence
from eegvad.kpca import (
    KernelParams,
    KpcaModel,
    explained_variance_curve,
    fit_kpca,
    load_kpca,
    polynomial_kernel,
    save_kpca,
    subsample_rows,
    transform,
)


class TestKernel:
    def test_zero_vectors(self):
        p = KernelParams(gamma=1.0, coef0=1.0)
        assert polynomial_kernel(np.zeros(3), np.zeros(3), p) == 1.0

    def test_orthogonal_no_offset(self):
        p = KernelParams(gamma=1.0, coef0=0.0)
        assert polynomial_kernel(np.array([1.0, 0.0]), np.array([0.0, 1.0]), p) == 0.0

    def test_hand_arithmetic(self):
        p = KernelParams(gamma=1.0, coef0=1.0)
        # (1*3 + 2*4 + 1)^3 = 12^3
        assert polynomial_kernel(np.array([1.0, 2.0]), np.array([3.0, 4.0]), p) == 1728.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length mismatch"):
            polynomial_kernel(np.zeros(2), np.zeros(3), KernelParams())


class TestFit:
    def test_identical_vectors_insufficient_rank(self):
        x = np.tile(np.array([1.0, 2.0, 3.0]), (8, 1))
        with pytest.raises(ValueError, match="insufficient rank"):
            fit_kpca(x, out_dim=2)

    def test_insufficient_samples(self):
        with pytest.raises(ValueError, match="insufficient samples"):
            fit_kpca(np.random.default_rng(0).standard_normal((5, 3)), out_dim=5)

    def test_nonfinite_input(self):
        x = np.ones((6, 2))
        x[0, 0] = np.inf
        with pytest.raises(ValueError, match="non-finite input"):
            fit_kpca(x, out_dim=2)

    def test_eigenvalues_match_jacobi_oracle_small(self):
        rng = np.random.default_rng(13)
        x = rng.standard_normal((5, 3))
        model = fit_kpca(x, out_dim=2)
        oracle = jacobi_eigenvalues(centered_gram(x, model.params))
        scale = max(1.0, oracle[0])
        np.testing.assert_allclose(
            model.eigenvalues, np.maximum(oracle, 0.0), atol=1e-8 * scale
        )

    @pytest.mark.parametrize("n,d", [(8, 4), (20, 155), (12, 6)])
    def test_eigenvalues_match_jacobi_oracle(self, n, d):
        rng = np.random.default_rng(n * 100 + d)
        x = rng.standard_normal((n, d))
        model = fit_kpca(x, out_dim=min(5, n - 1))
        oracle = jacobi_eigenvalues(centered_gram(x, model.params))
        scale = max(1.0, oracle[0])
        np.testing.assert_allclose(
            model.eigenvalues, np.maximum(oracle, 0.0), atol=1e-8 * scale
        )

    def test_gram_symmetry_and_centering(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((15, 4))
        params = KernelParams()
        gamma = params.resolved_gamma(x.shape[1])
        k = (gamma * (x @ x.T) + params.coef0) ** 3
        np.testing.assert_array_equal(k, k.T)
        mu = k.mean(axis=1)
        kc = k - mu[:, None] - mu[None, :] + mu.mean()
        scale = np.abs(kc).max()
        np.testing.assert_allclose(kc, kc.T, atol=1e-12 * scale)
        assert np.abs(kc.sum(axis=0)).max() <= 1e-8 * scale
        assert np.abs(kc.sum(axis=1)).max() <= 1e-8 * scale
        # the textbook double-centering form agrees with the row-means form
        np.testing.assert_allclose(kc, centered_gram(x, params), atol=1e-10 * scale)

    def test_component_normalization(self):
        # alpha^T K_c alpha = 1 for every stored component
        rng = np.random.default_rng(5)
        x = rng.standard_normal((12, 4))
        model = fit_kpca(x, out_dim=3)
        kc = centered_gram(x, model.params)
        quad = np.diag(model.components.T @ kc @ model.components)
        np.testing.assert_allclose(quad, 1.0, atol=1e-6)

    def test_eigenvalues_sorted_nonnegative(self):
        rng = np.random.default_rng(6)
        model = fit_kpca(rng.standard_normal((25, 5)), out_dim=4)
        assert np.all(np.diff(model.eigenvalues) <= 0)
        assert np.all(model.eigenvalues >= 0)


class TestTransform:
    def test_fit_transform_consistency(self):
        rng = np.random.default_rng(8)
        x = rng.standard_normal((10, 3))
        model = fit_kpca(x, out_dim=3)
        projected = transform(model, x)
        # training projection row r must equal sqrt(lambda_i) * alpha_ri,
        # i.e. components scaled by their eigenvalues
        expected = model.components * model.eigenvalues[: model.out_dim]
        np.testing.assert_allclose(projected, expected, atol=1e-8)

    def test_training_projection_columns_orthogonal(self):
        rng = np.random.default_rng(9)
        x = rng.standard_normal((18, 5))
        model = fit_kpca(x, out_dim=4)
        z = transform(model, x)
        gram = z.T @ z
        off = gram - np.diag(np.diag(gram))
        assert np.abs(off).max() <= 1e-6 * np.abs(np.diag(gram)).max()

    def test_output_dim_30_from_155(self):
        rng = np.random.default_rng(10)
        x = rng.standard_normal((60, 155))
        model = fit_kpca(x, out_dim=30)
        out = transform(model, rng.standard_normal((7, 155)))
        assert out.shape == (7, 30)

    def test_duplicate_frame_duplicate_output(self):
        rng = np.random.default_rng(11)
        model = fit_kpca(rng.standard_normal((10, 3)), out_dim=2)
        row = rng.standard_normal(3)
        out = transform(model, np.vstack([row, row]))
        np.testing.assert_array_equal(out[0], out[1])

    def test_dim_mismatch(self):
        model = fit_kpca(np.random.default_rng(0).standard_normal((10, 3)), out_dim=2)
        with pytest.raises(ValueError, match="dimension mismatch"):
            transform(model, np.zeros((2, 4)))

    def test_frame_sequence_roundtrip(self):
        rng = np.random.default_rng(12)
        frames = FrameSequence(rng.standard_normal((20, 4)), 100.0, labels=np.zeros(20, int))
        model = fit_kpca(frames, out_dim=3)
        out = transform(model, frames)
        assert isinstance(out, FrameSequence)
        assert out.frame_rate_hz == 100.0
        assert out.dim == 3
        np.testing.assert_array_equal(out.labels, frames.labels)

    def test_chunked_transform_matches_single_shot(self):
        rng = np.random.default_rng(14)
        x = rng.standard_normal((30, 4))
        model = fit_kpca(x, out_dim=3)
        q = rng.standard_normal((11, 4))
        np.testing.assert_allclose(
            transform(model, q, chunk=4), transform(model, q, chunk=1024), rtol=1e-12
        )


class TestExplainedVariance:
    def make_model(self, eigenvalues):
        ev = np.asarray(eigenvalues, dtype=np.float64)
        return KpcaModel(
            training_vectors=np.zeros((len(ev), 1)),
            params=KernelParams(),
            row_means=np.zeros(len(ev)),
            grand_mean=0.0,
            eigenvalues=ev,
            components=np.zeros((len(ev), 1)),
            out_dim=1,
        )

    def test_three_one(self):
        np.testing.assert_allclose(
            explained_variance_curve(self.make_model([3.0, 1.0])), [0.75, 1.0]
        )

    def test_single_nonzero(self):
        np.testing.assert_allclose(explained_variance_curve(self.make_model([2.0])), [1.0])

    def test_random_data_curve_properties(self):
        rng = np.random.default_rng(15)
        model = fit_kpca(rng.standard_normal((20, 5)), out_dim=4)
        curve = explained_variance_curve(model)
        assert np.all(np.diff(curve) >= -1e-15)
        assert np.all((curve >= 0) & (curve <= 1 + 1e-12))
        assert curve[-1] == pytest.approx(1.0)

    def test_all_zero_spectrum(self):
        with pytest.raises(ValueError, match="all-zero spectrum"):
            explained_variance_curve(self.make_model([0.0, 0.0]))


class TestPersistence:
    def test_save_load_transform_close(self, tmp_path):
        rng = np.random.default_rng(16)
        x = rng.standard_normal((15, 4))
        model = fit_kpca(x, out_dim=3)
        path = tmp_path / "m.kpca"
        save_kpca(model, path)
        loaded = load_kpca(path)
        q = rng.standard_normal((5, 4))
        np.testing.assert_allclose(transform(loaded, q), transform(model, q), rtol=1e-4, atol=1e-5)

    def test_resave_byte_identical(self, tmp_path):
        rng = np.random.default_rng(17)
        model = fit_kpca(rng.standard_normal((12, 3)), out_dim=2)
        p1, p2 = tmp_path / "a.kpca", tmp_path / "b.kpca"
        save_kpca(model, p1)
        save_kpca(load_kpca(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_subsample_deterministic_and_bounded(self):
        rng = np.random.default_rng(18)
        x = rng.standard_normal((100, 3))
        a = subsample_rows(x, 10, seed=4)
        b = subsample_rows(x, 10, seed=4)
        np.testing.assert_array_equal(a, b)
        assert a.shape == (10, 3)
        assert subsample_rows(x, 200, seed=4) is x
