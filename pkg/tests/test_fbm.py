import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracvol.fbm import (
    CHOLESKY_CAP,
    FbmGrid,
    RngStream,
    circulant_spectrum,
    fbm_cov,
    increment_autocov,
    sample_fbm_batch,
    sample_fbm_increments,
    transform_normals,
)
from fracvol.selftest import bm_increment_checks, covariance_check, cross_method_check


class TestCovariance:
    def test_bm_variance(self):
        assert fbm_cov(1, 1, 0.5) == pytest.approx(1.0)

    def test_bm_is_min(self):
        assert fbm_cov(1, 2, 0.5) == pytest.approx(1.0)

    def test_hand_value(self):
        assert fbm_cov(1, 2, 0.75) == pytest.approx(math.sqrt(2.0), abs=1e-12)

    @given(
        st.floats(0, 10), st.floats(0, 10), st.floats(0.5, 0.99),
    )
    def test_symmetric_and_diagonal(self, s, t, h):
        assert fbm_cov(s, t, h) == pytest.approx(fbm_cov(t, s, h), abs=1e-12)
        assert fbm_cov(t, t, h) == pytest.approx(t ** (2 * h), rel=1e-12, abs=1e-300)

    @pytest.mark.parametrize("s,t,h", [(-1, 1, 0.6), (1, -0.1, 0.6), (1, 1, 0.4), (1, 1, 1.0)])
    def test_domain_errors(self, s, t, h):
        with pytest.raises(ValueError):
            fbm_cov(s, t, h)


class TestSpectrum:
    @pytest.mark.parametrize("n", [1, 7, 64, 1000])
    def test_bm_flat(self, n):
        lam = circulant_spectrum(0.5, n, 0.01)
        np.testing.assert_allclose(lam, 0.01, rtol=1e-10)
        assert lam.size == 2 * n

    def test_four_point_circulant(self):
        # explicit 4x4 circulant of (g0, g1, g2, g1) diagonalized with eigvalsh
        expected = [0.4412219618609354, 0.7303509133928743, 0.7303509133928744, 2.0980762113533156]
        np.testing.assert_allclose(np.sort(circulant_spectrum(0.75, 2, 1.0)), expected, rtol=1e-12)

    @pytest.mark.parametrize("h", [0.55, 0.65, 0.75, 0.85, 0.9, 0.95])
    def test_psd_across_hurst(self, h):
        lam = circulant_spectrum(h, 1024, 1 / 1024)
        assert lam.min() >= -1e-8 * lam.max()

    def test_autocov_at_zero_is_step_variance(self):
        assert increment_autocov(0.7, [0], 0.25)[0] == pytest.approx(0.25**1.4)


class TestSampler:
    def test_grid_shape_and_path(self):
        g = sample_fbm_increments(0.7, 16, 2.0, RngStream(1, 0))
        assert isinstance(g, FbmGrid)
        assert g.increments.shape == (16,)
        path = g.path()
        assert path[0] == 0.0
        assert path[-1] == pytest.approx(g.increments.sum())
        assert g.times[-1] == pytest.approx(2.0)

    @pytest.mark.parametrize("method", ["circulant", "cholesky"])
    def test_determinism(self, method):
        a = sample_fbm_increments(0.8, 300, 1.0, RngStream(42, 7), method)
        b = sample_fbm_increments(0.8, 300, 1.0, RngStream(42, 7), method)
        assert np.array_equal(a.increments, b.increments)

    def test_streams_differ(self):
        a = sample_fbm_increments(0.8, 100, 1.0, RngStream(42, 0)).increments
        b = sample_fbm_increments(0.8, 100, 1.0, RngStream(42, 1)).increments
        c = sample_fbm_increments(0.8, 100, 1.0, RngStream(43, 0)).increments
        assert not np.allclose(a, b)
        assert not np.allclose(a, c)

    def test_batch_matches_single(self):
        batch = sample_fbm_batch(0.65, 128, 1.0, 9, [3, 0, 11])
        for row, idx in zip(batch, [3, 0, 11]):
            single = sample_fbm_increments(0.65, 128, 1.0, RngStream(9, idx)).increments
            np.testing.assert_allclose(row, single, rtol=1e-12, atol=1e-15)

    def test_cholesky_cap(self):
        with pytest.raises(ValueError, match="cap"):
            sample_fbm_increments(0.7, CHOLESKY_CAP + 1, 1.0, RngStream(0, 0), "cholesky")

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            sample_fbm_increments(0.7, 0, 1.0, RngStream(0, 0))
        with pytest.raises(ValueError):
            sample_fbm_increments(0.3, 10, 1.0, RngStream(0, 0))
        with pytest.raises(ValueError):
            RngStream(0, -1)

    def test_single_step_variance(self):
        # 1e6 draws through the exact transform; n=1 marginal is N(0, T^{2H})
        z = np.random.default_rng(5).standard_normal((1_000_000, 2))
        for h, T in [(0.6, 1.0), (0.8, 2.5)]:
            x = transform_normals(z, h, 1, T)[:, 0]
            assert np.var(x) == pytest.approx(T ** (2 * h), rel=0.01)

    @pytest.mark.parametrize("method", ["circulant", "cholesky"])
    def test_self_similarity_pathwise(self, method):
        # matched normals: scaling the horizon by c scales every path by c^H
        h, c = 0.72, 3.0
        a = sample_fbm_batch(h, 64, 1.0, 3, range(20), method)
        b = sample_fbm_batch(h, 64, c, 3, range(20), method)
        np.testing.assert_allclose(b, c**h * a, rtol=1e-10)

    def test_self_similarity_distribution(self):
        z = np.random.default_rng(6).standard_normal((1_000_000, 8))
        h, c = 0.75, 2.0
        s1 = transform_normals(z, h, 4, 1.0).sum(axis=1).std()
        zc = np.random.default_rng(7).standard_normal((1_000_000, 8))
        s2 = transform_normals(zc, h, 4, c).sum(axis=1).std()
        assert s2 / s1 == pytest.approx(c**h, rel=0.01)

    @pytest.mark.parametrize("h", [0.5, 0.7, 0.9])
    def test_matched_inputs_same_moments(self, h):
        # identical normals through both samplers: sample covariances agree with gamma
        n, N = 32, 40_000
        z = np.random.default_rng(11).standard_normal((N, 2 * n))
        circ = transform_normals(z, h, n, 1.0, "circulant")
        chol = transform_normals(z[:, :n], h, n, 1.0, "cholesky")
        gamma = increment_autocov(h, np.abs(np.subtract.outer(range(n), range(n))), 1 / n)
        se = np.sqrt((gamma[0, 0] ** 2 + gamma**2) / N)
        for x in (circ, chol):
            assert np.abs(x.mean(axis=0)).max() < 5 * math.sqrt(gamma[0, 0] / N)
            assert np.max(np.abs(x.T @ x / N - gamma) / se) < 5.0


class TestStatisticalSuite:
    def test_bm_increments_normal_and_independent(self):
        for check in bm_increment_checks(1000, n_paths=100_000, seed=3):
            assert check.passed, check.line()

    def test_covariance_h075(self):
        check = covariance_check(0.75, 256, n_paths=100_000, seed=4)
        assert check.passed, check.line()

    @pytest.mark.parametrize("h", [0.5, 0.75])
    def test_cross_method(self, h):
        check = cross_method_check(h, 128, n_paths=20_000, seed=5)
        assert check.passed, check.line()


@settings(max_examples=15, deadline=None)
@given(st.floats(0.5, 0.97), st.integers(1, 300))
def test_spectrum_nonnegative_property(h, n):
    assert circulant_spectrum(h, n, 1.0 / n).min() >= 0.0
