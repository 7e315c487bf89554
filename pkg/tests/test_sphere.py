import math

import numpy as np
import pytest
from scipy import stats

from embkit.simlab import uniform_sphere_points
from embkit.sphere import (SamplingWeightConfig, SphereDensity,
                           adaptive_simpson, density_mode,
                           gaussian_approximation, log_sampling_weight,
                           sampling_weight)

ALL_DIMS = (4, 8, 16, 32, 64, 128)


def unnormalized(d, n):
    d = np.asarray(d, dtype=float)
    out = np.zeros_like(d)
    inside = (d > 0) & (d < 2)
    di = d[inside]
    out[inside] = di ** (n - 2) * (1 - 0.25 * di ** 2) ** ((n - 3) / 2)
    return out


class TestDensity:
    def test_quadrature_regression_n4(self):
        # closed form: the n=4 unnormalized density integrates to pi/2
        val = adaptive_simpson(lambda d: float(unnormalized([d], 4)[0]),
                               0.0, 2.0, tol=1e-12)
        assert val == pytest.approx(math.pi / 2, abs=1e-10)
        assert SphereDensity(4).norm_const == pytest.approx(2 / math.pi, rel=1e-9)

    def test_boundary_values_vanish(self):
        sd = SphereDensity(8)
        assert sd.density(0.0) == 0.0
        assert sd.density(2.0) == 0.0
        assert sd.density(-0.3) == 0.0
        assert sd.density(2.7) == 0.0

    def test_value_at_sqrt2_n4(self):
        # unnormalized value sqrt(2)^2 * sqrt(1/2) = 1.41421, normalizer pi/2
        sd = SphereDensity(4)
        assert sd.density(math.sqrt(2)) == pytest.approx(
            math.sqrt(2) / (math.pi / 2), rel=1e-9)
        assert sd.density(math.sqrt(2)) == pytest.approx(0.90032, abs=1e-5)

    @pytest.mark.parametrize("n", ALL_DIMS)
    def test_normalization(self, n):
        sd = SphereDensity(n)
        integral = adaptive_simpson(sd.density, 0.0, 2.0, tol=1e-9)
        assert abs(integral - 1.0) < 1e-6

    @pytest.mark.parametrize("n", ALL_DIMS)
    def test_positive_inside(self, n):
        # strictly positive in exact arithmetic; near the endpoints at large
        # n the linear-space value underflows float64, so positivity is
        # asserted through the log form, which must stay finite on (0, 2)
        sd = SphereDensity(n)
        d = np.linspace(1e-3, 2 - 1e-3, 101)
        assert np.all(np.isfinite(sd.log_density(d)))
        inner = np.linspace(0.5, 1.9, 57)
        assert np.all(sd.density(inner) > 0)

    def test_rejects_bad_dimension(self):
        with pytest.raises(ValueError):
            SphereDensity(2)
        with pytest.raises(ValueError):
            SphereDensity(3.5)

    def test_cdf_monotone_and_normalized(self):
        sd = SphereDensity(32)
        grid = np.linspace(0, 2, 501)
        c = sd.cdf(grid)
        assert c[0] == 0.0 and c[-1] == pytest.approx(1.0, abs=1e-12)
        assert np.all(np.diff(c) >= 0)


class TestMode:
    @pytest.mark.parametrize("n,expected", [(4, 1.63299), (128, 1.41703)])
    def test_frozen_values(self, n, expected):
        assert density_mode(SphereDensity(n)) == pytest.approx(expected, abs=1e-5)

    def test_n3_boundary(self):
        assert density_mode(SphereDensity(3)) == 2.0

    @pytest.mark.parametrize("n", ALL_DIMS)
    def test_grid_argmax_oracle(self, n):
        sd = SphereDensity(n)
        grid = np.arange(0.0, 2.0 + 1e-5, 1e-5)
        argmax = grid[np.argmax(sd.density(grid))]
        assert abs(argmax - density_mode(sd)) < 1e-3


class TestGaussianApproximation:
    def test_frozen_values(self):
        assert gaussian_approximation(128) == pytest.approx(
            (1.41421, 0.00390625), abs=1e-5)
        assert gaussian_approximation(64) == pytest.approx(
            (1.41421, 0.0078125), abs=1e-5)

    def test_variance_halves_when_n_doubles(self):
        for n in (8, 16, 32, 64):
            assert gaussian_approximation(2 * n)[1] == pytest.approx(
                gaussian_approximation(n)[1] / 2)


class TestConcentration:
    def test_central_interval_shrinks(self):
        widths = []
        for n in (8, 16, 32, 64, 128):
            lo, hi = SphereDensity(n).central_interval(0.99)
            widths.append(hi - lo)
        assert all(b < a for a, b in zip(widths, widths[1:]))


class TestMonteCarlo:
    @pytest.mark.parametrize("n", (8, 32, 128))
    def test_ks_against_quadrature_cdf(self, n):
        rng = np.random.default_rng(1000 + n)
        a = uniform_sphere_points(n, 100_000, rng)
        b = uniform_sphere_points(n, 100_000, rng)
        dists = np.linalg.norm(a - b, axis=1)
        res = stats.kstest(dists, SphereDensity(n).cdf)
        assert res.pvalue > 1e-3


class TestSamplingWeight:
    def test_minimum_weight_at_mode(self):
        sd = SphereDensity(64)
        cfg = SamplingWeightConfig(lambda_clip=1e12, d_floor=0.05, d_ceil=1.95)
        mode = density_mode(sd)
        w_mode = sampling_weight(sd, cfg, mode)
        for d in (0.3, 0.8, 1.2, 1.6, 1.9):
            assert sampling_weight(sd, cfg, d) >= w_mode
        assert w_mode == pytest.approx(1.0 / sd.density(mode), rel=1e-9)

    def test_clip_engages_at_small_distance(self):
        # inverse density at the clamped floor is astronomically above 10
        sd = SphereDensity(128)
        cfg = SamplingWeightConfig(lambda_clip=10.0)
        assert 1.0 / sd.density(0.5) > 10.0
        assert sampling_weight(sd, cfg, 0.0) == 10.0

    def test_clamp_idempotence(self):
        sd = SphereDensity(32)
        cfg = SamplingWeightConfig()
        assert sampling_weight(sd, cfg, 0.0) == sampling_weight(sd, cfg, 0.4)
        assert sampling_weight(sd, cfg, 1.5) == sampling_weight(sd, cfg, 1.9)

    def test_weight_bounded_by_lambda(self):
        sd = SphereDensity(16)
        cfg = SamplingWeightConfig()  # default cap = weight at the floor
        cap = sampling_weight(sd, cfg, cfg.d_floor)
        d = np.linspace(0, 2, 201)
        w = np.exp(log_sampling_weight(sd, cfg, d))
        assert np.all(w > 0)
        assert np.all(w <= cap * (1 + 1e-12))

    def test_rejects_negative_distance(self):
        with pytest.raises(ValueError):
            sampling_weight(SphereDensity(8), SamplingWeightConfig(), -0.1)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SamplingWeightConfig(d_floor=0.0)
        with pytest.raises(ValueError):
            SamplingWeightConfig(d_floor=1.5, d_ceil=1.2)
        with pytest.raises(ValueError):
            SamplingWeightConfig(lambda_clip=-1.0)
