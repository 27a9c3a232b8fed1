"""Tests for the bivariate normal CDF."""

import math

import numpy as np
import pytest
from scipy.integrate import dblquad
from scipy.special import ndtr

from src.bvn import bvn_cdf
from src.errors import InputError

RHOS = [-0.97, -0.8, -0.5, -0.1, 0.0, 0.2, 0.5, 0.8, 0.93, 0.99]


class TestClosedForms:

    @pytest.mark.parametrize("rho", RHOS)
    def test_origin(self, rho):
        """P(Z1 <= 0, Z2 <= 0) = 1/4 + asin(rho) / (2 pi)."""
        expected = 0.25 + math.asin(rho) / (2.0 * math.pi)
        assert bvn_cdf(0.0, 0.0, rho) == pytest.approx(expected, abs=1e-7)

    def test_origin_half_correlation_is_one_third(self):
        assert bvn_cdf(0.0, 0.0, 0.5) == pytest.approx(1.0 / 3.0, abs=1e-7)

    @pytest.mark.parametrize("h", [-2.5, -0.4, 0.0, 1.3])
    def test_independence_factorizes(self, h):
        assert bvn_cdf(h, 0.7, 0.0) == pytest.approx(ndtr(h) * ndtr(0.7), abs=1e-7)

    @pytest.mark.parametrize("rho", RHOS)
    def test_marginal_limits(self, rho):
        assert bvn_cdf(1.1, np.inf, rho) == pytest.approx(ndtr(1.1), abs=1e-12)
        assert bvn_cdf(np.inf, -0.6, rho) == pytest.approx(ndtr(-0.6), abs=1e-12)
        assert bvn_cdf(-np.inf, 0.3, rho) == 0.0
        assert bvn_cdf(0.3, -np.inf, rho) == 0.0
        assert bvn_cdf(np.inf, np.inf, rho) == 1.0

    @pytest.mark.parametrize("rho", RHOS)
    def test_symmetry(self, rho):
        assert bvn_cdf(0.4, -1.2, rho) == pytest.approx(bvn_cdf(-1.2, 0.4, rho), abs=1e-7)

    @pytest.mark.parametrize("rho", RHOS)
    @pytest.mark.parametrize("h,k", [(0.4, -1.2), (1.5, 0.9), (-0.7, -0.2), (2.1, -2.4)])
    def test_split_on_second_coordinate(self, rho, h, k):
        """P(X <= h, Y <= k) + P(X <= h, Y > k) = Phi(h); the second term is bvn_cdf(h, -k, -rho)."""
        total = bvn_cdf(h, k, rho) + bvn_cdf(h, -k, -rho)
        assert total == pytest.approx(ndtr(h), abs=1e-7)

    def test_matches_direct_integration(self):
        rho = 0.45
        norm = 1.0 / (2.0 * math.pi * math.sqrt(1.0 - rho * rho))

        def density(y, x):
            return norm * math.exp(-(x * x - 2.0 * rho * x * y + y * y) / (2.0 * (1.0 - rho * rho)))

        expected, _ = dblquad(density, -12.0, 1.2, -12.0, -0.3, epsabs=1e-11)
        assert bvn_cdf(1.2, -0.3, rho) == pytest.approx(expected, abs=1e-7)


class TestShapeAndMonotonicity:

    def test_scalar_input_returns_float(self):
        assert isinstance(bvn_cdf(0.1, 0.2, 0.3), float)

    def test_broadcasting(self):
        h = np.array([-1.0, 0.0, 1.0])[:, None]
        k = np.array([-0.5, 0.5])[None, :]
        out = bvn_cdf(h, k, 0.3)
        assert out.shape == (3, 2)
        for i in range(3):
            for j in range(2):
                assert out[i, j] == pytest.approx(bvn_cdf(h[i, 0], k[0, j], 0.3), abs=1e-15)

    @pytest.mark.parametrize("rho", [-0.95, 0.0, 0.6, 0.95])
    def test_nondecreasing_in_h(self, rho):
        grid = np.linspace(-4.0, 4.0, 81)
        values = bvn_cdf(grid, 0.25, rho)
        assert np.all(np.diff(values) >= -1e-12)

    def test_values_are_probabilities(self):
        rng = np.random.default_rng(0)
        h = rng.normal(scale=3.0, size=200)
        k = rng.normal(scale=3.0, size=200)
        for rho in (-0.99, 0.5, 0.99):
            out = bvn_cdf(h, k, rho)
            assert np.all((out >= 0.0) & (out <= 1.0))


class TestErrors:

    @pytest.mark.parametrize("rho", [1.0, -1.0, 1.5])
    def test_rho_outside_open_interval(self, rho):
        with pytest.raises(InputError):
            bvn_cdf(0.0, 0.0, rho)

    def test_nan_limit(self):
        with pytest.raises(InputError):
            bvn_cdf(np.nan, 0.0, 0.2)
