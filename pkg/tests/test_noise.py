"""Wiener field sampling, jump measure, and compensator tests."""

import numpy as np
import pytest

from spdelab.elliptic import SpatialDomain, build_grid
from spdelab.errors import CovarianceError
from spdelab.coefficients import ZLinearPowerJump
from spdelab.noise import (
    CovarianceKernel,
    JumpMeasure,
    RngStream,
    compensator_field,
    factor_covariance,
    kernel_brownian_min,
    kernel_constant,
    kernel_exp_dot,
    kernel_exp_dot_radial,
    kernel_gaussian,
    sample_jumps,
    sample_wiener_increment,
)


@pytest.fixture(scope="module")
def ball_grid():
    return build_grid(SpatialDomain.ball(1.0), 20)


@pytest.fixture(scope="module")
def unit_grid():
    return build_grid(SpatialDomain.interval(1.0), 20)


class TestCovariance:
    def test_exp_dot_radial_kernel_factorizes(self, ball_grid):
        """The spherically reduced exp(-rho x.y) kernel is PSD on ball nodes."""
        cov = factor_covariance(kernel_exp_dot_radial(1.0, 1.0, 1.0), ball_grid)
        assert np.all(cov.eigenvalues >= 0)
        err = np.abs(cov.factor @ cov.factor.T - cov.Q).max()
        assert err <= 1e-8 * np.abs(cov.Q).max()
        # kernel never drops below b0, so the declared lower bound holds
        assert cov.Q.min() >= 1.0 - 1e-12
        assert np.isfinite(cov.trace)

    def test_exp_dot_raw_kernel_is_indefinite(self, ball_grid):
        """exp(-rho x.y) itself fails PSD: the factorization must reject it."""
        with pytest.raises(CovarianceError, match="indefinite"):
            factor_covariance(kernel_exp_dot(1.0, 1.0), ball_grid)

    def test_constant_kernel_rank_one(self, unit_grid):
        cov = factor_covariance(kernel_constant(1.0), unit_grid)
        lam = np.sort(cov.eigenvalues)
        assert abs(lam[-1] - unit_grid.n_nodes) < 1e-10
        assert np.abs(lam[:-1]).max() < 1e-10

    def test_brownian_min_kernel_positive(self, unit_grid):
        cov = factor_covariance(kernel_brownian_min(), unit_grid)
        assert cov.eigenvalues.min() > 0

    def test_indefinite_kernel_rejected(self, unit_grid):
        # symmetric but indefinite: rank-one minus a constant shift
        def bad(x, y):
            return x * y - 0.5

        with pytest.raises(CovarianceError, match="indefinite"):
            factor_covariance(bad, unit_grid)

    def test_box_grid_pairwise(self):
        grid = build_grid(SpatialDomain.box((1.0, 1.0)), 8)
        cov = factor_covariance(kernel_gaussian(0.5, 2.0), grid)
        x0, x1 = grid.points[3], grid.points[17]
        expected = 0.5 * np.exp(-2.0 * np.sum((x0 - x1) ** 2))
        assert abs(cov.Q[3, 17] - expected) < 1e-12

    def test_declared_bound_checked(self, unit_grid):
        with pytest.raises(CovarianceError, match="exceeds declared bound"):
            factor_covariance(kernel_constant(2.0), unit_grid, q0=1.0)


class TestWienerSampling:
    def test_zero_dt_gives_zero_field(self, unit_grid):
        cov = factor_covariance(kernel_gaussian(1.0, 1.0), unit_grid)
        dw = sample_wiener_increment(cov, 0.0, RngStream(1, 0))
        assert np.all(dw == 0.0)

    def test_increment_covariance_calibration(self, ball_grid):
        """Sample covariance of 1e5 increments matches dt*q within 5 SE."""
        cov = factor_covariance(kernel_exp_dot_radial(1.0, 1.0, 1.0), ball_grid)
        dt, n_samp = 0.01, 100_000
        rng = RngStream(42, 0)
        xi = rng.generator.standard_normal((n_samp, cov.n))
        dw = np.sqrt(dt) * xi @ cov.factor.T
        sample_cov = dw.T @ dw / n_samp
        target = dt * cov.Q
        # SE of a Gaussian covariance entry: sqrt((q_ii q_jj + q_ij^2)/n) * dt
        diag = np.diagonal(cov.Q)
        se = dt * np.sqrt((np.outer(diag, diag) + cov.Q**2) / n_samp)
        assert np.all(np.abs(sample_cov - target) <= 5 * se)

    def test_increment_mean_is_zero(self, ball_grid):
        cov = factor_covariance(kernel_exp_dot_radial(1.0, 1.0, 1.0), ball_grid)
        dt, n_samp = 0.01, 100_000
        rng = RngStream(7, 3)
        xi = rng.generator.standard_normal((n_samp, cov.n))
        dw = np.sqrt(dt) * xi @ cov.factor.T
        se = np.sqrt(dt * np.diagonal(cov.Q) / n_samp)
        assert np.all(np.abs(dw.mean(axis=0)) <= 5 * se)

    def test_successive_increments_uncorrelated(self, unit_grid):
        cov = factor_covariance(kernel_gaussian(1.0, 1.0), unit_grid)
        dt, n_samp = 0.05, 50_000
        rng = RngStream(11, 0)
        prev = np.array([sample_wiener_increment(cov, dt, rng) for _ in range(2 * n_samp)])
        a, b = prev[0::2], prev[1::2]
        corr = (a * b).mean(axis=0)
        se = dt * np.diagonal(cov.Q) / np.sqrt(n_samp)
        assert np.all(np.abs(corr) <= 5 * se)


class TestReproducibility:
    def test_same_key_same_stream(self):
        a = RngStream(123456789, 17).standard_normal(1000)
        b = RngStream(123456789, 17).standard_normal(1000)
        assert np.array_equal(a, b)

    def test_different_index_different_stream(self):
        a = RngStream(123456789, 0).standard_normal(1000)
        b = RngStream(123456789, 1).standard_normal(1000)
        assert not np.array_equal(a, b)
        # crude independence check on the correlation
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.1


class TestJumpMeasure:
    def test_exponential_moments(self):
        jm = JumpMeasure.exponential(1.0, 1.0, 0.0, 12.0)
        assert abs(jm.rate - (1 - np.exp(-12.0))) < 1e-10
        assert abs(jm.m1 - (1 - 13 * np.exp(-12.0))) < 1e-9
        # m2 = int_0^12 z^2 e^-z dz = 2 - (z^2+2z+2)e^-z | = 2 - 170 e^-12
        assert abs(jm.m2 - (2 - 170 * np.exp(-12.0))) < 1e-9

    def test_auto_window_captures_second_moment(self):
        jm = JumpMeasure.exponential(1.0, 1.0)
        assert abs(jm.m2 - 2.0) <= 1e-5

    def test_zero_rate_gives_no_jumps(self):
        jm = JumpMeasure.exponential(0.0, 1.0, 0.0, 5.0)
        assert len(sample_jumps(jm, 1.0, RngStream(0, 0))) == 0

    def test_poisson_count_calibration(self):
        """Mean jump count over 1e5 unit steps within 5 SE of the rate."""
        jm = JumpMeasure.exponential(1.0, 1.0, 0.0, 12.0)
        rng = RngStream(5, 0)
        n_steps = 100_000
        counts = rng.generator.poisson(jm.rate * 1.0, size=n_steps)
        se = np.sqrt(jm.rate / n_steps)
        assert abs(counts.mean() - jm.rate) <= 5 * se

    def test_mark_mean_calibration(self):
        """Sample mean of marks matches m1/rate within 5 SE."""
        jm = JumpMeasure.exponential(1.0, 1.0, 0.0, 12.0)
        rng = RngStream(6, 0)
        marks = jm.sample_marks(rng.uniform(100_000))
        mean_target = jm.m1 / jm.rate
        var = jm.m2 / jm.rate - mean_target**2
        assert abs(marks.mean() - mean_target) <= 5 * np.sqrt(var / marks.size)


class TestCompensator:
    def test_z_linear_closed_form(self, unit_grid):
        """phi = c0 z u^3 against nu = e^-z dz: compensator c0 * m1 * u^3."""
        jm = JumpMeasure.exponential(1.0, 1.0)  # near-untruncated: m1 = 1
        coeff = ZLinearPowerJump(2.0, 3.0)
        u = np.linspace(0, 2, unit_grid.n_nodes)
        comp = compensator_field(jm, coeff, u)
        assert np.abs(comp - 2.0 * jm.m1 * u**3).max() < 1e-12
        assert abs(jm.m1 - 1.0) < 1e-5

    def test_zero_field_zero_compensator(self, unit_grid):
        jm = JumpMeasure.exponential(1.0, 1.0, 0.0, 12.0)
        comp = compensator_field(jm, ZLinearPowerJump(3.0, 2.0), np.zeros(unit_grid.n_nodes))
        assert np.all(comp == 0.0)

    def test_z_independent_coefficient(self, unit_grid):
        """Coefficient constant in z integrates to rate * value."""

        class FlatJump:
            family = "flat"

            def evaluate(self, u, z, x=None, t=0.0):
                return 0.7 * np.asarray(u, dtype=float)

        jm = JumpMeasure.exponential(1.0, 1.0, 0.0, 12.0)
        u = np.linspace(0.5, 1.5, unit_grid.n_nodes)
        comp = compensator_field(jm, FlatJump(), u)
        assert np.abs(comp - jm.rate * 0.7 * u).max() < 1e-8

    def test_quadrature_matches_closed_form(self, unit_grid):
        """Generic z-quadrature path agrees with the z-linear closed form."""

        class GenericJump:
            family = "generic"

            def evaluate(self, u, z, x=None, t=0.0):
                return 1.3 * z * np.asarray(u, dtype=float) ** 2

        jm = JumpMeasure.exponential(1.0, 1.0, 0.0, 12.0)
        u = np.linspace(0.1, 2.0, unit_grid.n_nodes)
        generic = compensator_field(jm, GenericJump(), u)
        closed = compensator_field(jm, ZLinearPowerJump(1.3, 2.0), u)
        assert np.abs(generic - closed).max() < 1e-10

    def test_martingale_increment_property(self, unit_grid):
        """Compensated jump sums have mean within 5 SE of zero at frozen u."""
        jm = JumpMeasure.exponential(1.0, 1.0, 0.0, 12.0)
        coeff = ZLinearPowerJump(1.0, 2.0)
        u = np.full(unit_grid.n_nodes, 1.2)
        dt = 0.2
        comp = compensator_field(jm, coeff, u)
        rng = RngStream(9, 0)
        n_steps = 40_000
        node = 7
        total = np.zeros(n_steps)
        for k in range(n_steps):
            marks = sample_jumps(jm, dt, rng)
            total[k] = coeff.total_over_marks(u, marks)[node] - dt * comp[node]
        se = total.std(ddof=1) / np.sqrt(n_steps)
        assert abs(total.mean()) <= 5 * se
