"""Generator breakdown, bound certificate, and global-existence tests."""

import numpy as np
import pytest

from spdelab.coefficients import (
    AllenCahnDrift,
    ConstantInitial,
    PowerDiffusion,
    ZLinearPowerJump,
)
from spdelab.elliptic import (
    SpatialDomain,
    assemble_operator,
    build_grid,
    constant_coefficient,
    discrete_gradient,
    lp_norm,
    principal_eigenpair,
    quadrature,
)
from spdelab.errors import CoefficientError
from spdelab.integrator import Problem, SchemeConfig
from spdelab.lyapunov import bound_certificate, generator_phi, global_experiment
from spdelab.noise import JumpMeasure, factor_covariance, kernel_constant, kernel_gaussian


@pytest.fixture(scope="module")
def interval():
    grid, op = assemble_operator(SpatialDomain.interval(2 * np.pi), constant_coefficient(), 400)
    eig = principal_eigenpair(op, grid)
    return grid, op, eig


class TestGeneratorBreakdown:
    def test_zero_field_all_zero(self, interval):
        grid, op, eig = interval
        gen = generator_phi(grid, np.zeros(grid.n_nodes), np.ones(grid.n_nodes),
                            2.0, 0.5, 0.5, 1.5, 1.5)
        assert gen.wiener_term == 0.0 and gen.dissipation == 0.0
        assert gen.reaction == 0.0 and gen.jump_term == 0.0 and gen.total == 0.0

    def test_parts_recombine(self, interval):
        grid, op, eig = interval
        rng = np.random.default_rng(0)
        v = np.abs(rng.standard_normal(grid.n_nodes))
        gen = generator_phi(grid, v, np.ones(grid.n_nodes), 2.0, 0.4, 0.3, 1.5, 1.3)
        total = gen.wiener_term + gen.dissipation + gen.reaction + gen.jump_term
        assert abs(gen.total - total) <= 1e-10 * max(abs(total), 1.0)
        assert gen.dissipation <= 0.0
        assert gen.jump_term >= 0.0

    def test_sign_change_on_amplitude_sweep(self, interval):
        """Scaling the eigenfunction: positive at small amplitude (the domain
        has lambda1 < 1 so reaction beats dissipation), negative at large
        (the quartic term), with exactly one sign change."""
        grid, op, eig = interval
        assert eig.lambda1 < 1.0
        q_diag = np.ones(grid.n_nodes)
        totals = []
        for t in np.geomspace(1e-2, 1e2, 201):
            gen = generator_phi(grid, t * eig.phi, q_diag, 2.0, 0.3, 0.3, 1.5, 1.5)
            totals.append(gen.total)
        signs = np.sign(totals)
        changes = np.sum(np.abs(np.diff(signs)) > 0)
        assert signs[0] > 0 and signs[-1] < 0
        assert changes == 1

    def test_eigen_identity_with_noise_off(self):
        """b = c = 0 at v = phi: dissipation + reaction quadratic parts
        combine to 2 (1 - lambda1) |phi|_L2^2 through the eigen identity."""
        grid, op = assemble_operator(SpatialDomain.interval(1.0), constant_coefficient(), 4000)
        eig = principal_eigenpair(op, grid)
        gen = generator_phi(grid, eig.phi, None, 0.0, 0.0, 0.0, 1.5, 1.5)
        l2sq = lp_norm(grid, eig.phi, 2.0) ** 2
        l4 = lp_norm(grid, eig.phi, 4.0) ** 4
        combined = gen.dissipation + gen.reaction + 2.0 * l4
        target = 2.0 * (1.0 - eig.lambda1) * l2sq
        assert abs(combined - target) <= 1e-6 * max(abs(target), 1.0)

    def test_exponent_validation(self, interval):
        grid, op, eig = interval
        with pytest.raises(CoefficientError):
            generator_phi(grid, np.ones(grid.n_nodes), None, 0.0, 0.0, 0.0, 2.0, 1.5)


class TestBoundCertificate:
    def test_noise_free_constant(self):
        cert = bound_certificate(0.0, 0.0, 1.5, 1.5, 1.0, 1.0)
        assert cert.C == 2.0
        assert cert.quartic_coeff <= -1.0

    def test_unit_parameters_give_eight(self):
        """m = n = 3/2, b = c = q0 = m2 = 1: eps = 1/3 and C = 2/eps + 2 = 8."""
        cert = bound_certificate(1.0, 1.0, 1.5, 1.5, 1.0, 1.0)
        assert abs(cert.epsilon - 1.0 / 3.0) < 1e-15
        assert abs(cert.C - 8.0) < 1e-12
        assert cert.quartic_coeff <= -1.0

    def test_young_split_on_random_fields(self, interval):
        grid, op, eig = interval
        bound_certificate(1.0, 1.0, 1.5, 1.5, 1.0, 1.0, grid=grid, n_fields=200)

    def test_generator_bounded_by_certificate(self, interval):
        """generator(Phi)(v) <= C |v|^2 + 1e-8 (1 + |v|^2) across amplitudes."""
        grid, op, eig = interval
        b, c, m, n = 0.4, 0.3, 1.5, 1.4
        jm_m2, q0 = 2.0, 1.0
        cert = bound_certificate(b, c, m, n, q0, jm_m2)
        rng = np.random.default_rng(123)
        q_diag = np.ones(grid.n_nodes)
        for _ in range(1000):
            amp = 10.0 ** rng.uniform(-3, 3)
            v = np.abs(rng.standard_normal(grid.n_nodes)) * amp
            gen = generator_phi(grid, v, q_diag, jm_m2, b, c, m, n)
            phi = lp_norm(grid, v, 2.0) ** 2
            assert gen.total <= cert.C * phi + 1e-8 * (1.0 + phi)

    def test_constant_decreases_with_epsilon(self):
        """C is nonincreasing as epsilon grows toward its cap."""
        b, c, m, n, q0, m2 = 0.7, 0.5, 1.5, 1.3, 1.2, 2.0
        from spdelab.coefficients import interpolation_exponents

        am = interpolation_exponents(m).alpha
        an = interpolation_exponents(n).alpha
        km = (1 - m * am) / (m * am)
        kn = (1 - n * an) / (n * an)
        eps_grid = np.linspace(0.01, 1.0, 50)
        C_vals = b**2 * q0 * eps_grid ** (-km) + c**2 * m2 * eps_grid ** (-kn) + 2.0
        assert np.all(np.diff(C_vals) <= 0)


class TestGlobalExperiment:
    def _problem(self, b=0.25, c=0.25, g_level=0.5, n=60):
        grid, op = assemble_operator(SpatialDomain.interval(1.0), constant_coefficient(), n)
        eig = principal_eigenpair(op, grid)
        cov = factor_covariance(kernel_gaussian(1.0, 1.0), grid) if b else None
        jm = JumpMeasure.exponential(1.0, 1.0, 0.0, 20.0) if c else None
        g = ConstantInitial(g_level).evaluate(grid)
        return Problem(
            grid=grid, operator=op, eig=eig,
            drift=AllenCahnDrift(),
            diffusion=PowerDiffusion(b, 1.5),
            jump=ZLinearPowerJump(c, 1.5),
            cov=cov, jumps=jm, initial_field=g,
        )

    def test_deterministic_bistable_stays_bounded(self):
        """b = c = 0: the deterministic equation relaxes into [0, 1]."""
        problem = self._problem(b=0.0, c=0.0)
        cfg = SchemeConfig(dt=5e-3, t_end=5.0, n_checkpoints=26)
        report = global_experiment(problem, cfg, master_seed=3, n_paths=2)
        assert report.blowup_fraction_final == 0.0
        assert report.sup_max_abs_u <= 1.5
        assert report.generator_margin_max <= 1e-8

    def test_noisy_run_no_explosion(self):
        problem = self._problem()
        cfg = SchemeConfig(dt=2e-3, t_end=2.0, n_checkpoints=21)
        report = global_experiment(problem, cfg, master_seed=4, n_paths=20)
        assert report.blowup_fraction_final == 0.0
        assert report.generator_margin_max <= 1e-8
        assert report.supermartingale_ok
        assert report.chebyshev_ok

    def test_wrong_drift_rejected(self):
        from spdelab.coefficients import PurePowerDrift
        from spdelab.errors import ScenarioError

        problem = self._problem()
        problem.drift = PurePowerDrift(1.0)
        with pytest.raises(ScenarioError):
            global_experiment(problem, SchemeConfig(dt=1e-2, t_end=0.1), 0, 2)
