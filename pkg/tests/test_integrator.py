"""Time stepping, path simulation, ensembles, and restricted-ball tests."""

import numpy as np
import pytest

from spdelab.coefficients import (
    AllenCahnDrift,
    NoDiffusion,
    NoDrift,
    NoJump,
    PowerDrift,
    PowerDiffusion,
    ZLinearPowerJump,
)
from spdelab.elliptic import (
    SpatialDomain,
    assemble_operator,
    build_grid,
    constant_coefficient,
    lp_norm,
    principal_eigenpair,
    quadrature,
)
from spdelab.errors import ScenarioError
from spdelab.integrator import (
    PathState,
    Problem,
    SchemeConfig,
    _Stepper,
    restricted_ball_functionals,
    run_ensemble,
    simulate_path,
    step,
)
from spdelab.noise import (
    JumpMeasure,
    RngStream,
    factor_covariance,
    kernel_constant,
    kernel_gaussian,
)


def make_problem(
    n=100,
    L=np.pi,
    drift=None,
    diffusion=None,
    jump=None,
    cov_kernel=None,
    jumps=None,
    g=None,
    operator=True,
):
    grid, op = assemble_operator(SpatialDomain.interval(L), constant_coefficient(), n)
    eig = principal_eigenpair(op, grid)
    cov = factor_covariance(cov_kernel, grid) if cov_kernel else None
    if g is None:
        g = np.sin(np.pi * grid.points / L)
    return Problem(
        grid=grid,
        operator=op if operator else None,
        eig=eig,
        drift=drift or NoDrift(),
        diffusion=diffusion or NoDiffusion(),
        jump=jump or NoJump(),
        cov=cov,
        jumps=jumps,
        initial_field=g,
    )


class TestStep:
    def test_backward_euler_on_eigenfunction(self):
        """f = sigma = phi = 0 from the eigenfunction: one step divides by 1 + lambda1 dt."""
        problem = make_problem(n=200)
        problem.initial_field = problem.eig.phi.copy()
        cfg = SchemeConfig(dt=0.01, t_end=0.1)
        stepper = _Stepper(problem, cfg)
        state = PathState(0.0, problem.eig.phi.copy(), RngStream(0, 0))
        state, alive = step(state, stepper)
        assert alive
        expected = problem.eig.phi / (1.0 + problem.eig.lambda1 * cfg.dt)
        assert np.abs(state.u - expected).max() <= 1e-9 * expected.max()

    def test_dissipation_shrinks_mass(self):
        """Deterministic heat step decreases the integral of u (Dirichlet loss)."""
        problem = make_problem()
        cfg = SchemeConfig(dt=0.01, t_end=0.1)
        stepper = _Stepper(problem, cfg)
        state = PathState(0.0, problem.initial_field.copy(), RngStream(0, 0))
        mass0 = quadrature(problem.grid, state.u)
        state, _ = step(state, stepper)
        assert quadrature(problem.grid, state.u) < mass0

    def test_zero_fixed_point_of_bistable_drift(self):
        problem = make_problem(drift=AllenCahnDrift(), g=np.zeros(100))
        cfg = SchemeConfig(dt=0.01, t_end=1.0)
        stepper = _Stepper(problem, cfg)
        state = PathState(0.0, problem.initial_field.copy(), RngStream(0, 0))
        for _ in range(20):
            state, _ = step(state, stepper)
        assert np.all(state.u == 0.0)

    def test_threshold_must_exceed_initial(self):
        problem = make_problem(g=np.full(100, 10.0))
        with pytest.raises(ScenarioError):
            _Stepper(problem, SchemeConfig(dt=0.01, t_end=0.1, blowup_threshold=5.0))


class TestSimulatePath:
    def test_heat_decay_matches_analytic_rate(self):
        """Zero noise, g = fundamental mode: |u(t)|_L2 = exp(-lambda1 t)|g|_L2 to 2%."""
        problem = make_problem(n=200)
        cfg = SchemeConfig(dt=1e-4, t_end=0.1, n_checkpoints=11)
        res = simulate_path(problem, cfg, master_seed=1, path_index=0)
        g_l2 = lp_norm(problem.grid, problem.initial_field, 2.0)
        ratio = res.functionals["lp_2"][-1] / g_l2
        assert abs(ratio - np.exp(-problem.eig.lambda1 * 0.1)) <= 0.02 * ratio
        assert not res.blew_up

    def test_checkpoint_times_strictly_increasing(self):
        problem = make_problem()
        cfg = SchemeConfig(dt=1e-3, t_end=0.05, n_checkpoints=6)
        res = simulate_path(problem, cfg, 3, 0)
        assert np.all(np.diff(res.times) > 0)
        assert res.times[0] == 0.0

    def test_deterministic_given_seed_and_index(self):
        problem = make_problem(
            diffusion=PowerDiffusion(0.4, 1.0), cov_kernel=kernel_gaussian(1.0, 1.0)
        )
        cfg = SchemeConfig(dt=1e-3, t_end=0.05, n_checkpoints=6)
        a = simulate_path(problem, cfg, 42, 7)
        b = simulate_path(problem, cfg, 42, 7)
        for name in a.functionals:
            assert np.array_equal(a.functionals[name], b.functionals[name], equal_nan=True)

    def test_blowup_detected_and_frozen(self):
        """Supercritical power drift explodes before t_end and is recorded."""
        problem = make_problem(
            n=64, L=1.0, drift=PowerDrift(5.0, 0.0, 3.0), g=np.full(64, 3.0)
        )
        cfg = SchemeConfig(dt=1e-4, t_end=1.0, n_checkpoints=101, blowup_threshold=1e6)
        res = simulate_path(problem, cfg, 0, 0)
        assert res.blew_up
        assert res.blowup_time is not None and res.blowup_time <= cfg.t_end
        after = res.times > res.blowup_time
        assert np.all(np.isnan(res.functionals["max_u"][after]))

    def test_martingale_mean_drift(self):
        """No drift, no operator: compensated dynamics keep (u, phi) centered.

        The sample mean of u_hat(T) - u_hat(0) over independent paths stays
        within 5 SE of zero (both noise integrals are mean-zero).
        """
        jm = JumpMeasure.exponential(2.0, 1.0, 0.0, 12.0)
        problem = make_problem(
            n=40,
            L=1.0,
            operator=False,
            diffusion=PowerDiffusion(0.5, 1.0),
            jump=ZLinearPowerJump(0.5, 1.0),
            cov_kernel=kernel_gaussian(1.0, 2.0),
            jumps=jm,
            g=np.full(40, 1.0),
        )
        cfg = SchemeConfig(dt=1e-2, t_end=0.5, n_checkpoints=2)
        res = run_ensemble(problem, cfg, master_seed=11, n_paths=400)
        drift_mean = res.mean["u_hat"][-1] - res.mean["u_hat"][0]
        assert abs(drift_mean) <= 5 * res.se["u_hat"][-1]


class TestEnsemble:
    def test_equal_path_indices_zero_se(self):
        problem = make_problem(
            diffusion=PowerDiffusion(0.3, 1.0), cov_kernel=kernel_gaussian(1.0, 1.0)
        )
        cfg = SchemeConfig(dt=1e-3, t_end=0.02, n_checkpoints=3)
        res = run_ensemble(problem, cfg, 5, n_paths=2, path_indices=[4, 4])
        assert np.all(res.se["lp_2"][np.isfinite(res.se["lp_2"])] == 0.0)

    def test_zero_noise_zero_se(self):
        problem = make_problem()
        cfg = SchemeConfig(dt=1e-3, t_end=0.02, n_checkpoints=3)
        res = run_ensemble(problem, cfg, 5, n_paths=4)
        assert np.all(res.se["lp_2"] == 0.0)

    def test_thread_count_invariance(self):
        problem = make_problem(
            diffusion=PowerDiffusion(0.4, 1.0),
            cov_kernel=kernel_gaussian(1.0, 1.0),
            jump=ZLinearPowerJump(0.3, 1.0),
            jumps=JumpMeasure.exponential(1.0, 1.0, 0.0, 12.0),
        )
        cfg = SchemeConfig(dt=1e-3, t_end=0.05, n_checkpoints=6)
        serial = run_ensemble(problem, cfg, 9, n_paths=8, threads=1)
        threaded = run_ensemble(problem, cfg, 9, n_paths=8, threads=4)
        for name in serial.mean:
            assert np.array_equal(serial.mean[name], threaded.mean[name], equal_nan=True)
            assert np.array_equal(serial.se[name], threaded.se[name], equal_nan=True)

    def test_blowup_fraction_nondecreasing(self):
        problem = make_problem(
            n=64, L=1.0,
            drift=PowerDrift(5.0, 0.0, 3.0),
            diffusion=PowerDiffusion(0.5, 1.0),
            cov_kernel=kernel_gaussian(1.0, 1.0),
            g=np.full(64, 2.5),
        )
        cfg = SchemeConfig(dt=1e-4, t_end=0.5, n_checkpoints=26, blowup_threshold=1e6)
        res = run_ensemble(problem, cfg, 23, n_paths=16)
        assert np.all(np.diff(res.blowup_fraction) >= 0)
        assert res.blowup_fraction[-1] > 0
        assert np.all(res.n_alive + res.blowup_fraction * res.n_paths == res.n_paths)

    def test_small_noise_mean_tracks_comparison_ode(self):
        """Small-amplitude supercritical drift: ensemble mean of (u, phi)
        stays within 3 SE of the comparison dynamics over a short horizon."""
        from spdelab.blowup import ComparisonODE, comparison_ode_solve

        problem = make_problem(
            n=100, L=np.pi,
            drift=PowerDrift(1.0, -1.0, 8.0 / 3.0),
            diffusion=PowerDiffusion(0.05, 1.0),
            cov_kernel=kernel_constant(1.0),
            g=None,
        )
        problem.initial_field = 0.01 * np.sin(np.pi * problem.grid.points / np.pi)
        cfg = SchemeConfig(dt=1e-3, t_end=0.5, n_checkpoints=6)
        res = run_ensemble(problem, cfg, 31, n_paths=64)
        lam1 = problem.eig.lambda1
        ode = ComparisonODE("first_moment", lam1, a1=1.0, a2=-1.0, beta=8.0 / 3.0)
        traj = comparison_ode_solve(ode, res.mean["u_hat"][0], res.times)
        for j in range(1, len(res.times)):
            se = res.se["u_hat"][j]
            assert res.mean["u_hat"][j] >= traj.values[j] - 3 * se

    def test_requires_two_paths(self):
        problem = make_problem()
        with pytest.raises(ScenarioError):
            run_ensemble(problem, SchemeConfig(dt=1e-3, t_end=0.01), 0, n_paths=1)


@pytest.fixture(scope="module")
def ball():
    grid, op = assemble_operator(SpatialDomain.ball(1.0), constant_coefficient(), 120)
    eig = principal_eigenpair(op, grid)
    return grid, op, eig


class TestRestrictedBall:
    def test_zero_field(self, ball):
        grid, op, eig = ball
        out = restricted_ball_functionals(grid, np.zeros(grid.n_nodes), 1.0, eig, grid)
        assert out["u_hat"] == 0.0 and out["lp_2"] == 0.0

    def test_full_radius_matches_global(self, ball):
        """Degenerate restriction to the whole ball equals global functionals."""
        grid, op, eig = ball
        rng = np.random.default_rng(2)
        u = np.abs(rng.standard_normal(grid.n_nodes))
        out = restricted_ball_functionals(grid, u, 1.0, eig, grid)
        assert abs(out["u_hat"] - quadrature(grid, u * eig.phi)) <= 1e-10
        assert abs(out["lp_2"] - lp_norm(grid, u, 2.0)) <= 1e-10

    def test_inner_eigenfunction_self_overlap(self, ball):
        """u = phi_inner extended by zero: u_hat equals the direct weighted sum."""
        grid, op, eig = ball
        r_in = 0.5
        in_grid, in_op = assemble_operator(SpatialDomain.ball(r_in), constant_coefficient(), 60)
        in_eig = principal_eigenpair(in_op, in_grid)
        u = np.zeros(grid.n_nodes)
        mask = grid.points <= r_in
        xp = np.concatenate(([0.0], in_grid.points, [r_in]))
        fp = np.concatenate(([(4 * in_eig.phi[0] - in_eig.phi[1]) / 3.0], in_eig.phi, [0.0]))
        u[mask] = np.interp(grid.points[mask], xp, fp)
        out = restricted_ball_functionals(grid, u, r_in, in_eig, in_grid)
        direct = float(grid.weights[mask] @ (u[mask] * u[mask]))
        assert out["u_hat"] > 0
        assert abs(out["u_hat"] - direct) <= 1e-12 * max(direct, 1.0)

    def test_inner_ball_outside_domain_rejected(self, ball):
        grid, op, eig = ball
        with pytest.raises(ScenarioError):
            restricted_ball_functionals(grid, np.zeros(grid.n_nodes), 2.0, eig, grid)
