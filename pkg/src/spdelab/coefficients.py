"""Coefficient families for drift, diffusion, jumps, and initial data,
plus numerical checkers for the structural conditions behind positivity
and blow-up of the solutions.

Families are small frozen dataclasses with pure `evaluate` methods; power
laws with non-integer exponents clamp the base at zero so that transient
numerical negativity of the solution never produces complex values.

The checkers verify inequalities over dense sample grids (not symbolically)
and return per-condition verdicts with concrete witnesses for violations.
Condition names describe what they constrain:

  positivity checks:  drift_lower_bound, noise_dissipation_bound,
                      jump_growth_bound, initial_nonnegative
  explosion checks:   kernel_lower_bound, drift_nonnegative,
                      diffusion_minorant, jump_minorant,
                      growth_dominates_dissipation, initial_exceeds_level
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .elliptic import EigenPair, Grid, discrete_gradient, quadrature
from .errors import CoefficientError
from .noise import CovarianceKernel, JumpMeasure

__all__ = [
    "PowerDrift",
    "AllenCahnDrift",
    "PurePowerDrift",
    "NoDrift",
    "GradMixedDiffusion",
    "PowerDiffusion",
    "NoDiffusion",
    "ZLinearPowerJump",
    "NoJump",
    "ExpDecayInitial",
    "BumpInitial",
    "ConstantInitial",
    "SineModeInitial",
    "DeclaredConstants",
    "SamplePlan",
    "ConditionCheck",
    "ConditionReport",
    "check_positivity_conditions",
    "check_explosion_conditions",
    "interpolation_exponents",
    "fractional_power",
]


def fractional_power(u: np.ndarray, p: float) -> np.ndarray:
    """u**p with the base clamped at zero for non-integer exponents."""
    if float(p).is_integer():
        return np.asarray(u, dtype=float) ** int(p)
    return np.maximum(np.asarray(u, dtype=float), 0.0) ** p


# --- drift -------------------------------------------------------------------

@dataclass(frozen=True)
class PowerDrift:
    """f(u) = a1 * u^beta + a2 * u with beta > 1."""

    a1: float
    a2: float
    beta: float
    family = "power_drift"

    def __post_init__(self):
        if self.beta <= 1:
            raise CoefficientError("power drift needs beta > 1")

    def evaluate(self, u, x=None, t=0.0):
        return self.a1 * fractional_power(u, self.beta) + self.a2 * np.asarray(u, dtype=float)


@dataclass(frozen=True)
class AllenCahnDrift:
    """f(u) = u - u^3 (bistable reaction)."""

    family = "allen_cahn"

    def evaluate(self, u, x=None, t=0.0):
        u = np.asarray(u, dtype=float)
        return u * (1.0 - u * u)


@dataclass(frozen=True)
class PurePowerDrift:
    """f(u) = u^(1+alpha) with alpha > 0."""

    alpha: float
    family = "pure_power"

    def __post_init__(self):
        if self.alpha <= 0:
            raise CoefficientError("pure power drift needs alpha > 0")

    def evaluate(self, u, x=None, t=0.0):
        return fractional_power(u, 1.0 + self.alpha)


@dataclass(frozen=True)
class NoDrift:
    family = "none"

    def evaluate(self, u, x=None, t=0.0):
        return np.zeros_like(np.asarray(u, dtype=float))


# --- diffusion ---------------------------------------------------------------

@dataclass(frozen=True)
class GradMixedDiffusion:
    """sigma(u, grad u) = gamma0 * (u^3 + |grad u|^2)^(1/2), u clamped at 0."""

    gamma0: float
    family = "grad_mixed"

    def evaluate(self, u, grad_sq, x=None, t=0.0):
        base = np.maximum(np.asarray(u, dtype=float), 0.0) ** 3 + np.asarray(grad_sq, dtype=float)
        return self.gamma0 * np.sqrt(base)


@dataclass(frozen=True)
class PowerDiffusion:
    """sigma(u) = coef * u^exponent (tag distinguishes scenario spellings)."""

    coef: float
    exponent: float
    family: str = "power"

    def evaluate(self, u, grad_sq=None, x=None, t=0.0):
        return self.coef * fractional_power(u, self.exponent)


@dataclass(frozen=True)
class NoDiffusion:
    family = "none"

    def evaluate(self, u, grad_sq=None, x=None, t=0.0):
        return np.zeros_like(np.asarray(u, dtype=float))


# --- jump coefficient ---------------------------------------------------------

@dataclass(frozen=True)
class ZLinearPowerJump:
    """phi(u, z) = c0 * z * u^n; n >= 1."""

    c0: float
    n: float
    family = "z_linear_power"

    def __post_init__(self):
        if self.n < 1:
            raise CoefficientError("jump power n must be >= 1")
        if not np.isfinite(self.c0):
            raise CoefficientError("jump coefficient c0 must be finite")

    def evaluate(self, u, z, x=None, t=0.0):
        return self.c0 * z * fractional_power(u, self.n)

    def total_over_marks(self, u, marks, x=None, t=0.0):
        """Sum of the coefficient over all marks landing in one step."""
        if len(marks) == 0:
            return np.zeros_like(np.asarray(u, dtype=float))
        return self.c0 * float(np.sum(marks)) * fractional_power(u, self.n)

    def z_moment_profile(self, u, x=None, t=0.0):
        """Integrand profile so that int phi nu(dz) = m1 * profile(u)."""
        return self.c0 * fractional_power(u, self.n)


@dataclass(frozen=True)
class NoJump:
    family = "none"

    def evaluate(self, u, z, x=None, t=0.0):
        return np.zeros_like(np.asarray(u, dtype=float))

    def total_over_marks(self, u, marks, x=None, t=0.0):
        return np.zeros_like(np.asarray(u, dtype=float))

    def z_moment_profile(self, u, x=None, t=0.0):
        return np.zeros_like(np.asarray(u, dtype=float))


# --- initial data -------------------------------------------------------------

@dataclass(frozen=True)
class ExpDecayInitial:
    """g(x) = a0 * exp(-alpha |x|)."""

    a0: float
    alpha: float
    family = "exp_decay"

    def __post_init__(self):
        if self.a0 < 0:
            raise CoefficientError("initial amplitude must be nonnegative")

    def evaluate(self, grid: Grid) -> np.ndarray:
        return self.a0 * np.exp(-self.alpha * grid.radial_coordinate())


@dataclass(frozen=True)
class BumpInitial:
    """Compactly supported smooth bump centered at `center` with half-width
    `width`: amplitude * exp(1 - 1/(1 - s^2)) for s = |x - center|/width < 1."""

    amplitude: float
    center: float
    width: float
    family = "bump"

    def evaluate(self, grid: Grid) -> np.ndarray:
        s = np.abs(grid.radial_coordinate() - self.center) / self.width
        out = np.zeros(grid.n_nodes)
        inside = s < 1.0
        out[inside] = self.amplitude * np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
        return out


@dataclass(frozen=True)
class ConstantInitial:
    value: float
    family = "constant"

    def evaluate(self, grid: Grid) -> np.ndarray:
        return np.full(grid.n_nodes, self.value)


@dataclass(frozen=True)
class SineModeInitial:
    """amplitude * product of sin(pi x_k / L_k): the fundamental Dirichlet mode."""

    amplitude: float
    family = "sine"

    def evaluate(self, grid: Grid) -> np.ndarray:
        dom = grid.domain
        if dom.kind == "interval":
            return self.amplitude * np.sin(np.pi * grid.points / dom.length)
        if dom.kind == "box":
            out = np.full(grid.n_nodes, self.amplitude)
            for k, L in enumerate(dom.sides):
                out = out * np.sin(np.pi * grid.points[:, k] / L)
            return out
        r = grid.points
        return self.amplitude * np.sin(np.pi * r / dom.radius) / (np.pi * r / dom.radius)


# --- declared constants and sampling plans -------------------------------------

@dataclass(frozen=True)
class DeclaredConstants:
    """Constants the structural conditions assume to exist.

    The positivity checks need (b1, b2, m) for the noise-dissipation bound
    and (psi_coef, psi_power, mu) for the jump bound.  The explosion checks
    need kappa, the threshold level M, and the power-law minorants
    G(u) = G_coef u^G_power, K(u) = K_coef u^K_power,
    sigma0(u) = sigma0_coef u^sigma0_power.
    """

    b1: float | None = None
    b2: float | None = None
    m: float | None = None
    mu: float | None = None
    psi_coef: float | None = None
    psi_power: float | None = None
    kappa: float | None = None
    level_M: float | None = None
    G_coef: float | None = None
    G_power: float | None = None
    K_coef: float | None = None
    K_power: float | None = None
    sigma0_coef: float | None = None
    sigma0_power: float | None = None

    def G(self, u):
        return self.G_coef * fractional_power(u, self.G_power)

    def K(self, u):
        return self.K_coef * fractional_power(u, self.K_power)

    def sigma0(self, u):
        return self.sigma0_coef * fractional_power(u, self.sigma0_power)

    def psi(self, z):
        return self.psi_coef * np.asarray(z, dtype=float) ** self.psi_power


@dataclass(frozen=True)
class SamplePlan:
    """Dense sampling grids used to falsify the condition inequalities."""

    n_u: int = 200
    u_min: float = 1e-3
    u_max: float = 1e3
    n_xi: int = 50
    xi_max: float = 1e3
    n_z: int = 64
    n_fields: int = 100
    field_seed: int = 20210
    t_samples: tuple[float, ...] = (0.0,)

    def u_grid(self) -> np.ndarray:
        return np.geomspace(self.u_min, self.u_max, self.n_u)

    def xi_grid(self) -> np.ndarray:
        return np.concatenate(([0.0], np.geomspace(1e-3, self.xi_max, self.n_xi - 1)))


@dataclass
class ConditionCheck:
    """Single verdict: satisfied / violated / untestable, with a witness."""

    name: str
    verdict: str
    witness: dict | None = None
    note: str | None = None

    def as_dict(self) -> dict:
        out = {"name": self.name, "verdict": self.verdict}
        if self.witness is not None:
            out["witness"] = self.witness
        if self.note:
            out["note"] = self.note
        return out


@dataclass
class ConditionReport:
    checks: dict[str, ConditionCheck] = dc_field(default_factory=dict)

    def add(self, check: ConditionCheck):
        self.checks[check.name] = check

    def verdict(self, name: str) -> str:
        return self.checks[name].verdict

    def all_satisfied(self) -> bool:
        return all(c.verdict == "satisfied" for c in self.checks.values())

    def as_dict(self) -> dict:
        return {name: c.as_dict() for name, c in self.checks.items()}


def _untestable(name: str, why: str) -> ConditionCheck:
    return ConditionCheck(name, "untestable", note=why)


def check_positivity_conditions(
    drift,
    diffusion,
    jump,
    initial,
    grid: Grid,
    cov: CovarianceKernel | None,
    jump_measure: JumpMeasure | None,
    operator,
    declared: DeclaredConstants,
    plan: SamplePlan | None = None,
) -> ConditionReport:
    """Verify the structural conditions under which solutions stay nonnegative.

    All inequalities are checked on dense (u, xi, x, z) sample grids; a
    `violated` verdict carries the worst offending sample point.
    """
    plan = plan or SamplePlan()
    report = ConditionReport()
    u_grid = plan.u_grid()

    # drift lower bound: f(u) >= a1 u^beta + a2 u for the declared exponents
    if getattr(drift, "family", None) == "power_drift":
        a1, a2, beta = drift.a1, drift.a2, drift.beta
    elif getattr(drift, "family", None) == "allen_cahn":
        a1, a2, beta = -1.0, 1.0, 3.0
    elif getattr(drift, "family", None) == "pure_power":
        a1, a2, beta = 1.0, 0.0, 1.0 + drift.alpha
    else:
        a1 = a2 = beta = None
    if beta is None:
        report.add(_untestable("drift_lower_bound", "drift family declares no power-law bound"))
    else:
        is_int = float(beta).is_integer()
        odd = is_int and int(beta) % 2 == 1
        # sign convention on a1: alternating powers need a1 < 0, otherwise a1 > 0.
        # Non-integer exponents use the positive-solution reading (u >= 0, a1 > 0).
        sign_ok = (a1 < 0) if odd else (a1 > 0)
        samples = np.concatenate((-u_grid[::-1], u_grid)) if is_int else u_grid
        lhs = drift.evaluate(samples)
        rhs = a1 * fractional_power(samples, beta) + a2 * samples
        bad = lhs < rhs - 1e-12 * np.maximum(1.0, np.abs(rhs))
        if not sign_ok:
            report.add(ConditionCheck(
                "drift_lower_bound", "violated",
                witness={"a1": float(a1), "beta": float(beta),
                         "required_sign": "negative" if odd else "positive"},
                note="sign convention on the leading coefficient",
            ))
        elif np.any(bad):
            k = int(np.flatnonzero(bad)[0])
            report.add(ConditionCheck(
                "drift_lower_bound", "violated",
                witness={"u": float(samples[k]), "lhs": float(lhs[k]), "rhs": float(rhs[k])},
            ))
        else:
            note = "checked on u >= 0 only (non-integer exponent)" if not is_int else None
            report.add(ConditionCheck("drift_lower_bound", "satisfied", note=note))

    # noise-dissipation bound:
    # q(x,x)/2 sigma^2(u, xi, x) - sum a_ij xi_i xi_j <= b1 |u|^m + b2 u^2
    if declared.b1 is None or declared.b2 is None or declared.m is None:
        report.add(_untestable("noise_dissipation_bound", "b1, b2, m not declared"))
    elif cov is None:
        # zero noise: left side is -sum a_ij xi_i xi_j <= 0 <= right side
        report.add(ConditionCheck("noise_dissipation_bound", "satisfied",
                                  note="no Wiener noise configured"))
    else:
        xi_grid = plan.xi_grid()
        q_diag = np.diagonal(cov.Q)
        amin = operator.node_ellipticity
        worst = None
        for t in plan.t_samples:
            # sigma on (u, xi) grid; worst case over x via max q and min ellipticity
            U = u_grid[:, None]
            XI = xi_grid[None, :]
            sig = diffusion.evaluate(U, XI**2, None, t)
            rhs = declared.b1 * np.abs(U) ** declared.m + declared.b2 * U**2
            for k in np.argsort(q_diag)[::-1][: min(8, q_diag.size)]:
                lhs = 0.5 * q_diag[k] * sig**2 - amin[k] * XI**2
                margin = lhs - rhs
                i, j = np.unravel_index(np.argmax(margin), margin.shape)
                if margin[i, j] > 1e-10 * max(1.0, abs(rhs[i, 0])):
                    worst = {
                        "u": float(u_grid[i]), "xi": float(xi_grid[j]),
                        "node": int(k), "t": float(t),
                        "lhs": float(lhs[i, j]), "rhs": float(rhs[i, 0]),
                    }
                    break
            if worst:
                break
        if worst:
            report.add(ConditionCheck("noise_dissipation_bound", "violated", witness=worst))
        else:
            note = None
            if beta is not None and not (2 < declared.m < beta + 1):
                note = f"declared m = {declared.m:g} outside (2, beta+1)"
            report.add(ConditionCheck("noise_dissipation_bound", "satisfied", note=note))

    # jump growth bound: phi^2(u, z) <= psi(z) |u|^mu with integrable psi
    if getattr(jump, "family", None) == "none":
        report.add(ConditionCheck("jump_growth_bound", "satisfied", note="no jumps configured"))
    elif declared.mu is None or declared.psi_coef is None or declared.psi_power is None:
        report.add(_untestable("jump_growth_bound", "mu, psi not declared"))
    elif jump_measure is None:
        report.add(_untestable("jump_growth_bound", "no jump measure configured"))
    else:
        z_grid = np.linspace(jump_measure.z_min + 1e-12, jump_measure.z_max, plan.n_z)
        U = u_grid[:, None]
        Z = z_grid[None, :]
        lhs = jump.evaluate(U, Z) ** 2
        rhs = declared.psi(Z) * np.abs(U) ** declared.mu
        margin = lhs - rhs
        i, j = np.unravel_index(np.argmax(margin), margin.shape)
        psi_integral = None
        if margin[i, j] > 1e-10 * max(1.0, rhs[i, j]):
            report.add(ConditionCheck(
                "jump_growth_bound", "violated",
                witness={"u": float(u_grid[i]), "z": float(z_grid[j]),
                         "lhs": float(lhs[i, j]), "rhs": float(rhs[i, j])},
            ))
        else:
            from .noise import _gauss_legendre

            z, w = _gauss_legendre(jump_measure.z_min, jump_measure.z_max)
            psi_integral = float(w @ (declared.psi(z) * np.asarray(jump_measure.density(z), dtype=float)))
            note = f"integral of psi d(nu) over the window = {psi_integral:.6g}"
            if beta is not None and not (2 <= declared.mu < beta + 1):
                note += f"; declared mu = {declared.mu:g} outside [2, beta+1)"
            report.add(ConditionCheck("jump_growth_bound", "satisfied", note=note))

    # nonnegative initial datum
    g = initial.evaluate(grid)
    if np.all(g >= 0):
        report.add(ConditionCheck("initial_nonnegative", "satisfied"))
    else:
        k = int(np.argmin(g))
        report.add(ConditionCheck("initial_nonnegative", "violated",
                                  witness={"node": k, "g": float(g[k])}))
    return report


def _convex_by_second_differences(fn: Callable, u_grid: np.ndarray, tol: float = 1e-9):
    vals = np.asarray(fn(u_grid), dtype=float)
    second = vals[2:] - 2 * vals[1:-1] + vals[:-2]
    scale = np.maximum(np.abs(vals[1:-1]), 1.0)
    bad = second < -tol * scale
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0]) + 1
        return False, {"u": float(u_grid[k]), "second_difference": float(second[k - 1])}
    return True, None


def check_explosion_conditions(
    drift,
    diffusion,
    jump,
    initial,
    grid: Grid,
    cov: CovarianceKernel | None,
    jump_measure: JumpMeasure | None,
    eig: EigenPair,
    declared: DeclaredConstants,
    plan: SamplePlan | None = None,
) -> ConditionReport:
    """Verify the noise-driven blow-up conditions for the mean-square bound.

    The kernel lower bound is tested on random nonnegative fields through
    the full double quadrature; minorants and convexity requirements are
    checked pointwise on u-grids; the finiteness of the escape integral is
    delegated to the blow-up analysis quadrature.
    """
    from .blowup import mean_square_escape_integral

    plan = plan or SamplePlan()
    report = ConditionReport()
    u_grid = plan.u_grid()
    lam1 = eig.lambda1

    # kernel lower bound: (v, Qv)_w >= kappa (int v)^2 on nonnegative fields
    if declared.kappa is None:
        report.add(_untestable("kernel_lower_bound", "kappa not declared"))
    elif cov is None:
        report.add(_untestable("kernel_lower_bound", "no Wiener noise configured"))
    else:
        rng = np.random.default_rng(plan.field_seed)
        w = grid.weights
        WQW = w[:, None] * cov.Q * w[None, :]
        worst = None
        for trial in range(plan.n_fields):
            amp = 10.0 ** rng.uniform(-2, 2)
            v = np.abs(rng.standard_normal(grid.n_nodes)) * amp
            lhs = float(v @ (WQW @ v))
            rhs = declared.kappa * float(w @ v) ** 2
            if lhs < rhs * (1 - 1e-10):
                worst = {"trial": trial, "lhs": lhs, "rhs": rhs, "field_seed": plan.field_seed}
                break
        if worst:
            report.add(ConditionCheck("kernel_lower_bound", "violated", witness=worst))
        else:
            report.add(ConditionCheck(
                "kernel_lower_bound", "satisfied",
                note=f"{plan.n_fields} random nonnegative fields, kappa = {declared.kappa:g}",
            ))

    # drift nonnegative for u >= 0
    f_vals = drift.evaluate(u_grid)
    bad = f_vals < -1e-12 * np.maximum(np.abs(u_grid), 1.0)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        report.add(ConditionCheck("drift_nonnegative", "violated",
                                  witness={"u": float(u_grid[k]), "f": float(f_vals[k])}))
    else:
        report.add(ConditionCheck("drift_nonnegative", "satisfied"))

    # diffusion minorant: sigma(u) >= sigma0(u), sigma0^2(u) >= G(u^2), both convex
    if declared.sigma0_coef is None or declared.G_coef is None:
        report.add(_untestable("diffusion_minorant", "sigma0 or G not declared"))
    else:
        sig = diffusion.evaluate(u_grid, np.zeros_like(u_grid))
        sig0 = declared.sigma0(u_grid)
        bad = sig < sig0 * (1 - 1e-12)
        witness = None
        if np.any(bad):
            k = int(np.flatnonzero(bad)[0])
            witness = {"u": float(u_grid[k]), "sigma": float(sig[k]), "sigma0": float(sig0[k])}
        if witness is None:
            lhs = sig0**2
            rhs = declared.G(u_grid**2)
            bad = lhs < rhs * (1 - 1e-12)
            if np.any(bad):
                k = int(np.flatnonzero(bad)[0])
                witness = {"u": float(u_grid[k]), "sigma0_sq": float(lhs[k]), "G(u^2)": float(rhs[k])}
        if witness is None:
            for name, fn in (("sigma0", declared.sigma0), ("G", declared.G)):
                ok, w_cv = _convex_by_second_differences(fn, u_grid)
                if not ok:
                    witness = {"non_convex": name, **w_cv}
                    break
        if witness:
            report.add(ConditionCheck("diffusion_minorant", "violated", witness=witness))
        else:
            report.add(ConditionCheck("diffusion_minorant", "satisfied"))

    # jump minorant: phi(u, z) >= phi0(u, z) pointwise (families coincide here),
    # int phi0^2 nu(dz) >= K(u^2), phi0(., z) and K convex
    if declared.K_coef is None:
        report.add(_untestable("jump_minorant", "K not declared"))
    elif jump_measure is None or getattr(jump, "family", None) == "none":
        report.add(_untestable("jump_minorant", "no jumps configured"))
    else:
        from .noise import _gauss_legendre

        z, wz = _gauss_legendre(jump_measure.z_min, jump_measure.z_max)
        dens = np.asarray(jump_measure.density(z), dtype=float)
        phi_sq_int = np.array([
            float((wz * dens) @ (jump.evaluate(u, z) ** 2)) for u in u_grid
        ])
        rhs = declared.K(u_grid**2)
        bad = phi_sq_int < rhs * (1 - 1e-12)
        witness = None
        note = None
        if np.any(bad):
            k = int(np.flatnonzero(bad)[0])
            witness = {"u": float(u_grid[k]),
                       "phi0_sq_integral": float(phi_sq_int[k]), "K(u^2)": float(rhs[k])}
            # report how far the declared K is from the integral it should minorize
            ratio = float(np.max(rhs / np.maximum(phi_sq_int, 1e-300)))
            note = f"declared K exceeds int phi0^2 d(nu) by factor up to {ratio:.6g}"
        if witness is None:
            ok, w_cv = _convex_by_second_differences(declared.K, u_grid)
            if not ok:
                witness = {"non_convex": "K", **w_cv}
            else:
                z_mid = float(np.median(z))
                ok, w_cv = _convex_by_second_differences(lambda u: jump.evaluate(u, z_mid), u_grid)
                if not ok:
                    witness = {"non_convex": "phi0", "z": z_mid, **w_cv}
        if witness:
            report.add(ConditionCheck("jump_minorant", "violated", witness=witness, note=note))
        else:
            with np.errstate(over="ignore"):
                scale = float(phi_sq_int[-1] / max(rhs[-1], 1e-300))
            note = None
            if not np.isclose(scale, 1.0, rtol=1e-6):
                note = f"declared K differs from int phi0^2 d(nu) by factor {scale:.6g} at large u"
            report.add(ConditionCheck("jump_minorant", "satisfied", note=note))

    # growth dominates dissipation: kappa G(u) + K(u) > 2 lambda1 u beyond M,
    # with a finite escape integral
    if declared.level_M is None or declared.G_coef is None or declared.K_coef is None or declared.kappa is None:
        report.add(_untestable("growth_dominates_dissipation", "kappa, M, G, or K not declared"))
    else:
        M = declared.level_M
        u_hi = np.geomspace(M * (1 + 1e-9), M * 1e8, 400)
        den = declared.kappa * declared.G(u_hi) + declared.K(u_hi) - 2 * lam1 * u_hi
        if np.any(den <= 0):
            k = int(np.flatnonzero(den <= 0)[0])
            report.add(ConditionCheck(
                "growth_dominates_dissipation", "violated",
                witness={"u": float(u_hi[k]), "denominator": float(den[k])},
            ))
        else:
            outcome = mean_square_escape_integral(
                lam1, declared.kappa, declared.G, declared.K, M, M * (1 + 1e-6)
            )
            if outcome.applicable:
                report.add(ConditionCheck(
                    "growth_dominates_dissipation", "satisfied",
                    note=f"escape integral from M = {outcome.value:.6g}",
                ))
            else:
                report.add(ConditionCheck(
                    "growth_dominates_dissipation", "violated",
                    witness=outcome.witness, note=outcome.reason,
                ))

    # initial datum above the level: (g, phi) > M
    if declared.level_M is None:
        report.add(_untestable("initial_exceeds_level", "M not declared"))
    else:
        g = initial.evaluate(grid)
        g_hat = quadrature(grid, g * eig.phi)
        if g_hat > declared.level_M:
            report.add(ConditionCheck("initial_exceeds_level", "satisfied",
                                      note=f"(g, phi) = {g_hat:.6g} > M = {declared.level_M:g}"))
        else:
            report.add(ConditionCheck("initial_exceeds_level", "violated",
                                      witness={"g_hat": float(g_hat), "M": float(declared.level_M)}))
    return report


@dataclass(frozen=True)
class ExponentRecord:
    """Interpolation exponent alpha with the identity it satisfies:
    1/r = alpha/p + (1 - alpha)/q."""

    alpha: float
    r: float
    p: float
    q: float

    @property
    def identity_residual(self) -> float:
        return abs(1.0 / self.r - (self.alpha / self.p + (1.0 - self.alpha) / self.q))


def interpolation_exponents(m: float, beta: float | None = None) -> ExponentRecord:
    """Exponent of the L^p interpolation step used by the moment estimates.

    With `beta` given: alpha = 2(beta + 1 - m) / (m (beta - 1)) interpolating
    L^m between L^2 and L^(beta+1), valid for 2 < m < beta + 1.  Without
    `beta`: alpha = (2 - m)/m interpolating L^(2m) between L^2 and L^4,
    valid for 1 < m < 2.
    """
    if beta is not None:
        if not (2 < m < beta + 1):
            raise CoefficientError(f"need 2 < m < beta+1, got m={m:g}, beta={beta:g}")
        alpha = 2.0 * (beta + 1.0 - m) / (m * (beta - 1.0))
        return ExponentRecord(alpha, r=m, p=2.0, q=beta + 1.0)
    if not (1 < m < 2):
        raise CoefficientError(f"need 1 < m < 2, got m={m:g}")
    alpha = (2.0 - m) / m
    return ExponentRecord(alpha, r=2.0 * m, p=2.0, q=4.0)
