"""Scenario files: strict TOML schema, round-trip serialization, assembly.

A scenario file fully describes one problem in sections

    [domain] [operator] [drift] [diffusion] [jump] [noise] [initial]
    [declared_constants] [integration] [monte_carlo]

Unknown sections or keys are hard errors: a silently ignored typo in a
coefficient name would invalidate an experiment.  Parsing and re-serializing
a file preserves every field (the writer emits the same restricted TOML
subset the parser accepts), which is what the run-manifest hashing relies on.

On ball domains the `exp_dot` covariance automatically uses its spherical
reduction (see `noise.kernel_exp_dot_radial`): the raw exp(-rho x.y) kernel
is indefinite, while its angular average is the covariance of the radially
averaged field and is positive semidefinite.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import coefficients as co
from . import noise as nz
from .elliptic import SpatialDomain, assemble_operator, principal_eigenpair
from .errors import ScenarioError
from .integrator import Problem, SchemeConfig

__all__ = ["ScenarioSpec", "load_scenario", "dumps_toml", "canned_scenario_path"]

_SCHEMA = {
    "domain": {"kind", "length", "sides", "radius", "nodes"},
    "operator": {"kind", "coef"},
    "drift": {"family", "a1", "a2", "beta", "alpha"},
    "diffusion": {"family", "gamma0", "coef", "exponent", "b", "m"},
    "jump": {"family", "c0", "n"},
    "noise": {"kernel", "b0", "rho", "q0", "measure", "weight", "decay", "z_min", "z_max"},
    "initial": {"family", "a0", "alpha", "amplitude", "center", "width", "value"},
    "declared_constants": {
        "b1", "b2", "m", "mu", "psi_coef", "psi_power", "kappa", "M",
        "G_coef", "G_power", "K_coef", "K_power", "sigma0_coef", "sigma0_power",
    },
    "integration": {
        "dt", "t_end", "theta", "blowup_threshold", "checkpoints", "p_norms",
        "inner_radius", "inner_nodes",
    },
    "monte_carlo": {"paths", "seed", "threads"},
}

_REQUIRED = ("domain", "drift", "diffusion", "jump", "noise", "initial",
             "integration", "monte_carlo")


def _need(section: dict, key: str, where: str):
    if key not in section:
        raise ScenarioError(f"missing field [{where}] {key}")
    return section[key]


@dataclass
class ScenarioSpec:
    """Validated scenario: raw sections plus typed accessors."""

    data: dict

    @staticmethod
    def from_dict(raw: dict) -> "ScenarioSpec":
        for name in raw:
            if name not in _SCHEMA:
                raise ScenarioError(f"unknown section [{name}]")
            for key in raw[name]:
                if key not in _SCHEMA[name]:
                    raise ScenarioError(f"unknown key {key!r} in section [{name}]")
        for name in _REQUIRED:
            if name not in raw:
                raise ScenarioError(f"missing section [{name}]")
        spec = ScenarioSpec(raw)
        spec.domain()  # validate eagerly
        spec.drift()
        spec.diffusion()
        spec.jump()
        spec.initial()
        spec.scheme_config()
        spec.monte_carlo()
        return spec

    @staticmethod
    def from_file(path: str | Path) -> "ScenarioSpec":
        with open(path, "rb") as fh:
            try:
                raw = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise ScenarioError(f"cannot parse scenario file {path}: {exc}") from exc
        return ScenarioSpec.from_dict(raw)

    # --- typed accessors -------------------------------------------------

    def domain(self) -> SpatialDomain:
        sec = self.data["domain"]
        kind = _need(sec, "kind", "domain")
        if kind == "interval":
            return SpatialDomain.interval(_need(sec, "length", "domain"))
        if kind == "box":
            return SpatialDomain.box(_need(sec, "sides", "domain"))
        if kind == "ball3d_radial":
            return SpatialDomain.ball(_need(sec, "radius", "domain"))
        raise ScenarioError(f"unknown domain kind {kind!r}")

    def nodes(self) -> int:
        return int(_need(self.data["domain"], "nodes", "domain"))

    def operator_coefficient(self):
        sec = self.data.get("operator", {"kind": "laplacian"})
        kind = sec.get("kind", "laplacian")
        if kind == "laplacian":
            return lambda x: 1.0
        if kind == "scaled_laplacian":
            c = float(_need(sec, "coef", "operator"))
            return lambda x: c
        raise ScenarioError(f"unknown operator kind {kind!r}")

    def drift(self):
        sec = self.data["drift"]
        fam = _need(sec, "family", "drift")
        if fam == "power_drift":
            return co.PowerDrift(float(_need(sec, "a1", "drift")),
                                 float(_need(sec, "a2", "drift")),
                                 float(_need(sec, "beta", "drift")))
        if fam == "allen_cahn":
            return co.AllenCahnDrift()
        if fam == "pure_power":
            return co.PurePowerDrift(float(_need(sec, "alpha", "drift")))
        if fam == "none":
            return co.NoDrift()
        raise ScenarioError(f"unknown drift family {fam!r}")

    def diffusion(self):
        sec = self.data["diffusion"]
        fam = _need(sec, "family", "diffusion")
        if fam == "grad_mixed":
            return co.GradMixedDiffusion(float(_need(sec, "gamma0", "diffusion")))
        if fam == "power":
            return co.PowerDiffusion(float(_need(sec, "coef", "diffusion")),
                                     float(_need(sec, "exponent", "diffusion")))
        if fam == "power_m":
            return co.PowerDiffusion(float(_need(sec, "b", "diffusion")),
                                     float(_need(sec, "m", "diffusion")), family="power_m")
        if fam == "none":
            return co.NoDiffusion()
        raise ScenarioError(f"unknown diffusion family {fam!r}")

    def jump(self):
        sec = self.data["jump"]
        fam = _need(sec, "family", "jump")
        if fam == "z_linear_power":
            return co.ZLinearPowerJump(float(_need(sec, "c0", "jump")),
                                       float(_need(sec, "n", "jump")))
        if fam == "none":
            return co.NoJump()
        raise ScenarioError(f"unknown jump family {fam!r}")

    def initial(self):
        sec = self.data["initial"]
        fam = _need(sec, "family", "initial")
        if fam == "exp_decay":
            return co.ExpDecayInitial(float(_need(sec, "a0", "initial")),
                                      float(_need(sec, "alpha", "initial")))
        if fam == "bump":
            return co.BumpInitial(float(_need(sec, "amplitude", "initial")),
                                  float(_need(sec, "center", "initial")),
                                  float(_need(sec, "width", "initial")))
        if fam == "constant":
            return co.ConstantInitial(float(_need(sec, "value", "initial")))
        if fam == "sine":
            return co.SineModeInitial(float(_need(sec, "amplitude", "initial")))
        raise ScenarioError(f"unknown initial family {fam!r}")

    def kernel(self, domain: SpatialDomain):
        sec = self.data["noise"]
        kind = _need(sec, "kernel", "noise")
        if kind == "none":
            return None
        if kind == "exp_dot":
            b0 = float(_need(sec, "b0", "noise"))
            rho = float(_need(sec, "rho", "noise"))
            if domain.kind == "ball3d_radial":
                return nz.kernel_exp_dot_radial(b0, rho, domain.radius)
            return nz.kernel_exp_dot(b0, rho)
        if kind == "gaussian":
            return nz.kernel_gaussian(float(_need(sec, "b0", "noise")),
                                      float(_need(sec, "rho", "noise")))
        if kind == "constant":
            return nz.kernel_constant(float(_need(sec, "q0", "noise")))
        if kind == "brownian_min":
            return nz.kernel_brownian_min()
        raise ScenarioError(f"unknown noise kernel {kind!r}")

    def jump_measure(self):
        sec = self.data["noise"]
        kind = sec.get("measure", "none")
        if kind == "none":
            return None
        if kind == "exponential":
            return nz.JumpMeasure.exponential(
                float(sec.get("weight", 1.0)),
                float(sec.get("decay", 1.0)),
                float(sec.get("z_min", 0.0)),
                float(sec["z_max"]) if "z_max" in sec else None,
            )
        raise ScenarioError(f"unknown jump measure {kind!r}")

    def declared_constants(self) -> co.DeclaredConstants:
        sec = self.data.get("declared_constants", {})
        return co.DeclaredConstants(
            b1=sec.get("b1"), b2=sec.get("b2"), m=sec.get("m"), mu=sec.get("mu"),
            psi_coef=sec.get("psi_coef"), psi_power=sec.get("psi_power"),
            kappa=sec.get("kappa"), level_M=sec.get("M"),
            G_coef=sec.get("G_coef"), G_power=sec.get("G_power"),
            K_coef=sec.get("K_coef"), K_power=sec.get("K_power"),
            sigma0_coef=sec.get("sigma0_coef"), sigma0_power=sec.get("sigma0_power"),
        )

    def scheme_config(self, dt=None, t_end=None) -> SchemeConfig:
        sec = self.data["integration"]
        return SchemeConfig(
            dt=float(dt if dt is not None else _need(sec, "dt", "integration")),
            t_end=float(t_end if t_end is not None else _need(sec, "t_end", "integration")),
            theta=float(sec.get("theta", 1.0)),
            blowup_threshold=float(sec.get("blowup_threshold", 1e8)),
            n_checkpoints=int(sec.get("checkpoints", 51)),
            p_norms=tuple(float(p) for p in sec.get("p_norms", [1.0, 2.0])),
        )

    def monte_carlo(self) -> dict:
        sec = self.data["monte_carlo"]
        return {
            "paths": int(_need(sec, "paths", "monte_carlo")),
            "seed": int(_need(sec, "seed", "monte_carlo")),
            "threads": int(sec.get("threads", 1)),
        }

    def assemble(self) -> Problem:
        """Build grid, operator, eigenpair, noise factor, and initial field."""
        domain = self.domain()
        grid, op = assemble_operator(domain, self.operator_coefficient(), self.nodes())
        eig = principal_eigenpair(op, grid)
        kernel = self.kernel(domain)
        cov = nz.factor_covariance(kernel, grid) if kernel is not None else None
        jm = self.jump_measure()
        g = self.initial().evaluate(grid)
        inner_eig = inner_grid = None
        inner_radius = self.data["integration"].get("inner_radius")
        if inner_radius is not None:
            if domain.kind == "box":
                raise ScenarioError("inner-ball functionals not supported on boxes")
            inner_radius = float(inner_radius)
            inner_n = int(self.data["integration"].get("inner_nodes", self.nodes()))
            if domain.kind == "ball3d_radial":
                inner_dom = SpatialDomain.ball(inner_radius)
            else:
                inner_dom = SpatialDomain.interval(inner_radius)
            inner_grid, inner_op = assemble_operator(
                inner_dom, self.operator_coefficient(), inner_n
            )
            inner_eig = principal_eigenpair(inner_op, inner_grid)
        diffusion = self.diffusion()
        if cov is None and getattr(diffusion, "family", "none") != "none":
            diffusion = co.NoDiffusion()
        jump = self.jump()
        if jm is None and getattr(jump, "family", "none") != "none":
            jump = co.NoJump()
        return Problem(
            grid=grid, operator=op, eig=eig,
            drift=self.drift(), diffusion=diffusion, jump=jump,
            cov=cov, jumps=jm, initial_field=g,
            inner_eig=inner_eig, inner_grid=inner_grid, inner_radius=inner_radius,
        )

    def to_dict(self) -> dict:
        return {k: dict(v) for k, v in self.data.items()}


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise ScenarioError(f"cannot serialize value {v!r}")


def dumps_toml(data: dict) -> str:
    """Serialize the restricted scenario schema back to TOML."""
    lines = []
    for section, entries in data.items():
        lines.append(f"[{section}]")
        for key, value in entries.items():
            lines.append(f"{key} = {_toml_value(value)}")
        lines.append("")
    return "\n".join(lines)


def load_scenario(path: str | Path) -> ScenarioSpec:
    return ScenarioSpec.from_file(path)


def canned_scenario_path(name: str) -> Path:
    """Path of one of the shipped scenario files (no .toml suffix needed)."""
    base = Path(__file__).parent / "scenarios"
    p = base / (name if name.endswith(".toml") else f"{name}.toml")
    if not p.exists():
        available = ", ".join(sorted(q.stem for q in base.glob("*.toml")))
        raise ScenarioError(f"unknown canned scenario {name!r} (available: {available})")
    return p
