"""Figure rendering for the report paths (PNG files next to the CSV/JSON).

Figures are a convenience view of the delimited output, not part of the
bit-exact contract; runs can switch them off with --no-figures.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["save_eigen_figure", "save_ensemble_figure", "save_bound_figure",
           "save_lyapunov_figure"]


def save_eigen_figure(path: Path, grid, eig) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    x = grid.points if grid.points.ndim == 1 else grid.radial_coordinate()
    order = np.argsort(x)
    ax.plot(x[order], eig.phi[order], lw=1.5)
    ax.set_xlabel("x")
    ax.set_ylabel(r"$\varphi(x)$")
    ax.set_title(rf"principal eigenfunction, $\lambda_1$ = {eig.lambda1:.6g}")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_ensemble_figure(path: Path, ensemble) -> None:
    fig, (ax, ax2) = plt.subplots(
        2, 1, figsize=(7, 6), sharex=True, height_ratios=[3, 1]
    )
    t = ensemble.times
    for name in ensemble.functional_names():
        if name.startswith(("min_", "max_")):
            continue
        mean, se = ensemble.mean[name], ensemble.se[name]
        ax.plot(t, mean, lw=1.4, label=name)
        ok = np.isfinite(mean) & np.isfinite(se)
        ax.fill_between(t[ok], (mean - se)[ok], (mean + se)[ok], alpha=0.2)
    ax.set_yscale("log")
    ax.set_ylabel("ensemble mean (log scale)")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    ax2.step(t, ensemble.blowup_fraction, where="post", color="crimson")
    ax2.set_ylim(-0.02, 1.02)
    ax2.set_xlabel("t")
    ax2.set_ylabel("blow-up fraction")
    ax2.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_bound_figure(path: Path, report) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    if report.trajectory_times is not None:
        alive = np.isfinite(report.trajectory_values)
        ax.plot(report.trajectory_times[alive], report.trajectory_values[alive],
                lw=1.5, label="comparison dynamics")
        ax.set_yscale("log")
    if report.applicable and np.isfinite(report.t_upper):
        ax.axvline(report.t_upper, color="crimson", ls="--",
                   label=f"quadrature bound {report.t_upper:.4g}")
    if report.ode_escape_time is not None:
        ax.axvline(report.ode_escape_time, color="darkorange", ls=":",
                   label=f"escape time {report.ode_escape_time:.4g}")
    ax.axhline(report.threshold, color="gray", ls="-.", lw=1,
               label=f"threshold {report.threshold:.4g}")
    ax.set_xlabel("t")
    ax.set_ylabel("moment level")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_lyapunov_figure(path: Path, report) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    t = report.times
    damp = np.exp(-report.certificate.C * t)
    # reconstruct mean of damped Phi from the recorded drifts cumulatively
    ax.plot(t[: len(report.supermartingale_drifts) + 1],
            np.concatenate(([0.0], np.cumsum([d for d, _ in report.supermartingale_drifts]))),
            lw=1.5, label="cumulative drift of damped functional")
    ax.axhline(0.0, color="gray", lw=1)
    ax.set_xlabel("t")
    ax.set_ylabel(r"$\Delta\, \mathrm{mean}\, e^{-Ct}\Phi$")
    ax.set_title(f"supermartingale audit (C = {report.certificate.C:.4g})")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
