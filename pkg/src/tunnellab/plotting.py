"""Figures for the CLI report path.

Uses the non-interactive Agg backend; every function takes the data it
draws and a destination path, and returns the path written.
"""
from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 120,
    "savefig.bbox": "tight",
    # keep files reproducible
    "svg.hashsalt": "tunnellab",
}


def figsize(width: float = 5.0, ratio: float | None = None):
    if ratio is None:
        ratio = (math.sqrt(5.0) - 1.0) / 2.0
    return width, width * ratio


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def amplitudes_figure(E, absT2, absR2, v0, path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize())
        ax.plot(E, absT2, label=r"$|T|^2$")
        ax.plot(E, absR2, label=r"$|L|^2$", ls="--")
        ax.axvline(v0, color="0.6", lw=0.8, ls=":")
        ax.set_xlabel("E")
        ax.set_ylabel("probability")
        ax.set_ylim(-0.02, 1.02)
        ax.legend(frameon=False)
        return _save(fig, path)


def delays_figure(E, tau_tr, tau_left, v0, path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize())
        ax.plot(E, tau_tr, label=r"$\tau_{tr}$")
        ax.plot(E, tau_left, label=r"$\tau_{L}$", ls="--")
        ax.axvline(v0, color="0.6", lw=0.8, ls=":")
        ax.axhline(0.0, color="0.8", lw=0.6)
        ax.set_xlabel("E")
        ax.set_ylabel("delay")
        ax.legend(frameon=False)
        return _save(fig, path)


def hartman_figure(kappa_a, dwell, saturation, v_eff_over_v, path) -> Path:
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=figsize(7.0, 0.4))
        ax1.semilogx(kappa_a, dwell, "o-", label="dwell in support")
        if saturation is not None:
            ax1.axhline(saturation, color="0.5", ls=":", label="saturation")
        ax1.ticklabel_format(axis="y", useOffset=False)
        ax1.set_xlabel(r"$\kappa a$")
        ax1.set_ylabel("time")
        ax1.legend(frameon=False)
        ax2.loglog(kappa_a, v_eff_over_v, "s-")
        ax2.set_xlabel(r"$\kappa a$")
        ax2.set_ylabel(r"$v_{eff}/v$")
        return _save(fig, path)


def classical_figure(E, tau_cl, transition, path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize())
        ax.plot(E, tau_cl, label=r"$\tau_{cl}$")
        ax.plot(E, transition, ls="--", label="transition term")
        ax.set_xlabel("E")
        ax.set_ylabel("delay")
        ax.legend(frameon=False)
        return _save(fig, path)


def semiclassical_figure(ratios, discrepancy, path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize())
        ax.loglog(ratios, discrepancy, "o-")
        ax.set_xlabel(r"$\lambda / b$")
        ax.set_ylabel("relative discrepancy")
        return _save(fig, path)


def wavepacket_figure(t, P_R, R_values, x, rho_initial, rho_final, potential, path) -> Path:
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(2, 1, figsize=figsize(6.0, 0.9))
        for R, p in zip(R_values, P_R):
            ax1.plot(t, p, label=f"R = {R:g}")
        ax1.set_xlabel("t")
        ax1.set_ylabel(r"$P_R(t)$")
        ax1.legend(frameon=False)
        ax2.plot(x, rho_initial, label="initial")
        ax2.plot(x, rho_final, label="final")
        vmax = float(np.max(potential))
        if vmax > 0:
            scale = float(np.max(rho_initial)) / vmax
            ax2.fill_between(x, potential * scale, color="0.85", label="V (scaled)")
        ax2.set_xlabel("x")
        ax2.set_ylabel(r"$|\psi|^2$")
        ax2.legend(frameon=False)
        return _save(fig, path)
