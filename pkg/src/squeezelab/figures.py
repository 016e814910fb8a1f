"""Headless SVG rendering for scan outputs.

Every function takes plain arrays (already computed by the scan layer),
draws one figure with matplotlib's Agg backend, and writes an SVG next to
the CSV it illustrates.  No display, no styling dependencies beyond
matplotlib defaults; the point is an inspectable picture per data table,
not publication typography.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_PT = 1e12  # Tesla -> picotesla


def _finish(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


def _axes(xlabel: str, ylabel: str, title: str = ""):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    return fig, ax


def plot_scaling(n_tot, direct_db, direct_err, rel_db, rel_err, path, *, title=""):
    """Squeezing (dB) versus total analyzed atom number, direct and relative."""
    fig, ax = _axes("total atom number", "squeezing (dB)", title)
    ax.axhline(0.0, color="k", lw=0.8)
    ax.errorbar(n_tot, direct_db, yerr=direct_err, fmt="s-", capsize=3, label="direct")
    mask = ~np.isnan(np.asarray(rel_db, dtype=float))
    ax.errorbar(
        np.asarray(n_tot, dtype=float)[mask],
        np.asarray(rel_db, dtype=float)[mask],
        yerr=np.asarray(rel_err, dtype=float)[mask],
        fmt="o-",
        capsize=3,
        label="relative",
    )
    ax.set_xscale("log")
    ax.legend()
    return _finish(fig, path)


def plot_tomography(angles_deg, direct_db, rel_db, fit_angles, fit_db, path, *, title=""):
    """Normalized variance (dB) versus tomography rotation angle."""
    fig, ax = _axes("tomography angle (deg)", "normalized variance (dB)", title)
    ax.axhline(0.0, color="k", lw=0.8)
    ax.plot(angles_deg, direct_db, "s", label="direct")
    ax.plot(angles_deg, rel_db, "o", label="relative")
    ax.plot(fit_angles, fit_db, "-", lw=1, label="fit (relative)")
    ax.legend()
    return _finish(fig, path)


def plot_fringe(phases_deg, mean_z, sem_z, fit_phases, fit_z, path, *, title=""):
    fig, ax = _axes("readout phase (deg)", "mean imbalance z", title)
    ax.errorbar(phases_deg, mean_z, yerr=sem_z, fmt="o", capsize=3, label="shots")
    ax.plot(fit_phases, fit_z, "-", lw=1, label="sinusoid fit")
    ax.legend()
    return _finish(fig, path)


def plot_sensitivity(t_int, sigma_b, ci, sql, sql_det, path, *, title=""):
    """Field sensitivity versus interrogation time with the unentangled limits."""
    t_ms = np.asarray(t_int, dtype=float) * 1e3
    fig, ax = _axes("interrogation time (ms)", "field resolution (pT)", title)
    ax.errorbar(t_ms, np.asarray(sigma_b) * _PT, yerr=np.asarray(ci) * _PT,
                fmt="o-", capsize=3, label="measured")
    ax.plot(t_ms, np.asarray(sql) * _PT, "k--", lw=1, label="projection-noise limit")
    ax.plot(t_ms, np.asarray(sql_det) * _PT, ":", lw=1, label="limit incl. detection noise")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.legend()
    return _finish(fig, path)


def plot_contrast(t_int, mean_contrast, single_shot, path, *, title=""):
    """Fringe contrast of the mean versus per-shot contrast, against hold time."""
    t_ms = np.asarray(t_int, dtype=float) * 1e3
    fig, ax = _axes("interrogation time (ms)", "fringe contrast", title)
    ax.plot(t_ms, mean_contrast, "o-", label="contrast of mean fringe")
    ax.plot(t_ms, single_shot, "s--", label="mean single-shot contrast")
    ax.set_xscale("log")
    ax.set_ylim(0, 1.05)
    ax.legend()
    return _finish(fig, path)


def plot_gradient_series(t_int, mean_dz, sem_dz, slope_per_s, path, *, title=""):
    """Differential imbalance versus interrogation time with the linear fit."""
    t = np.asarray(t_int, dtype=float)
    fig, ax = _axes("interrogation time (ms)", "differential imbalance δz", title)
    ax.errorbar(t * 1e3, mean_dz, yerr=sem_dz, fmt="o", capsize=3, label="shots")
    tt = np.linspace(0.0, float(t.max()) * 1.05, 50)
    sign = -1.0 if np.mean(mean_dz) < 0 else 1.0
    ax.plot(tt * 1e3, sign * slope_per_s * tt, "-", lw=1, label="linear fit")
    ax.legend()
    return _finish(fig, path)


def plot_baseline_scan(baselines, sigma, sql, kinds, path, *, title=""):
    """Gradient sensitivity versus gradiometer baseline, pairwise and summed."""
    baselines = np.asarray(baselines, dtype=float)
    sigma = np.asarray(sigma, dtype=float) * _PT
    sql = np.asarray(sql, dtype=float) * _PT
    kinds = np.asarray(kinds)
    fig, ax = _axes("baseline (µm)", "gradient resolution (pT/µm)", title)
    for kind, marker, label in (("pair", "o", "single-well pairs"), ("summed", "s", "summed windows")):
        m = kinds == kind
        if m.any():
            ax.plot(baselines[m], sigma[m], marker, label=label)
            ax.plot(baselines[m], sql[m], marker, mfc="none", ls="--", lw=0.8,
                    label=f"{label} (unentangled)")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.legend(fontsize=8)
    return _finish(fig, path)


def plot_technical_noise(curves, path, *, title=""):
    """Technical-noise coefficient versus tomography angle for each variant.

    curves: iterable of (label, alphas_deg, beta2, beta2_err); values plotted
    in coherent-state units for a 1e4-atom reference ensemble.
    """
    fig, ax = _axes("tomography angle (deg)", "technical variance (CSS units, N=1e4)", title)
    for label, alphas, beta2, err in curves:
        scale = 1e4
        ax.errorbar(alphas, np.asarray(beta2) * scale, yerr=np.asarray(err) * scale,
                    fmt="o-", capsize=3, label=label)
    ax.axhline(0.0, color="k", lw=0.8)
    ax.legend()
    return _finish(fig, path)


def plot_size_characterization(n_atoms, xi2_n_db, alpha_min_deg, var_max_db, path, *, title=""):
    """Per-well squeezing figures versus ensemble size (three stacked panels)."""
    fig, axes = plt.subplots(3, 1, figsize=(6.0, 7.5), sharex=True)
    axes[0].plot(n_atoms, xi2_n_db, "o-")
    axes[0].set_ylabel("min. number squeezing (dB)")
    axes[1].plot(n_atoms, alpha_min_deg, "o-")
    axes[1].set_ylabel("optimal angle (deg)")
    axes[2].plot(n_atoms, var_max_db, "o-")
    axes[2].set_ylabel("max. variance (dB)")
    axes[2].set_xlabel("atom number")
    for ax in axes:
        ax.grid(True, alpha=0.3)
    if title:
        axes[0].set_title(title)
    return _finish(fig, path)


def plot_loss_floor(times, squeezing_db, stderr_db, mean_atoms, path, *, title=""):
    """Attainable squeezing versus evolution time under atom loss."""
    t_ms = np.asarray(times, dtype=float) * 1e3
    fig, ax = _axes("evolution time (ms)", "metrological squeezing (dB)", title)
    ax.errorbar(t_ms, squeezing_db, yerr=stderr_db, fmt="o-", capsize=3, label="with loss")
    ax.axhline(0.0, color="k", lw=0.8)
    floor = float(np.min(squeezing_db))
    ax.axhline(floor, color="r", ls=":", lw=1, label=f"floor {floor:.1f} dB")
    twin = ax.twinx()
    twin.plot(t_ms, mean_atoms, "s--", color="gray", alpha=0.6)
    twin.set_ylabel("mean atom number", color="gray")
    ax.legend()
    return _finish(fig, path)
