"""Preset pipelines that regenerate the benchmark datasets end to end.

Each target tag names one dataset: it builds the preset run configuration,
executes the simulation and analysis chain, and writes its data table(s),
an SVG rendering, and a summary JSON under ``<out>/<target>/``.  Target
tags are part of the CLI contract; the mapping is:

=============  ==============================================================
fig1b          squeezing vs total analyzed atom number (direct and relative)
fig1c          normalized variance vs tomography angle, 25-well array
fig2b          normalized variance vs tomography angle, two 500-atom wells
fig2c          swap-Ramsey fringe at a 1 us hold; fitted visibility
fig3b          field resolution vs interrogation time, with projection limits
fig4a          differential fringe vs interrogation time under a gradient
fig4b          gradient resolution vs gradiometer baseline
supp2          per-well squeezing figures vs ensemble size (exact moments)
supp4          technical-noise tomography: echo on/off, pulse noise on/off
supp5          long-interrogation scan: enhancement loss vs fringe contrast
loss-floor     trajectory-averaged squeezing vs twisting time under loss
=============  ==============================================================

All presets are deterministic given their master seed; ``shots`` and
``seed`` overrides replace the preset values uniformly.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import figures, rng as streams, scans
from .config import EnvironmentConfig, RunConfig, config_to_dict
from .errors import ConfigError
from .estimators import xi2_direct, xi2_rel
from .lattice import AtomNumberLaw, LatticeConfig, RegionSpec
from .magnetometry import SQL_ANCHOR_T_INT, T_PI_SWAP
from .scans import ScanTable

# Shared preset anchors -------------------------------------------------------

ANCHOR_T_HOLD = SQL_ANCHOR_T_INT - 2.0 * T_PI_SWAP  # hold giving the reference t_int
ARRAY_LAW = AtomNumberLaw(kind="uniform", low=392, high=592)  # ~12300 atoms over 25 wells
PAIR_LAW = AtomNumberLaw(kind="fixed", low=500)
GRADIENT_T_PER_UM = 19.6e-12
ARRAY_TOMO_ANGLE_DEG = -10.0  # optimal readout rotation for the 25-well array
FRINGE_VISIBILITY = 0.98  # preset fringe contrast for gradient inversion

_TOMO_ANGLES = list(range(-90, 91, 15))
_SUPP5_T_INT = (342e-6, 1e-3, 2e-3, 3.42e-3, 6e-3)


def _array_config(n_shots: int, seed: int, *, n_sites: int = 25, loss_on: bool = True) -> RunConfig:
    config = RunConfig(
        lattice=LatticeConfig(n_sites=n_sites, atom_number_law=ARRAY_LAW),
        n_shots=n_shots,
        master_seed=seed,
    )
    if loss_on:
        config = replace(config, loss=replace(config.loss, enabled=True))
    return config


def _pair_config(n_shots: int, seed: int, *, loss_on: bool = True) -> RunConfig:
    config = RunConfig(
        lattice=LatticeConfig(n_sites=2, atom_number_law=PAIR_LAW),
        n_shots=n_shots,
        master_seed=seed,
    )
    if loss_on:
        config = replace(config, loss=replace(config.loss, enabled=True))
    return config


def _ramsey_spec(t_hold: float, phase_deg: float = 90.0, **extra) -> dict:
    spec = {
        "kind": "ramsey",
        "t_hold_s": float(t_hold),
        "readout_phase_deg": float(phase_deg),
        "readout_ideal": True,
    }
    spec.update(extra)
    return spec


# Output plumbing -------------------------------------------------------------


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=float) + "\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class _TargetOutput:
    """Collects the files a target emits and writes the closing manifest."""

    def __init__(self, out_root: str | Path, target: str):
        self.target = target
        self.dir = Path(out_root) / target
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files: list[Path] = []

    def add_table(self, table: ScanTable, name: str) -> Path:
        path = table.write_csv(self.dir / name)
        if table.meta:
            meta_path = self.dir / (Path(name).stem + "_meta.json")
            _write_json(meta_path, table.meta)
            self.files.append(meta_path)
        self.files.append(path)
        return path

    def figure_path(self, name: str = "figure.svg") -> Path:
        path = self.dir / name
        self.files.append(path)
        return path

    def finish(self, summary: dict, configs: list[RunConfig] | None = None) -> dict:
        summary_path = self.dir / "summary.json"
        _write_json(summary_path, summary)
        self.files.append(summary_path)
        if configs:
            config_path = self.dir / "configs.json"
            _write_json(config_path, {"configs": [config_to_dict(c) for c in configs]})
            self.files.append(config_path)
        manifest = {
            "target": self.target,
            "outputs": {
                p.name: {"sha256": _sha256(p), "bytes": p.stat().st_size}
                for p in self.files
                if p.exists()
            },
        }
        _write_json(self.dir / "manifest.json", manifest)
        return {"target": self.target, "dir": str(self.dir), **summary}


# Targets ---------------------------------------------------------------------


def _target_fig1b(out: _TargetOutput, shots: int, seed: int, workers: int) -> dict:
    """Squeezing vs analyzed atom number: nested centered windows of the array."""
    config = _array_config(shots, seed)
    config = replace(
        config,
        sequence={**config.sequence, "tomography_angle_deg": ARRAY_TOMO_ANGLE_DEG},
    )
    records = scans._records(config, workers)
    n_sites = records[0].n_sites
    center = (n_sites - 1) // 2
    sigma = config.noise.detection_sigma
    rows = []
    for k in range(0, center + 1):
        window = tuple(range(center - k, center + k + 1))
        whole = RegionSpec((window,))
        boot = streams.substream(seed, streams.BOOTSTRAP, k)
        direct = xi2_direct(records, whole, sigma, n_resamples=200, rng=boot)
        n_tot = scans._mean_total_detected(records, whole)
        if len(window) >= 2:
            split = len(window) // 2
            left = RegionSpec((window[:split],))
            right = RegionSpec((window[split:],))
            rel = xi2_rel(records, left, right, sigma, n_resamples=200, rng=boot)
            rel_value, rel_ci = rel.value, rel.ci_halfwidth
        else:
            rel_value, rel_ci = float("nan"), float("nan")
        rows.append(
            (
                len(window),
                n_tot,
                direct.value,
                direct.ci_halfwidth,
                rel_value,
                rel_ci,
                scans._maybe_db(direct.value),
                scans._maybe_db(rel_value) if not math.isnan(rel_value) else None,
            )
        )
    table = ScanTable(
        columns=(
            "n_wells",
            "n_detected",
            "xi2_direct",
            "xi2_direct_ci",
            "xi2_rel",
            "xi2_rel_ci",
            "xi2_direct_db",
            "xi2_rel_db",
        ),
        rows=rows,
        meta={"tomography_angle_deg": ARRAY_TOMO_ANGLE_DEG},
    )
    out.add_table(table, "scaling.csv")

    def db_err(value, ci):
        if value is None or value != value or value - ci <= 0:
            return 0.0
        return 0.5 * (scans.to_db(value + ci) - scans.to_db(value - ci))

    n_tot = [r[1] for r in rows]
    direct_db = [r[6] for r in rows]
    direct_err = [db_err(r[2], r[3]) for r in rows]
    rel_db = [r[7] if r[7] is not None else float("nan") for r in rows]
    rel_err = [db_err(r[4], r[5]) if r[7] is not None else 0.0 for r in rows]
    figures.plot_scaling(
        n_tot, direct_db, direct_err, rel_db, rel_err, out.figure_path(),
        title="squeezing vs analyzed atom number",
    )
    full = rows[-1]
    return out.finish(
        {
            "xi2_direct_db_full": full[6],
            "xi2_rel_db_full": full[7],
            "n_detected_full": full[1],
            "n_shots": shots,
        },
        [config],
    )


def _target_fig1c(out: _TargetOutput, shots: int, seed: int, workers: int) -> dict:
    config = _array_config(shots, seed)
    return _finish_tomography(out, config, workers, "variance vs tomography angle, 25 wells", shots)


def _target_fig2b(out: _TargetOutput, shots: int, seed: int, workers: int) -> dict:
    config = _pair_config(shots, seed)
    return _finish_tomography(out, config, workers, "variance vs tomography angle, 2 wells", shots)


def _finish_tomography(out: _TargetOutput, config: RunConfig, workers: int, title: str, shots: int) -> dict:
    scan = scans.tomography_scan(config, _TOMO_ANGLES, workers=workers, n_resamples=200)
    out.add_table(scan.table(), "tomography.csv")
    direct_db = [scans._maybe_db(e.value) for e in scan.xi2_direct]
    rel_db = [scans._maybe_db(e.value) for e in scan.xi2_rel]
    fine = np.linspace(-90.0, 90.0, 181)
    fit = scan.curve.fit
    model = fit.offset + fit.visibility * np.sin(2.0 * np.radians(fine) + fit.phase_offset)
    # Draw the fitted raw-variance sinusoid on the estimator's dB axis by
    # rescaling with the mean estimate-to-raw-variance ratio.
    scale = _db_scale(scan)
    figures.plot_tomography(
        scan.angles_deg,
        direct_db,
        rel_db,
        fine,
        [scans.to_db(max(v * scale, 1e-12)) for v in model],
        out.figure_path(),
        title=title,
    )
    best = int(np.argmin([e.value for e in scan.xi2_rel]))
    return out.finish(
        {
            "r_squared": scan.curve.r_squared,
            "alpha_min_deg": scan.curve.alpha_min_deg,
            "best_xi2_rel_db": rel_db[best],
            "best_alpha_deg": float(scan.angles_deg[best]),
            "n_shots": shots,
        },
        [config],
    )


def _db_scale(scan) -> float:
    """Mean ratio of the relative-squeezing estimate to raw detected variance,
    so the fitted raw curve can be drawn on the estimator's dB axis."""
    ratios = [
        e.value / v
        for e, v in zip(scan.xi2_rel, scan.var_detected)
        if v > 0 and e.value > 0
    ]
    return float(np.mean(ratios)) if ratios else 1.0


def _target_fig2c(out: _TargetOutput, shots: int, seed: int, workers: int) -> dict:
    config = _pair_config(shots, seed)
    config = replace(config, sequence=_ramsey_spec(1e-6, readout_ideal=False))
    phases = list(range(0, 360, 30))
    scan = scans.fringe_scan(config, phases, workers=workers)
    out.add_table(scan.table(), "fringe.csv")
    fine = np.linspace(0.0, 360.0, 361)
    fit = scan.fit
    model = fit.visibility * np.sin(np.radians(fine) + fit.phase_offset) + fit.offset
    figures.plot_fringe(
        scan.phases_deg, scan.mean_z, scan.sem_z, fine, model, out.figure_path(),
        title="swap-Ramsey fringe, 1 us hold",
    )
    return out.finish(
        {
            "visibility": scan.fit.visibility,
            "visibility_err": scan.fit.visibility_err,
            "n_shots": shots,
        },
        [config],
    )


def _target_fig3b(out: _TargetOutput, shots: int, seed: int, workers: int) -> dict:
    config = _array_config(shots, seed)
    config = replace(config, sequence=_ramsey_spec(ANCHOR_T_HOLD))
    t_holds = [t - 2.0 * T_PI_SWAP for t in (342e-6, 1e-3, 2e-3, 3.42e-3)]
    scan = scans.sensitivity_scan(config, t_holds, workers=workers, n_resamples=200)
    out.add_table(scan.table(), "sensitivity.csv")
    out.add_table(scan.detail_table(), "sensitivity_detail.csv")
    pts = scan.points
    figures.plot_sensitivity(
        [p.t_int for p in pts],
        [p.sigma_b for p in pts],
        [p.ci for p in pts],
        [p.sql for p in pts],
        [p.sql_det for p in pts],
        out.figure_path(),
        title="field resolution vs interrogation time",
    )
    anchor = pts[0]
    return out.finish(
        {
            "anchor_t_int_s": anchor.t_int,
            "anchor_sigma_b_pT": anchor.sigma_b * 1e12,
            "anchor_ci_pT": anchor.ci * 1e12,
            "anchor_sql_pT": anchor.sql * 1e12,
            "anchor_enhancement": anchor.enhancement,
            "mean_contrast": anchor.mean_contrast,
            "n_shots": shots,
        },
        [config],
    )


def _gradient_config(shots: int, seed: int) -> RunConfig:
    config = _array_config(shots, seed)
    config = replace(
        config,
        sequence=_ramsey_spec(ANCHOR_T_HOLD),
        environment=EnvironmentConfig(gradient=GRADIENT_T_PER_UM),
    )
    return config


def _target_fig4a(out: _TargetOutput, shots: int, seed: int, workers: int) -> dict:
    config = _gradient_config(shots, seed)
    t_holds = [ANCHOR_T_HOLD, 542e-6, 884e-6]
    series = scans.gradient_series(
        config, t_holds, visibility=FRINGE_VISIBILITY, workers=workers, n_resamples=200
    )
    out.add_table(series.table(), "gradient_series.csv")
    pts = series.points
    figures.plot_gradient_series(
        [p.t_int for p in pts],
        [p.mean_dz for p in pts],
        [p.sem_dz for p in pts],
        series.slope_dz_per_s,
        out.figure_path(),
        title="differential fringe vs interrogation time",
    )
    return out.finish(
        {
            "gradient_true_pT_per_um": GRADIENT_T_PER_UM * 1e12,
            "gradient_est_pT_per_um": series.gradient_est * 1e12,
            "gradient_ci_pT_per_um": series.gradient_ci * 1e12,
            "r_squared": series.r_squared,
            "baseline_um": series.baseline_um,
            "n_shots": shots,
        },
        [config],
    )


def _target_fig4b(out: _TargetOutput, shots: int, seed: int, workers: int) -> dict:
    config = _gradient_config(shots, seed)
    phase = scans.working_point_phase_deg(config)
    records = scans._records(scans._set_readout_phase(config, phase), workers)
    from .pipeline import prepare_run

    prep = prepare_run(config)
    params = replace(
        config.protocol, t_hold=ANCHOR_T_HOLD, t_pi=T_PI_SWAP, visibility=FRINGE_VISIBILITY
    )
    scan = scans.baseline_scan(records, list(prep.sites), params)
    out.add_table(scan.table(), "baseline_scan.csv")
    pts = scan.points
    figures.plot_baseline_scan(
        [p.baseline_um for p in pts],
        [p.sigma_grad for p in pts],
        [p.sql_grad for p in pts],
        [p.kind for p in pts],
        out.figure_path(),
        title="gradient resolution vs baseline",
    )
    summed = [p for p in pts if p.kind == "summed"]
    best = min(summed, key=lambda p: p.sigma_grad) if summed else None
    return out.finish(
        {
            "pair_exponent": scan.exponent,
            "pair_exponent_err": scan.exponent_err,
            "best_summed_sigma_pT_per_um": best.sigma_grad * 1e12 if best else None,
            "best_summed_baseline_um": best.baseline_um if best else None,
            "best_summed_enhancement": best.enhancement if best else None,
            "n_shots": shots,
        },
        [config],
    )


def _target_supp2(out: _TargetOutput, shots: int, seed: int, workers: int) -> dict:
    config = RunConfig(master_seed=seed)
    sizes = list(range(300, 601, 25))
    result = scans.per_size_characterization(config, sizes)
    out.add_table(result.table(), "size_characterization.csv")
    xi_db = [scans.to_db(v) for v in result.xi2_n]
    var_max_db = [
        scans.to_db(result.var_max[i] / (result.n_atoms[i] / 4.0))
        for i in range(len(sizes))
    ]
    figures.plot_size_characterization(
        result.n_atoms, xi_db, result.alpha_min_deg, var_max_db, out.figure_path(),
        title="per-well squeezing figures vs ensemble size",
    )
    return out.finish(
        {
            "xi2_n_db_range": [min(xi_db), max(xi_db)],
            "alpha_min_deg_range": [
                float(np.min(result.alpha_min_deg)),
                float(np.max(result.alpha_min_deg)),
            ],
        },
        [config],
    )


_SUPP4_VARIANTS = (
    ("no echo", {"echo": False}, {"pulse_detuning_sigma": 0.0}),
    ("echo", {"echo": True}, {"pulse_detuning_sigma": 0.0}),
    ("echo + pulse noise", {"echo": True}, {"pulse_detuning_sigma": 1.5}),
)


def _target_supp4(out: _TargetOutput, shots: int, seed: int, workers: int) -> dict:
    alphas = [0.0, 45.0, 90.0, 135.0]
    targets = [1500, 2500, 3500, 4500, 5500]
    curves = []
    summary = {}
    for label, seq_extra, noise_extra in _SUPP4_VARIANTS:
        config = _array_config(shots, seed, n_sites=15, loss_on=False)
        config = replace(
            config,
            sequence={**config.sequence, "evolution_total_s": 0.015, **seq_extra},
            noise=replace(config.noise, **noise_extra),
        )
        curve = scans.technical_noise_tomography(
            config, alphas, targets, label=label, workers=workers
        )
        curves.append(curve)
        key = label.replace(" ", "_").replace("+", "plus")
        summary[f"peak_beta2_css_{key}"] = curve.peak().css_units()
        summary[f"beta2_at_zero_css_{key}"] = curve.at(0.0).css_units()
    combined = ScanTable(
        columns=curves[0].table().columns,
        rows=[row for c in curves for row in c.table().rows],
        meta={},
    )
    out.add_table(combined, "technical_noise.csv")
    figures.plot_technical_noise(
        [
            (
                c.label,
                [p.alpha_deg for p in c.points],
                [p.beta2 for p in c.points],
                [p.beta2_err for p in c.points],
            )
            for c in curves
        ],
        out.figure_path(),
        title="technical-noise tomography",
    )
    summary["n_shots"] = shots
    return out.finish(summary)


def _target_supp5(out: _TargetOutput, shots: int, seed: int, workers: int) -> dict:
    config = _array_config(shots, seed, n_sites=9)
    config = replace(
        config,
        sequence=_ramsey_spec(ANCHOR_T_HOLD),
        noise=replace(config.noise, longterm_enabled=True, block_size=5),
    )
    t_holds = [t - 2.0 * T_PI_SWAP for t in _SUPP5_T_INT]
    scan = scans.sensitivity_scan(config, t_holds, workers=workers, n_resamples=100)
    out.add_table(scan.table(), "sensitivity.csv")
    out.add_table(scan.detail_table(), "sensitivity_detail.csv")
    pts = scan.points
    figures.plot_sensitivity(
        [p.t_int for p in pts],
        [p.sigma_b for p in pts],
        [p.ci for p in pts],
        [p.sql for p in pts],
        [p.sql_det for p in pts],
        out.figure_path("sensitivity.svg"),
        title="long-interrogation sensitivity scan",
    )
    figures.plot_contrast(
        [p.t_int for p in pts],
        [p.mean_contrast for p in pts],
        [p.single_shot_visibility for p in pts],
        out.figure_path("contrast.svg"),
        title="mean vs single-shot fringe contrast",
    )
    return out.finish(
        {
            "enhancement_first": pts[0].enhancement,
            "enhancement_last": pts[-1].enhancement,
            "mean_contrast_first": pts[0].mean_contrast,
            "mean_contrast_last": pts[-1].mean_contrast,
            "single_shot_first": pts[0].single_shot_visibility,
            "single_shot_last": pts[-1].single_shot_visibility,
            "n_shots": shots,
        },
        [config],
    )


def _target_loss_floor(out: _TargetOutput, shots: int, seed: int, workers: int) -> dict:
    times = np.linspace(0.002, 0.044, 22)
    scan = scans.loss_floor_scan(times, n_trajectories=shots, master_seed=seed)
    out.add_table(scan.table(), "loss_floor.csv")
    r = scan.result
    figures.plot_loss_floor(
        r.times, r.squeezing_db, r.squeezing_stderr_db, r.n_mean, out.figure_path(),
        title="attainable squeezing vs twisting time under loss",
    )
    return out.finish(
        {
            "floor_db": scan.floor_db,
            "floor_time_s": scan.floor_time,
            "n_trajectories": shots,
        }
    )


# Dispatch --------------------------------------------------------------------

_TARGETS = {
    "fig1b": (_target_fig1b, 1000),
    "fig1c": (_target_fig1c, 200),
    "fig2b": (_target_fig2b, 400),
    "fig2c": (_target_fig2c, 300),
    "fig3b": (_target_fig3b, 300),
    "fig4a": (_target_fig4a, 200),
    "fig4b": (_target_fig4b, 300),
    "supp2": (_target_supp2, 1),
    "supp4": (_target_supp4, 80),
    "supp5": (_target_supp5, 150),
    "loss-floor": (_target_loss_floor, 500),
}

_TARGET_SEEDS = {
    "fig1b": 11,
    "fig1c": 12,
    "fig2b": 21,
    "fig2c": 22,
    "fig3b": 42,
    "fig4a": 42,
    "fig4b": 42,
    "supp2": 0,
    "supp4": 31,
    "supp5": 51,
    "loss-floor": 77,
}


def available_targets() -> list[str]:
    return sorted(_TARGETS)


def reproduce(
    target: str,
    out_root: str | Path,
    *,
    shots: int | None = None,
    seed: int | None = None,
    workers: int = 1,
) -> dict:
    """Run one preset target and write its outputs under out_root/<target>."""
    if target not in _TARGETS:
        raise ConfigError(
            f"unknown target {target!r}; available: {', '.join(available_targets())}"
        )
    func, default_shots = _TARGETS[target]
    n_shots = int(shots) if shots is not None else default_shots
    if n_shots < 1:
        raise ConfigError(f"shots must be >= 1, got {n_shots}")
    master_seed = int(seed) if seed is not None else _TARGET_SEEDS[target]
    out = _TargetOutput(out_root, target)
    return func(out, n_shots, master_seed, workers)
