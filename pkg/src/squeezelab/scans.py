"""Scan-level analyses built on the shot pipeline.

Each scan sweeps one knob (tomography angle, readout phase, hold time,
baseline) across seeded pipeline runs and reduces the shots to the derived
quantity with bootstrap confidence intervals.

Sensitivity conventions.  The differential imbalance dz = z_left - z_right
rejects common-mode field noise.  A homogeneous-field measurement uses the
mean imbalance, whose rejected-noise spread for independent halves is
std(dz)/2; passing that half-spread to the sensitivity formula makes a
coherent-state input reproduce the shot-noise limit exactly and makes
sigma_B / sigma_SQL equal the relative squeezing amplitude.  A gradient
measurement estimates the field *difference*, so it uses the full spread
std(dz) over the baseline.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import collective, rng as streams
from .config import RunConfig
from .errors import ConfigError, DataError
from .estimators import (
    EstimateResult,
    FringeFit,
    bootstrap,
    fit_fringe,
    fit_quadratic_noise,
    xi2_direct,
    xi2_rel,
)
from .lattice import (
    RegionSpec,
    SiteParams,
    centered_window_pair,
    chi_of_n,
    enumerate_combinations,
    halves,
    sum_region,
)
from .loss import LossConfig, LossEnsembleResult, evolve_with_loss
from .magnetometry import (
    FieldProtocolParams,
    GradiometerGeometry,
    delta_b,
    sensitivity,
    sql,
    sql_with_detection,
)
from .measurement import ShotRecord, imbalances
from .pipeline import PreparedRun, prepare_run, run_simulation
from .sequences import ExecutionParams, execute
from .noise import ShotNoise
from .units import TWO_PI, deg_to_rad, rad_to_deg, to_db


# --- shared plumbing --------------------------------------------------------


@dataclass(frozen=True)
class ScanTable:
    """A rectangular scan result ready for CSV emission."""

    columns: tuple[str, ...]
    rows: list[tuple]
    meta: dict

    def write_csv(self, path: str | Path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.columns)
            for row in self.rows:
                writer.writerow(["" if v is None else v for v in row])
        return path


def _full_region(n_sites: int) -> RegionSpec:
    return RegionSpec((tuple(range(n_sites)),))


def _set_sequence(config: RunConfig, **updates) -> RunConfig:
    return replace(config, sequence={**config.sequence, **updates})


def _set_tomography_angle(config: RunConfig, alpha_deg: float) -> RunConfig:
    spec = dict(config.sequence)
    kind = spec.get("kind")
    if kind == "oat":
        spec["tomography_angle_deg"] = float(alpha_deg)
    elif kind == "ramsey":
        spec.pop("readout_phase_deg", None)
        spec["readout_tomography_angle_deg"] = float(alpha_deg)
    else:
        raise ConfigError(f"cannot scan tomography angle on sequence kind {kind!r}")
    return replace(config, sequence=spec)


def _set_readout_phase(config: RunConfig, phase_deg: float) -> RunConfig:
    spec = dict(config.sequence)
    if spec.get("kind") != "ramsey":
        raise ConfigError("readout-phase scans need a ramsey sequence spec")
    spec.pop("readout_tomography_angle_deg", None)
    spec["readout_phase_deg"] = float(phase_deg)
    return replace(config, sequence=spec)


def _records(config: RunConfig, workers: int) -> list[ShotRecord]:
    return run_simulation(config, workers=workers).records


def _array_z(records: list[ShotRecord], region: RegionSpec) -> np.ndarray:
    return np.array([imbalances(rec, region).z[0] for rec in records])


def _delta_z(records: list[ShotRecord], pair: RegionSpec) -> np.ndarray:
    return np.array([imbalances(rec, pair).delta_z for rec in records])


def _mean_total_detected(records: list[ShotRecord], region: RegionSpec) -> float:
    sums = [sum_region(rec, region) for rec in records]
    return float(np.mean([na + nb for ((na, nb),) in sums]))


def _maybe_db(value: float) -> float | None:
    return to_db(value) if value > 0 else None


# --- tomography -------------------------------------------------------------


@dataclass(frozen=True)
class VarianceCurveFit:
    """Sinusoid fit of a rotation-tomography variance curve.

    The variance along an axis rotated by alpha is pi-periodic, so the fit
    runs in 2*alpha; alpha_min/alpha_max are reported in (-90, 90] degrees.
    """

    fit: FringeFit
    r_squared: float
    alpha_min_deg: float
    alpha_max_deg: float
    mean_level: float
    amplitude: float


def _wrap_half_turn(angle_deg: float) -> float:
    wrapped = math.fmod(angle_deg + 90.0, 180.0)
    if wrapped < 0:
        wrapped += 180.0
    return wrapped - 90.0


def fit_variance_curve(angles_deg, variances) -> VarianceCurveFit:
    angles = np.asarray(angles_deg, dtype=float)
    values = np.asarray(variances, dtype=float)
    fit = fit_fringe(2.0 * np.radians(angles), values)
    model = fit.visibility * np.sin(2.0 * np.radians(angles) + fit.phase_offset) + fit.offset
    ss_res = float(np.sum((values - model) ** 2))
    ss_tot = float(np.sum((values - values.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    # minimum of C + A sin(2a + psi) sits at 2a = -pi/2 - psi
    alpha_min = _wrap_half_turn(math.degrees((-0.5 * math.pi - fit.phase_offset) / 2.0))
    alpha_max = _wrap_half_turn(alpha_min + 90.0)
    return VarianceCurveFit(
        fit=fit,
        r_squared=r_squared,
        alpha_min_deg=alpha_min,
        alpha_max_deg=alpha_max,
        mean_level=fit.offset,
        amplitude=fit.visibility,
    )


@dataclass(frozen=True)
class TomographyScan:
    angles_deg: np.ndarray
    var_detected: np.ndarray  # Var(N_b - N_a) of the full array, detected
    xi2_direct: list[EstimateResult]
    xi2_rel: list[EstimateResult]
    curve: VarianceCurveFit

    def table(self) -> ScanTable:
        rows = []
        for i, alpha in enumerate(self.angles_deg):
            d, r = self.xi2_direct[i], self.xi2_rel[i]
            rows.append(
                (
                    float(alpha),
                    float(self.var_detected[i]),
                    d.value,
                    d.ci_halfwidth,
                    r.value,
                    r.ci_halfwidth,
                    _maybe_db(d.value),
                    _maybe_db(r.value),
                )
            )
        return ScanTable(
            columns=(
                "alpha_deg",
                "var_detected",
                "xi2_direct",
                "xi2_direct_ci",
                "xi2_rel",
                "xi2_rel_ci",
                "xi2_direct_db",
                "xi2_rel_db",
            ),
            rows=rows,
            meta={
                "r_squared": self.curve.r_squared,
                "alpha_min_deg": self.curve.alpha_min_deg,
                "alpha_max_deg": self.curve.alpha_max_deg,
            },
        )


def tomography_scan(
    base: RunConfig,
    angles_deg,
    *,
    workers: int = 1,
    n_resamples: int = 300,
) -> TomographyScan:
    """Sweep the readout rotation angle and estimate squeezing at each point."""
    angles = np.asarray(angles_deg, dtype=float)
    if angles.size < 4:
        raise ConfigError("tomography scan needs at least 4 angles")
    var_det = np.empty(angles.size)
    direct_list: list[EstimateResult] = []
    rel_list: list[EstimateResult] = []
    for i, alpha in enumerate(angles):
        cfg = _set_tomography_angle(base, float(alpha))
        records = _records(cfg, workers)
        n_sites = records[0].n_sites
        whole = _full_region(n_sites)
        left, right = (RegionSpec((r,)) for r in halves(n_sites).regions)
        diff = np.array(
            [float(np.sum(rec.n_b_det) - np.sum(rec.n_a_det)) for rec in records]
        )
        var_det[i] = float(np.var(diff))
        boot = streams.substream(base.master_seed, streams.BOOTSTRAP, i)
        direct_list.append(
            xi2_direct(records, whole, base.noise.detection_sigma, n_resamples=n_resamples, rng=boot)
        )
        rel_list.append(
            xi2_rel(records, left, right, base.noise.detection_sigma, n_resamples=n_resamples, rng=boot)
        )
    curve = fit_variance_curve(angles, var_det)
    return TomographyScan(angles, var_det, direct_list, rel_list, curve)


# --- fringes and visibility -------------------------------------------------


@dataclass(frozen=True)
class FringeScan:
    phases_deg: np.ndarray
    mean_z: np.ndarray
    sem_z: np.ndarray
    fit: FringeFit

    @property
    def visibility(self) -> float:
        return self.fit.visibility

    def table(self) -> ScanTable:
        model = self.fit.visibility * np.sin(np.radians(self.phases_deg) + self.fit.phase_offset) + self.fit.offset
        rows = [
            (float(p), float(z), float(s), float(m))
            for p, z, s, m in zip(self.phases_deg, self.mean_z, self.sem_z, model)
        ]
        return ScanTable(
            columns=("phase_deg", "mean_z", "sem_z", "fit_z"),
            rows=rows,
            meta={"visibility": self.fit.visibility, "visibility_err": self.fit.visibility_err},
        )


def fringe_scan(base: RunConfig, phases_deg, *, workers: int = 1) -> FringeScan:
    """Readout-phase sweep of the mean array imbalance; fits the fringe."""
    phases = np.asarray(phases_deg, dtype=float)
    if phases.size < 4:
        raise ConfigError("fringe scan needs at least 4 phases")
    mean_z = np.empty(phases.size)
    sem_z = np.empty(phases.size)
    for i, phase in enumerate(phases):
        cfg = _set_readout_phase(base, float(phase))
        records = _records(cfg, workers)
        z = _array_z(records, _full_region(records[0].n_sites))
        mean_z[i] = float(np.mean(z))
        sem_z[i] = float(np.std(z) / math.sqrt(len(z)))
    fit = fit_fringe(np.radians(phases), mean_z)
    return FringeScan(phases, mean_z, sem_z, fit)


@dataclass(frozen=True)
class QuadraturePair:
    """Two runs 90 degrees apart in readout phase with identical noise draws,
    pairing each shot with its own orthogonal quadrature."""

    phase0_deg: float
    z_slope: np.ndarray  # readout at phase0 (working point)
    z_amp: np.ndarray  # readout at phase0 - 90 (amplitude quadrature)
    mean_contrast: float  # amplitude of the shot-averaged fringe vector
    single_shot_visibility: float  # mean per-shot fringe amplitude


def quadrature_pair(base: RunConfig, *, phase0_deg: float = 90.0, workers: int = 1) -> QuadraturePair:
    slope_records = _records(_set_readout_phase(base, phase0_deg), workers)
    amp_records = _records(_set_readout_phase(base, phase0_deg - 90.0), workers)
    region = _full_region(slope_records[0].n_sites)
    z_slope = _array_z(slope_records, region)
    z_amp = _array_z(amp_records, region)
    mean_contrast = float(math.hypot(float(np.mean(z_slope)), float(np.mean(z_amp))))
    single = float(np.mean(np.hypot(z_slope, z_amp)))
    return QuadraturePair(phase0_deg, z_slope, z_amp, mean_contrast, single)


# --- field sensitivity ------------------------------------------------------


@dataclass(frozen=True)
class SensitivityPoint:
    t_int: float
    sigma_b: float  # T
    ci: float  # T, 1 s.d. halfwidth
    sql: float  # T, shot-noise limit at V = 1
    sql_det: float  # T, shot-noise limit including detection noise
    enhancement: float  # 1 - sigma_b / sql
    mean_contrast: float
    single_shot_visibility: float
    std_dz: float
    n_detected: float


@dataclass(frozen=True)
class SensitivityScan:
    points: list[SensitivityPoint]

    def table(self) -> ScanTable:
        rows = [
            (p.t_int, p.sigma_b, p.ci, p.sql, p.sql_det, p.enhancement)
            for p in self.points
        ]
        return ScanTable(
            columns=("x_value", "sigma_b_T", "ci_T", "sql_T", "sql_det_T", "enhancement"),
            rows=rows,
            meta={},
        )

    def detail_table(self) -> ScanTable:
        rows = [
            (p.t_int, p.mean_contrast, p.single_shot_visibility, p.std_dz, p.n_detected)
            for p in self.points
        ]
        return ScanTable(
            columns=("t_int_s", "mean_contrast", "single_shot_visibility", "std_dz", "n_detected"),
            rows=rows,
            meta={},
        )


def _protocol_at(base: RunConfig, t_hold: float, visibility: float) -> FieldProtocolParams:
    return replace(base.protocol, t_hold=t_hold, visibility=visibility)


def sensitivity_point(
    base: RunConfig,
    t_hold: float,
    *,
    workers: int = 1,
    n_resamples: int = 300,
) -> SensitivityPoint:
    """Homogeneous-field sensitivity at one hold time.

    Runs the working-point quadrature and its orthogonal partner (same seed,
    hence shot-paired noise draws); sigma_B uses the half-spread of dz and
    the measured mean contrast.
    """
    cfg = _set_sequence(base, t_hold_s=float(t_hold))
    records = _records(_set_readout_phase(cfg, 90.0), workers)
    amp_records = _records(_set_readout_phase(cfg, 0.0), workers)
    region_all = _full_region(records[0].n_sites)
    z_slope = _array_z(records, region_all)
    z_amp = _array_z(amp_records, region_all)
    pair = QuadraturePair(
        phase0_deg=90.0,
        z_slope=z_slope,
        z_amp=z_amp,
        mean_contrast=float(math.hypot(float(np.mean(z_slope)), float(np.mean(z_amp)))),
        single_shot_visibility=float(np.mean(np.hypot(z_slope, z_amp))),
    )
    n_sites = records[0].n_sites
    region_pair = halves(n_sites)
    dz = _delta_z(records, region_pair)
    std_dz = float(np.std(dz))
    boot = streams.substream(base.master_seed, streams.BOOTSTRAP)
    std_ci = 0.0
    if n_resamples > 0:
        est = bootstrap(
            lambda data: float(np.std(_delta_z(data, region_pair))),
            records,
            n_resamples,
            boot,
            name="std_dz",
        )
        std_ci = est.ci_halfwidth
    v_mean = pair.mean_contrast
    if not 0.0 < v_mean <= 1.0:
        v_mean = min(max(v_mean, 1e-6), 1.0)
    t_pi = float(base.sequence.get("t_pi_s", base.protocol.t_pi))
    params = replace(base.protocol, t_hold=float(t_hold), t_pi=t_pi, visibility=v_mean)
    sigma_b = sensitivity(0.5 * std_dz, params)
    ci = sensitivity(0.5 * std_ci, params)
    n_det = _mean_total_detected(records, _full_region(n_sites))
    params_v1 = replace(params, visibility=1.0)
    sql_value = sql(max(int(round(n_det)), 1), params_v1)
    det_var = _detection_var_dz(records, region_pair, base.noise.detection_sigma)
    sql_det_value = sql_with_detection(max(int(round(n_det)), 1), params_v1, det_var)
    return SensitivityPoint(
        t_int=params.t_int,
        sigma_b=sigma_b,
        ci=ci,
        sql=sql_value,
        sql_det=sql_det_value,
        enhancement=1.0 - sigma_b / sql_value,
        mean_contrast=pair.mean_contrast,
        single_shot_visibility=pair.single_shot_visibility,
        std_dz=std_dz,
        n_detected=n_det,
    )


def _detection_var_dz(records: list[ShotRecord], pair: RegionSpec, detection_sigma: float) -> float:
    from .estimators import detection_variance_of_z

    total = 0.0
    for region in pair.regions:
        spec = RegionSpec((region,))
        sums = np.array([sum_region(rec, spec)[0] for rec in records])
        total += detection_variance_of_z(
            float(np.mean(sums[:, 0])), float(np.mean(sums[:, 1])), len(region), detection_sigma
        )
    return total


def sensitivity_scan(
    base: RunConfig,
    t_hold_list,
    *,
    workers: int = 1,
    n_resamples: int = 300,
) -> SensitivityScan:
    if len(list(t_hold_list)) == 0:
        raise ConfigError("sensitivity scan needs at least one hold time")
    points = [
        sensitivity_point(base, float(t), workers=workers, n_resamples=n_resamples)
        for t in t_hold_list
    ]
    return SensitivityScan(points)


# --- expected (noise-free) fringe geometry ----------------------------------


def expected_half_phases(config: RunConfig) -> tuple[float, float]:
    """Noise-free fringe phases (rad) of the two halves: z_h = V sin(phase + psi_h).

    Evaluated from exact state moments at readout phases 0 and 90 degrees,
    with stochastic noise and loss disabled.
    """
    psis = []
    z0, z90 = _expected_half_z(config)
    for h in range(2):
        psis.append(math.atan2(z0[h], z90[h]))
    return psis[0], psis[1]


def _expected_half_z(config: RunConfig) -> tuple[np.ndarray, np.ndarray]:
    quiet = replace(config, loss=replace(config.loss, enabled=False))
    out = []
    for phase in (0.0, 90.0):
        prep = prepare_run(_set_readout_phase(quiet, phase))
        z_sites = np.empty(len(prep.sites))
        n_sites_atoms = np.empty(len(prep.sites))
        for i, (site, extra) in enumerate(zip(prep.sites, prep.extra_fields)):
            params = ExecutionParams(
                noise_config=quiet.noise,
                swapped_sensitivity=prep.swapped_sensitivity,
                extra_field=extra,
            )
            state = execute(prep.sequence, site, ShotNoise.zero(), params)
            mom = collective.moments(state)
            z_sites[i] = 2.0 * mom.mean[2] / site.n_atoms
            n_sites_atoms[i] = site.n_atoms
        z_halves = np.empty(2)
        for h, region in enumerate(halves(len(prep.sites)).regions):
            idx = list(region)
            weights = n_sites_atoms[idx]
            z_halves[h] = float(np.sum(z_sites[idx] * weights) / np.sum(weights))
        out.append(z_halves)
    return out[0], out[1]


def working_point_phase_deg(config: RunConfig) -> float:
    """Readout phase (deg) maximizing |mean dz| for this configuration."""
    psi_l, psi_r = expected_half_phases(config)
    return rad_to_deg(-(0.5 * (psi_l + psi_r)))


def expected_delta_z(config: RunConfig, phase_deg: float) -> float:
    """Noise-free mean dz at a given readout phase.

    With z_h(phase) = V sin(phase + psi_h), the stored components obey
    z_h(0) = V sin(psi_h) and z_h(90 deg) = V cos(psi_h).
    """
    z0, z90 = _expected_half_z(config)
    phi = deg_to_rad(phase_deg)
    z = z90 * math.sin(phi) + z0 * math.cos(phi)
    return float(z[0] - z[1])


# --- gradiometry ------------------------------------------------------------


@dataclass(frozen=True)
class GradientPoint:
    t_int: float
    readout_phase_deg: float
    mean_dz: float
    sem_dz: float
    delta_b: float  # T between half centroids
    gradient: float  # T/um
    gradient_ci: float


@dataclass(frozen=True)
class GradientSeries:
    points: list[GradientPoint]
    baseline_um: float
    visibility: float
    slope_dz_per_s: float
    r_squared: float  # of the through-origin linear fit of |mean dz| vs t_int
    gradient_est: float  # T/um, pooled from the slope
    gradient_ci: float

    def table(self) -> ScanTable:
        rows = [
            (p.t_int, p.readout_phase_deg, p.mean_dz, p.sem_dz, p.delta_b, p.gradient, p.gradient_ci)
            for p in self.points
        ]
        return ScanTable(
            columns=(
                "t_int_s",
                "readout_phase_deg",
                "mean_dz",
                "sem_dz",
                "delta_b_T",
                "gradient_t_per_um",
                "gradient_ci_t_per_um",
            ),
            rows=rows,
            meta={
                "baseline_um": self.baseline_um,
                "gradient_est_t_per_um": self.gradient_est,
                "gradient_ci_t_per_um": self.gradient_ci,
                "r_squared": self.r_squared,
            },
        )


def gradient_series(
    base: RunConfig,
    t_hold_list,
    *,
    visibility: float,
    workers: int = 1,
    n_resamples: int = 300,
    referenced: bool = True,
) -> GradientSeries:
    """Differential-fringe amplitude vs interrogation time under the
    configured static gradient, read out at the max-signal working point.

    With ``referenced`` each point subtracts a companion run at zero applied
    gradient (same master seed, hence the same lattice draw and the same
    noise streams), shot by shot.  The atom-number spread gives every lattice
    draw a static half-to-half phase offset via density-dependent twisting;
    the companion run measures exactly that offset, so the difference
    isolates the applied gradient the way a zero-current calibration run
    does on the bench.
    """
    holds = [float(t) for t in t_hold_list]
    if not holds:
        raise ConfigError("gradient series needs at least one hold time")
    prep = prepare_run(base)
    geometry = GradiometerGeometry.from_regions(list(prep.sites), halves(len(prep.sites)))
    points: list[GradientPoint] = []
    t_ints = []
    means = []
    sems = []
    dz_samples: list[np.ndarray] = []
    for i, t_hold in enumerate(holds):
        cfg = _set_sequence(base, t_hold_s=t_hold)
        phase = working_point_phase_deg(cfg)
        records = _records(_set_readout_phase(cfg, phase), workers)
        pair = halves(records[0].n_sites)
        dz = _delta_z(records, pair)
        if referenced:
            ref_cfg = replace(cfg, environment=replace(cfg.environment, gradient=0.0))
            ref_records = _records(
                _set_readout_phase(ref_cfg, working_point_phase_deg(ref_cfg)), workers
            )
            dz = dz - _delta_z(ref_records, pair)
        mean_dz = float(np.mean(dz))
        sem = float(np.std(dz) / math.sqrt(len(dz)))
        t_pi = float(base.sequence.get("t_pi_s", base.protocol.t_pi))
        params = replace(base.protocol, t_hold=t_hold, t_pi=t_pi, visibility=visibility)
        field = delta_b(abs(mean_dz), params)
        grad = field / geometry.baseline_um
        grad_ci = sensitivity(sem, params) / geometry.baseline_um
        points.append(GradientPoint(params.t_int, phase, mean_dz, sem, field, grad, grad_ci))
        t_ints.append(params.t_int)
        means.append(abs(mean_dz))
        sems.append(sem)
        dz_samples.append(dz)
    t_arr = np.asarray(t_ints)
    m_arr = np.asarray(means)
    slope = float(np.sum(t_arr * m_arr) / np.sum(t_arr**2))
    model = slope * t_arr
    ss_res = float(np.sum((m_arr - model) ** 2))
    ss_tot = float(np.sum((m_arr - m_arr.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    s = base.protocol.s_per_tesla
    gradient_est = slope / (TWO_PI * s * visibility * geometry.baseline_um)
    boot = streams.substream(base.master_seed, streams.BOOTSTRAP)
    grads = []
    for _ in range(max(n_resamples, 0)):
        resampled = np.array(
            [abs(np.mean(dz[boot.integers(0, len(dz), size=len(dz))])) for dz in dz_samples]
        )
        grads.append(
            float(np.sum(t_arr * resampled) / np.sum(t_arr**2))
            / (TWO_PI * s * visibility * geometry.baseline_um)
        )
    gradient_ci = float(np.std(grads)) if grads else 0.0
    return GradientSeries(
        points=points,
        baseline_um=geometry.baseline_um,
        visibility=visibility,
        slope_dz_per_s=slope,
        r_squared=r_squared,
        gradient_est=gradient_est,
        gradient_ci=gradient_ci,
    )


@dataclass(frozen=True)
class BaselinePoint:
    baseline_um: float
    n_detected: float
    sigma_grad: float  # T/um
    sql_grad: float  # T/um
    enhancement: float
    kind: str  # "single" or "summed"


@dataclass(frozen=True)
class BaselineScan:
    points: list[BaselinePoint]
    exponent: float  # log-log slope of sigma_grad vs baseline (single wells)
    exponent_err: float

    def table(self) -> ScanTable:
        rows = [
            (p.kind, p.baseline_um, p.n_detected, p.sigma_grad, p.sql_grad, p.enhancement)
            for p in self.points
        ]
        return ScanTable(
            columns=("kind", "baseline_um", "n_detected", "sigma_grad_t_per_um", "sql_grad_t_per_um", "enhancement"),
            rows=rows,
            meta={"exponent": self.exponent, "exponent_err": self.exponent_err},
        )


def _pair_sensitivity(
    records: list[ShotRecord],
    spec: RegionSpec,
    sites: list[SiteParams],
    params: FieldProtocolParams,
    kind: str,
) -> BaselinePoint:
    geometry = GradiometerGeometry.from_regions(sites, spec)
    dz = _delta_z(records, spec)
    std_dz = float(np.std(dz))
    sigma_grad = sensitivity(std_dz, params) / geometry.baseline_um
    totals = []
    for region in spec.regions:
        spec_one = RegionSpec((region,))
        totals.append(_mean_total_detected(records, spec_one))
    n1, n2 = totals
    classical_std = math.sqrt(1.0 / n1 + 1.0 / n2)
    params_v1 = replace(params, visibility=1.0)
    sql_grad = sensitivity(classical_std, params_v1) / geometry.baseline_um
    return BaselinePoint(
        baseline_um=geometry.baseline_um,
        n_detected=n1 + n2,
        sigma_grad=sigma_grad,
        sql_grad=sql_grad,
        enhancement=1.0 - sigma_grad / sql_grad,
        kind=kind,
    )


def baseline_scan(
    records: list[ShotRecord],
    sites: list[SiteParams],
    params: FieldProtocolParams,
    *,
    max_width: int | None = None,
) -> BaselineScan:
    """Gradient sensitivity vs baseline from one recorded run: single-well
    pairs symmetric about the array center, then summed windows."""
    n_sites = records[0].n_sites
    center = (n_sites - 1) // 2
    points: list[BaselinePoint] = []
    singles: list[BaselinePoint] = []
    for k in range(1, min(center, n_sites - 1 - center) + 1):
        spec = RegionSpec(((center - k,), (center + k,)))
        pt = _pair_sensitivity(records, spec, sites, params, "single")
        points.append(pt)
        singles.append(pt)
    cut = (n_sites + 1) // 2
    widths = range(1, min(cut, n_sites - cut) + 1)
    if max_width is not None:
        widths = range(1, min(max_width, min(cut, n_sites - cut)) + 1)
    for w in widths:
        spec = centered_window_pair(n_sites, w)
        points.append(_pair_sensitivity(records, spec, sites, params, "summed"))
    if len(singles) >= 3:
        logs_d = np.log([p.baseline_um for p in singles])
        logs_s = np.log([p.sigma_grad for p in singles])
        design = np.column_stack([logs_d, np.ones_like(logs_d)])
        coef, *_ = np.linalg.lstsq(design, logs_s, rcond=None)
        resid = logs_s - design @ coef
        dof = max(len(singles) - 2, 1)
        cov = float(resid @ resid) / dof * np.linalg.inv(design.T @ design)
        exponent, exponent_err = float(coef[0]), math.sqrt(max(cov[0, 0], 0.0))
    else:
        exponent, exponent_err = float("nan"), float("nan")
    return BaselineScan(points=points, exponent=exponent, exponent_err=exponent_err)


# --- technical-noise tomography ---------------------------------------------


@dataclass(frozen=True)
class TechnicalNoisePoint:
    alpha_deg: float
    beta2: float  # quadratic variance coefficient
    beta2_err: float
    linear: float
    linear_err: float

    def css_units(self, n_reference: float = 1.0e4) -> float:
        """Quadratic noise at n_reference atoms in coherent-state units."""
        return self.beta2 * n_reference


@dataclass(frozen=True)
class TechnicalNoiseCurve:
    label: str
    points: list[TechnicalNoisePoint]

    def peak(self) -> TechnicalNoisePoint:
        return max(self.points, key=lambda p: p.beta2)

    def at(self, alpha_deg: float) -> TechnicalNoisePoint:
        for p in self.points:
            if abs(p.alpha_deg - alpha_deg) < 1e-9:
                return p
        raise DataError(f"no technical-noise point at alpha = {alpha_deg}")

    def table(self) -> ScanTable:
        rows = [
            (self.label, p.alpha_deg, p.beta2, p.beta2_err, p.css_units(), p.linear, p.linear_err)
            for p in self.points
        ]
        return ScanTable(
            columns=("variant", "alpha_deg", "beta2", "beta2_err", "beta2_css_1e4", "linear", "linear_err"),
            rows=rows,
            meta={},
        )


def technical_noise_tomography(
    base: RunConfig,
    alphas_deg,
    targets,
    *,
    label: str = "",
    workers: int = 1,
    max_subsets: int = 40,
) -> TechnicalNoiseCurve:
    """Quadratic-in-N variance coefficient vs readout angle.

    For each angle the lattice is resampled into site combinations near each
    target atom number; the variance of the detected population difference is
    fit as a N + beta^2 N^2 over the combination sizes.
    """
    targets = [int(t) for t in targets]
    if len(targets) < 3:
        raise ConfigError("technical-noise fit needs at least 3 target sizes")
    points = []
    for i, alpha in enumerate(alphas_deg):
        cfg = _set_tomography_angle(base, float(alpha))
        records = _records(cfg, workers)
        prep = prepare_run(cfg)
        sizes = []
        variances = []
        for j, target in enumerate(targets):
            combo_rng = streams.substream(base.master_seed, streams.COMBINATIONS, i, j)
            combos = enumerate_combinations(list(prep.sites), target, max_subsets, combo_rng)
            if not combos:
                raise DataError(f"no site combinations near target {target}")
            combo_vars = []
            combo_sizes = []
            for combo in combos:
                sums = np.array([sum_region(rec, combo)[0] for rec in records])
                diff = sums[:, 1] - sums[:, 0]
                combo_vars.append(float(np.var(diff)))
                combo_sizes.append(float(np.mean(sums.sum(axis=1))))
            sizes.append(float(np.mean(combo_sizes)))
            variances.append(float(np.mean(combo_vars)))
        fit = fit_quadratic_noise(sizes, variances)
        points.append(
            TechnicalNoisePoint(
                alpha_deg=float(alpha),
                beta2=fit.beta2,
                beta2_err=fit.beta2_err,
                linear=fit.linear_term,
                linear_err=fit.linear_err,
            )
        )
    return TechnicalNoiseCurve(label=label, points=points)


# --- per-size characterization ----------------------------------------------


@dataclass(frozen=True)
class SizeCharacterization:
    n_atoms: np.ndarray
    var_min: np.ndarray
    var_max: np.ndarray
    alpha_min_deg: np.ndarray
    xi2_n: np.ndarray

    def table(self) -> ScanTable:
        rows = [
            (
                int(self.n_atoms[i]),
                float(self.var_min[i]),
                float(self.var_max[i]),
                float(self.alpha_min_deg[i]),
                float(self.xi2_n[i]),
                _maybe_db(float(self.xi2_n[i])),
            )
            for i in range(len(self.n_atoms))
        ]
        return ScanTable(
            columns=("n_atoms", "var_min", "var_max", "alpha_min_deg", "xi2_n", "xi2_n_db"),
            rows=rows,
            meta={},
        )


def per_size_characterization(base: RunConfig, n_list) -> SizeCharacterization:
    """Exact post-generation variance extrema per atom number.

    Executes the generation on a single site for each size (noise-free) and
    reads the tomography curve off the spin covariance: rotating the readout
    axis by alpha about the mean-spin direction sweeps a pi-periodic variance
    with analytic extrema.
    """
    spec = dict(base.sequence)
    spec["tomography_angle_deg"] = 0.0
    ns = [int(n) for n in n_list]
    var_min = np.empty(len(ns))
    var_max = np.empty(len(ns))
    alpha_min = np.empty(len(ns))
    xi2 = np.empty(len(ns))
    for i, n in enumerate(ns):
        cfg = replace(
            base,
            sequence=spec,
            lattice=replace(base.lattice, n_sites=1, atom_number_law=_fixed_law(n)),
            loss=replace(base.loss, enabled=False),
        )
        prep = prepare_run(cfg)
        site = prep.sites[0]
        params = ExecutionParams(noise_config=cfg.noise, swapped_sensitivity=0.0)
        state = execute(prep.sequence, site, ShotNoise.zero(), params)
        mom = collective.moments(state)
        lo, hi, a_min = _variance_extrema_about_readout_axis(mom)
        var_min[i] = lo
        var_max[i] = hi
        alpha_min[i] = a_min
        xi2[i] = lo / (n / 4.0)
    return SizeCharacterization(np.array(ns, dtype=float), var_min, var_max, alpha_min, xi2)


def _fixed_law(n: int):
    from .lattice import AtomNumberLaw

    return AtomNumberLaw(kind="fixed", low=n)


def _variance_extrema_about_readout_axis(mom: collective.SpinMoments) -> tuple[float, float, float]:
    """(var_min, var_max, alpha_min_deg) of the measured variance when the
    state is rotated by alpha about the fixed readout axis (azimuth 90
    degrees, the +y axis) before a population measurement, matching the
    tomography readout convention."""
    axis = np.array([0.0, 1.0, 0.0])
    z = np.array([0.0, 0.0, 1.0])
    # alpha > 0 rotates the state by alpha about +y; the measured direction
    # counter-rotates: n(alpha) = R(-alpha, y) z
    def measured_var(alpha: float) -> float:
        n_vec = _rotate_vec(z, axis, -alpha)
        return float(n_vec @ mom.cov @ n_vec)

    # Var(alpha) = c + a cos(2 alpha) + b sin(2 alpha); sample three points
    v0 = measured_var(0.0)
    v45 = measured_var(0.25 * math.pi)
    v90 = measured_var(0.5 * math.pi)
    c = 0.5 * (v0 + v90)
    a = 0.5 * (v0 - v90)
    b = v45 - c
    amp = math.hypot(a, b)
    alpha_min = 0.5 * math.atan2(-b, -a)
    alpha_min_deg = _wrap_half_turn(math.degrees(alpha_min))
    return c - amp, c + amp, alpha_min_deg


def _rotate_vec(v: np.ndarray, axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation of a 3-vector (right-hand rule)."""
    c, s = math.cos(angle), math.sin(angle)
    return v * c + np.cross(axis, v) * s + axis * float(axis @ v) * (1.0 - c)


# --- loss floor -------------------------------------------------------------


@dataclass(frozen=True)
class LossFloorScan:
    result: LossEnsembleResult
    floor_db: float
    floor_time: float

    def table(self) -> ScanTable:
        r = self.result
        rows = [
            (
                float(r.times[i]),
                float(r.squeezing_db[i]),
                float(r.mean_spin[i]),
                float(r.n_mean[i]),
                float(r.squeezing_stderr_db[i]),
            )
            for i in range(len(r.times))
        ]
        return ScanTable(
            columns=("t", "squeezing_dB", "mean_spin", "n_mean", "stderr"),
            rows=rows,
            meta={"floor_db": self.floor_db, "floor_time_s": self.floor_time},
        )


def loss_floor_scan(
    times,
    *,
    n_atoms: int = 500,
    n_trajectories: int = 500,
    master_seed: int = 77,
    loss: LossConfig | None = None,
    chi: float | None = None,
) -> LossFloorScan:
    """Trajectory-averaged squeezing vs twisting time at the loss rates."""
    loss = loss if loss is not None else LossConfig()
    chi = chi_of_n(n_atoms) if chi is None else chi
    site = SiteParams(site_index=0, n_atoms=n_atoms, chi=chi, delta_offset=0.0, position=0.0)
    initial = collective.make_css(n_atoms, 0.5 * math.pi, 0.5 * math.pi)
    rng = streams.substream(master_seed, streams.LOSS)
    result = evolve_with_loss(initial, site, loss, times, n_trajectories, rng)
    floor_db, floor_time = result.floor()
    return LossFloorScan(result=result, floor_db=floor_db, floor_time=floor_time)
