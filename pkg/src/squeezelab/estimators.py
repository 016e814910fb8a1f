"""Statistical analysis of shot records: squeezing parameters, fringe and
noise fits, and bootstrap confidence intervals.

Conventions shared by all estimators: detected (noisy) populations are used
throughout, detection noise enters as an independent Gaussian per cloud (two
clouds per site), and negative variances after noise subtraction are
reported as-is with a flag -- never clamped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .lattice import RegionSpec, sum_region
from .measurement import ShotRecord, imbalances

BOOTSTRAP_RESAMPLES = 1000


@dataclass(frozen=True)
class EstimateResult:
    value: float
    ci_low: float
    ci_high: float
    n_shots: int
    n_resamples: int
    estimator_name: str
    negative_variance: bool = False
    extras: dict = field(default_factory=dict)

    @property
    def ci_halfwidth(self) -> float:
        return 0.5 * (self.ci_high - self.ci_low)


def _require_shots(shots: list[ShotRecord], minimum: int = 2) -> None:
    if len(shots) < minimum:
        raise DataError(f"need at least {minimum} shots, have {len(shots)}")


def _region_sums(shots: list[ShotRecord], spec: RegionSpec) -> list[np.ndarray]:
    """Per-region arrays of detected (N_a, N_b) sums, one row per shot."""
    out = [np.empty((len(shots), 2)) for _ in spec.regions]
    for si, shot in enumerate(shots):
        for ri, pair in enumerate(sum_region(shot, spec)):
            out[ri][si] = pair
    return out


def _binomial_factor(na: np.ndarray, nb: np.ndarray) -> tuple[float, float]:
    """(4p(1-p), mean total) from detected sums."""
    total = float(np.mean(na + nb))
    if total <= 0:
        raise DataError("region has non-positive mean detected total")
    p = 0.5 + float(np.mean(nb - na)) / (2.0 * total)
    return 4.0 * p * (1.0 - p), total


def _wrap(
    name: str,
    core,
    shots: list[ShotRecord],
    n_resamples: int,
    rng: np.random.Generator | None,
    extras: dict | None = None,
) -> EstimateResult:
    """Evaluate core(list-of-shots) and attach a bootstrap CI when requested."""
    value = core(shots)
    lo = hi = value
    resamples = 0
    if rng is not None and n_resamples > 0:
        if n_resamples < 100:
            raise ConfigError("n_resamples must be >= 100 (or 0 to skip)")
        spread = _bootstrap_std(core, shots, n_resamples, rng)
        lo, hi = value - spread, value + spread
        resamples = n_resamples
    return EstimateResult(
        value=float(value),
        ci_low=float(lo),
        ci_high=float(hi),
        n_shots=len(shots),
        n_resamples=resamples,
        estimator_name=name,
        negative_variance=bool(value < 0),
        extras=extras or {},
    )


def _bootstrap_std(core, shots: list[ShotRecord], n_resamples: int, rng: np.random.Generator) -> float:
    n = len(shots)
    vals = np.empty(n_resamples)
    for r in range(n_resamples):
        idx = rng.integers(0, n, size=n)
        vals[r] = core([shots[i] for i in idx])
    return float(np.std(vals))


# --- squeezing parameters ---------------------------------------------------


def xi2_direct(
    shots: list[ShotRecord],
    region: RegionSpec,
    detection_sigma: float,
    n_resamples: int = 0,
    rng: np.random.Generator | None = None,
) -> EstimateResult:
    """Number squeezing of one summed region: the variance of the detected
    population difference, minus the detection-noise budget (two clouds per
    site), normalized to the binomial projection noise 4p(1-p)N_tot."""
    _require_shots(shots)
    if len(region.regions) != 1:
        raise ConfigError("xi2_direct takes a single region")
    n_clouds = 2 * len(region.regions[0])

    def core(data: list[ShotRecord]) -> float:
        sums = _region_sums(data, region)[0]
        na, nb = sums[:, 0], sums[:, 1]
        var_diff = float(np.var(nb - na))
        factor, total = _binomial_factor(na, nb)
        return (var_diff - n_clouds * detection_sigma**2) / (factor * total)

    return _wrap("xi2_direct", core, shots, n_resamples, rng)


def detection_variance_of_z(
    mean_na: float, mean_nb: float, n_sites: int, detection_sigma: float
) -> float:
    """Linearized detection-noise contribution to Var(z) for a summed region."""
    total = mean_na + mean_nb
    if total <= 0:
        raise DataError("non-positive region total")
    return 4.0 * n_sites * detection_sigma**2 * (mean_na**2 + mean_nb**2) / total**4


def xi2_rel(
    shots: list[ShotRecord],
    left: RegionSpec,
    right: RegionSpec,
    detection_sigma: float,
    n_resamples: int = 0,
    rng: np.random.Generator | None = None,
) -> EstimateResult:
    """Relative number squeezing of two regions: Var(z_left - z_right) after
    detection-noise subtraction, over the classical two-mode reference
    4p1(1-p1)/N1 + 4p2(1-p2)/N2."""
    _require_shots(shots)
    if len(left.regions) != 1 or len(right.regions) != 1:
        raise ConfigError("xi2_rel takes two single regions")
    pair = RegionSpec((left.regions[0], right.regions[0]))
    sites_l = len(left.regions[0])
    sites_r = len(right.regions[0])

    def core(data: list[ShotRecord]) -> float:
        dz = np.array([imbalances(s, pair).delta_z for s in data])
        var_dz = float(np.var(dz))
        sums_l, sums_r = _region_sums(data, pair)
        det = detection_variance_of_z(
            float(np.mean(sums_l[:, 0])), float(np.mean(sums_l[:, 1])), sites_l, detection_sigma
        ) + detection_variance_of_z(
            float(np.mean(sums_r[:, 0])), float(np.mean(sums_r[:, 1])), sites_r, detection_sigma
        )
        f1, n1 = _binomial_factor(sums_l[:, 0], sums_l[:, 1])
        f2, n2 = _binomial_factor(sums_r[:, 0], sums_r[:, 1])
        return (var_dz - det) / (f1 / n1 + f2 / n2)

    return _wrap("xi2_rel", core, shots, n_resamples, rng)


def xi2_rel_simple(shots: list[ShotRecord], left: RegionSpec, right: RegionSpec) -> float:
    """Equal-halves shorthand N_tot/4 * Var(delta z), no noise subtraction."""
    _require_shots(shots)
    pair = RegionSpec((left.regions[0], right.regions[0]))
    dz = np.array([imbalances(s, pair).delta_z for s in shots])
    sums_l, sums_r = _region_sums(shots, pair)
    n_tot = float(np.mean(sums_l.sum(axis=1) + sums_r.sum(axis=1)))
    return n_tot / 4.0 * float(np.var(dz))


def xi2_metrological(xi2_n: float, visibility: float) -> float:
    if not 0.0 < visibility <= 1.0:
        raise ConfigError(f"visibility must lie in (0, 1], got {visibility}")
    return xi2_n / visibility**2


# --- fits -------------------------------------------------------------------


@dataclass(frozen=True)
class FringeFit:
    visibility: float
    phase_offset: float  # z = visibility * sin(phase + phase_offset) + offset
    offset: float
    visibility_err: float
    phase_err: float
    residual_rms: float


def fit_fringe(phases, values) -> FringeFit:
    """Linear least squares of A sin(phi) + B cos(phi) + C."""
    phases = np.asarray(phases, dtype=float)
    values = np.asarray(values, dtype=float)
    if phases.shape != values.shape or phases.ndim != 1:
        raise ConfigError("phases and values must be equal-length 1D arrays")
    if len(np.unique(np.round(phases % math.pi, 9))) < 2 or len(phases) < 4:
        raise DataError("need >= 4 samples at >= 2 distinct phases mod pi")
    design = np.column_stack([np.sin(phases), np.cos(phases), np.ones_like(phases)])
    coef, *_ = np.linalg.lstsq(design, values, rcond=None)
    a, b, c = (float(v) for v in coef)
    resid = values - design @ coef
    dof = max(len(values) - 3, 1)
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(design.T @ design)
    amp = math.hypot(a, b)
    if amp > 0:
        grad = np.array([a / amp, b / amp, 0.0])
        amp_err = math.sqrt(max(float(grad @ cov @ grad), 0.0))
        gphase = np.array([-b / amp**2, a / amp**2, 0.0])
        phase_err = math.sqrt(max(float(gphase @ cov @ gphase), 0.0))
    else:
        amp_err = math.sqrt(max(cov[0, 0], cov[1, 1], 0.0))
        phase_err = math.pi
    return FringeFit(
        visibility=amp,
        phase_offset=math.atan2(b, a),
        offset=c,
        visibility_err=amp_err,
        phase_err=phase_err,
        residual_rms=math.sqrt(float(np.mean(resid**2))),
    )


@dataclass(frozen=True)
class QuadraticNoiseFit:
    beta2: float  # coefficient of N^2
    linear_term: float  # coefficient of N
    beta2_err: float
    linear_err: float


def fit_quadratic_noise(ensemble_sizes, variances) -> QuadraticNoiseFit:
    """Least squares of Var = a N + beta^2 N^2 (no constant term: detection
    noise belongs to a, projection noise is the linear part)."""
    sizes = np.asarray(ensemble_sizes, dtype=float)
    var = np.asarray(variances, dtype=float)
    if len(np.unique(sizes)) < 3:
        raise DataError("need at least 3 distinct ensemble sizes")
    design = np.column_stack([sizes, sizes**2])
    coef, *_ = np.linalg.lstsq(design, var, rcond=None)
    resid = var - design @ coef
    dof = max(len(var) - 2, 1)
    cov = float(resid @ resid) / dof * np.linalg.inv(design.T @ design)
    return QuadraticNoiseFit(
        beta2=float(coef[1]),
        linear_term=float(coef[0]),
        beta2_err=math.sqrt(max(cov[1, 1], 0.0)),
        linear_err=math.sqrt(max(cov[0, 0], 0.0)),
    )


# --- resampling -------------------------------------------------------------


def bootstrap(
    estimator,
    shots: list[ShotRecord],
    n_resamples: int,
    rng: np.random.Generator,
    name: str | None = None,
) -> EstimateResult:
    """Nonparametric bootstrap over shots; CI = value +- std of resamples."""
    if n_resamples < 100:
        raise ConfigError("n_resamples must be >= 100")
    _require_shots(shots)
    return _wrap(name or getattr(estimator, "__name__", "estimator"), estimator, shots, n_resamples, rng)
