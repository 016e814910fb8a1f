"""Field and gradient estimation from Ramsey fringe observables.

The swapped-state sensitivity default is anchored by inverting the
shot-noise-limit relation sigma_SQL = 1/(2 pi V S t_int sqrt(N)) at the
reference operating point (382 pT, N = 12300, V = 1, t_int = 342 us), so
every downstream Tesla-level number traces back to that single anchor.  The
printed sensitivity figures in the source material are mutually
inconsistent; S therefore stays a config parameter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError, DataError
from .lattice import RegionSpec, SiteParams, region_centroid
from .sequences import T_PI_SWAP
from .units import TWO_PI

SQL_ANCHOR_SIGMA = 382e-12  # T
SQL_ANCHOR_N = 12300
SQL_ANCHOR_T_INT = 342e-6  # s
S_DEFAULT = 1.0 / (TWO_PI * SQL_ANCHOR_T_INT * math.sqrt(SQL_ANCHOR_N) * SQL_ANCHOR_SIGMA)  # Hz/T
B0_DEFAULT = 9.12e-4  # T bias field
CYCLE_TIME_DEFAULT = 36.0  # s per experimental cycle


@dataclass(frozen=True)
class FieldProtocolParams:
    s_per_tesla: float = S_DEFAULT  # swapped-state sensitivity, Hz/T
    b0: float = B0_DEFAULT
    t_hold: float = SQL_ANCHOR_T_INT - 2.0 * T_PI_SWAP
    t_pi: float = T_PI_SWAP
    visibility: float = 1.0

    @property
    def t_int(self) -> float:
        return self.t_hold + 2.0 * self.t_pi

    def validate(self) -> None:
        if self.s_per_tesla <= 0:
            raise ConfigError("sensitivity S must be positive")
        if self.t_int <= 0:
            raise ConfigError("interrogation time must be positive")
        if not 0.0 < self.visibility <= 1.0:
            raise ConfigError(f"visibility must lie in (0, 1], got {self.visibility}")


def delta_b(dz_max: float, params: FieldProtocolParams) -> float:
    """Field offset from the differential fringe amplitude dz_max."""
    params.validate()
    x = dz_max / (2.0 * params.visibility)
    if abs(x) > 1.0 + 1e-12:
        raise DataError(f"fringe amplitude {dz_max} exceeds 2V = {2 * params.visibility}")
    x = min(max(x, -1.0), 1.0)
    return 2.0 * math.asin(x) / (TWO_PI * params.s_per_tesla * params.t_int)


def sensitivity(std_dz: float, params: FieldProtocolParams) -> float:
    """Single-shot field sensitivity from the differential-imbalance spread."""
    params.validate()
    if std_dz < 0:
        raise ConfigError("std_dz must be non-negative")
    return std_dz / (TWO_PI * params.visibility * params.s_per_tesla * params.t_int)


def sql(n_tot: int, params: FieldProtocolParams) -> float:
    """Shot-noise-limited sensitivity of n_tot uncorrelated atoms."""
    params.validate()
    if n_tot < 1:
        raise ConfigError("n_tot must be >= 1")
    return 1.0 / (TWO_PI * params.visibility * params.s_per_tesla * params.t_int * math.sqrt(n_tot))


def sql_with_detection(n_tot: int, params: FieldProtocolParams, detection_var_dz: float) -> float:
    """SQL including the detection-noise floor on the differential imbalance;
    reduces to sql() when the detection variance is zero."""
    params.validate()
    if n_tot < 1:
        raise ConfigError("n_tot must be >= 1")
    std = 0.5 * math.sqrt(4.0 / n_tot + max(detection_var_dz, 0.0))
    return sensitivity(std, params)


def working_point_dz(phi_left: float, dphi: float, visibility: float) -> float:
    """Differential imbalance at readout phase offset phi_left when the two
    regions' fringes differ by dphi."""
    return -2.0 * visibility * math.sin(0.5 * dphi) * math.cos(0.5 * dphi + phi_left)


@dataclass(frozen=True)
class GradiometerGeometry:
    baseline_um: float
    left: tuple[int, ...] = ()
    right: tuple[int, ...] = ()

    @staticmethod
    def from_regions(sites: list[SiteParams], spec: RegionSpec) -> "GradiometerGeometry":
        if spec.n_regions != 2:
            raise ConfigError("gradiometer geometry needs exactly two regions")
        left, right = spec.regions
        baseline = abs(region_centroid(sites, right) - region_centroid(sites, left))
        if baseline <= 0:
            raise ConfigError("zero gradiometer baseline")
        return GradiometerGeometry(baseline_um=baseline, left=left, right=right)


def gradient_estimate(delta_b_tesla: float, geometry: GradiometerGeometry) -> float:
    """Field gradient in T/um from a differential field and a baseline."""
    if geometry.baseline_um <= 0:
        raise ConfigError("baseline must be positive")
    return delta_b_tesla / geometry.baseline_um


def duty_cycle_sensitivity(sigma_b: float, cycle_time: float = CYCLE_TIME_DEFAULT) -> float:
    """Bandwidth-normalized sensitivity sigma_B * sqrt(cycle_time), T/sqrt(Hz)."""
    if cycle_time <= 0:
        raise ConfigError("cycle_time must be positive")
    return sigma_b * math.sqrt(cycle_time)


def enhancement_fraction(sigma_b: float, sigma_sql: float) -> float:
    """Fractional improvement over the shot-noise limit, 1 - sigma/sigma_SQL."""
    if sigma_sql <= 0:
        raise ConfigError("sigma_sql must be positive")
    return 1.0 - sigma_b / sigma_sql
