"""Field/gradient inversion formulas and the shot-noise-limit anchor."""

import math

import numpy as np
import pytest

from squeezelab.errors import ConfigError, DataError
from squeezelab.lattice import LatticeConfig, RegionSpec, build_lattice, halves
from squeezelab.magnetometry import (
    S_DEFAULT,
    SQL_ANCHOR_N,
    SQL_ANCHOR_SIGMA,
    SQL_ANCHOR_T_INT,
    FieldProtocolParams,
    GradiometerGeometry,
    delta_b,
    duty_cycle_sensitivity,
    enhancement_fraction,
    gradient_estimate,
    sensitivity,
    sql,
    sql_with_detection,
    working_point_dz,
)
from squeezelab.units import TWO_PI

ANCHOR = FieldProtocolParams()


def test_sql_anchor_identity_is_exact():
    # the sensitivity default is the inversion of the anchor point, so the
    # round trip must close to machine precision
    assert ANCHOR.t_int == pytest.approx(SQL_ANCHOR_T_INT, abs=1e-18)
    assert sql(SQL_ANCHOR_N, ANCHOR) == pytest.approx(SQL_ANCHOR_SIGMA, rel=1e-14)
    assert S_DEFAULT == pytest.approx(1.0984e10, rel=1e-3)


def test_sql_scales_inverse_sqrt_n():
    assert sql(4 * SQL_ANCHOR_N, ANCHOR) == pytest.approx(0.5 * SQL_ANCHOR_SIGMA, rel=1e-12)


def test_delta_b_small_signal_linear_and_odd():
    small = 1e-4
    expected = small / (TWO_PI * S_DEFAULT * ANCHOR.t_int)
    assert delta_b(small, ANCHOR) == pytest.approx(expected, rel=1e-6)
    assert delta_b(-small, ANCHOR) == pytest.approx(-delta_b(small, ANCHOR), rel=1e-12)


def test_delta_b_uses_arcsine_beyond_linear():
    params = FieldProtocolParams(visibility=0.8)
    dz = 1.2  # dz / 2V = 0.75, clearly nonlinear
    expected = 2.0 * math.asin(0.75) / (TWO_PI * S_DEFAULT * params.t_int)
    assert delta_b(dz, params) == pytest.approx(expected, rel=1e-12)


def test_delta_b_rejects_amplitude_beyond_fringe():
    with pytest.raises(DataError, match="exceeds"):
        delta_b(2.1, ANCHOR)


def test_sensitivity_visibility_and_time_scaling():
    base = sensitivity(0.01, ANCHOR)
    half_v = sensitivity(0.01, FieldProtocolParams(visibility=0.5))
    assert half_v == pytest.approx(2.0 * base, rel=1e-12)
    longer = FieldProtocolParams(t_hold=ANCHOR.t_hold + ANCHOR.t_int)
    assert sensitivity(0.01, longer) == pytest.approx(0.5 * base, rel=1e-12)


def test_sigma_over_sql_equals_relative_spread_identity():
    # sensitivity(std/2) / sql(n) must equal (std/2) * sqrt(n) independent of
    # V, S, and t_int -- the normalization chain cancels exactly
    rng = np.random.default_rng(11)
    for _ in range(10):
        params = FieldProtocolParams(
            s_per_tesla=float(rng.uniform(1e9, 1e11)),
            t_hold=float(rng.uniform(1e-4, 5e-3)),
            visibility=float(rng.uniform(0.3, 1.0)),
        )
        n = int(rng.integers(100, 20000))
        std_dz = float(rng.uniform(1e-3, 0.05))
        ratio = sensitivity(0.5 * std_dz, params) / sql(n, params)
        assert ratio == pytest.approx(0.5 * std_dz * math.sqrt(n), rel=1e-12)


def test_sql_with_detection_adds_noise_floor():
    clean = sql_with_detection(1000, ANCHOR, 0.0)
    assert clean == pytest.approx(sql(1000, ANCHOR), rel=1e-12)
    noisy = sql_with_detection(1000, ANCHOR, 4.0 / 1000)
    assert noisy == pytest.approx(math.sqrt(2.0) * clean, rel=1e-12)


def test_working_point_dz_hand_value():
    v, dphi = 0.9, 0.2
    # centered working point: cos factor unity, amplitude 2 V sin(dphi / 2)
    centered = working_point_dz(-0.5 * dphi, dphi, v)
    assert centered == pytest.approx(-2.0 * v * math.sin(0.1), rel=1e-12)
    # a quarter turn away the signal vanishes
    node = working_point_dz(-0.5 * dphi + 0.5 * math.pi, dphi, v)
    assert node == pytest.approx(0.0, abs=1e-12)


def test_geometry_from_half_lattice():
    sites = build_lattice(LatticeConfig(n_sites=25), np.random.default_rng(0))
    geom = GradiometerGeometry.from_regions(sites, halves(25))
    # 13-site and 12-site halves of a 5.5 um lattice: centroids 68.75 um apart
    assert geom.baseline_um == pytest.approx(68.75, rel=1e-12)
    assert geom.left == tuple(range(13))
    assert geom.right == tuple(range(13, 25))


def test_geometry_rejects_bad_regions():
    sites = build_lattice(LatticeConfig(n_sites=4), np.random.default_rng(0))
    with pytest.raises(ConfigError, match="two regions"):
        GradiometerGeometry.from_regions(sites, RegionSpec(((0, 1),)))
    with pytest.raises(ConfigError, match="baseline"):
        GradiometerGeometry.from_regions(sites, RegionSpec(((0, 3), (1, 2))))


def test_gradient_estimate_divides_by_baseline():
    geom = GradiometerGeometry(baseline_um=50.0)
    assert gradient_estimate(1e-9, geom) == pytest.approx(2e-11, rel=1e-12)
    with pytest.raises(ConfigError):
        gradient_estimate(1e-9, GradiometerGeometry(baseline_um=0.0))


def test_duty_cycle_and_enhancement():
    assert duty_cycle_sensitivity(1e-12, 36.0) == pytest.approx(6e-12, rel=1e-12)
    assert enhancement_fraction(300e-12, 400e-12) == pytest.approx(0.25, rel=1e-12)
    assert enhancement_fraction(500e-12, 400e-12) < 0
    with pytest.raises(ConfigError):
        enhancement_fraction(1.0, 0.0)


def test_protocol_validation():
    with pytest.raises(ConfigError):
        FieldProtocolParams(s_per_tesla=0.0).validate()
    with pytest.raises(ConfigError):
        FieldProtocolParams(visibility=0.0).validate()
    with pytest.raises(ConfigError):
        FieldProtocolParams(t_hold=-1.0, t_pi=0.0).validate()
