"""Squeezing estimators, fringe/quadratic fits, and bootstrap behavior."""

import math

import numpy as np
import pytest

from squeezelab import rng as streams
from squeezelab.errors import ConfigError, DataError
from squeezelab.estimators import (
    bootstrap,
    detection_variance_of_z,
    fit_fringe,
    fit_quadratic_noise,
    xi2_direct,
    xi2_metrological,
    xi2_rel,
    xi2_rel_simple,
)
from squeezelab.lattice import RegionSpec
from util import binomial_records, records_from_detected

LEFT = RegionSpec(((0, 1, 2),))
RIGHT = RegionSpec(((3, 4, 5),))
FULL = RegionSpec(((0, 1, 2, 3, 4, 5),))
ATOMS = [600] * 6


def _shift_common_mode(records, offsets):
    """Add a per-shot common-mode imbalance shift (exact in z) to every site."""
    n_a = np.array([r.n_a_det for r in records], dtype=float)
    n_b = np.array([r.n_b_det for r in records], dtype=float)
    total = n_a + n_b
    shift = 0.5 * total * np.asarray(offsets)[:, None]
    return records_from_detected(n_a - shift, n_b + shift)


# --- squeezing parameters ----------------------------------------------------


def test_binomial_populations_give_unity_xi2_direct():
    rng = np.random.default_rng(101)
    records = binomial_records(rng, 1500, ATOMS)
    result = xi2_direct(records, FULL, 0.0, n_resamples=200, rng=np.random.default_rng(1))
    assert result.value == pytest.approx(1.0, abs=0.15)
    assert abs(result.value - 1.0) < 4.0 * result.ci_halfwidth
    assert not result.negative_variance


def test_detection_noise_budget_is_subtracted():
    rng = np.random.default_rng(202)
    records = binomial_records(rng, 1500, ATOMS, detection_sigma=4.0)
    with_sub = xi2_direct(records, FULL, 4.0)
    without = xi2_direct(records, FULL, 0.0)
    assert with_sub.value == pytest.approx(1.0, abs=0.15)
    # the budget for 6 sites (12 detected clouds) is 12 sigma^2 on Var(N_b - N_a),
    # normalized by the same empirical binomial reference in both runs
    n_a = np.array([r.n_a_det for r in records]).sum(axis=1)
    n_b = np.array([r.n_b_det for r in records]).sum(axis=1)
    total = np.mean(n_a + n_b)
    p = 0.5 + np.mean(n_b - n_a) / (2.0 * total)
    reference = 4.0 * p * (1.0 - p) * total
    assert without.value - with_sub.value == pytest.approx(12 * 16.0 / reference, rel=1e-9)


def test_binomial_populations_give_unity_xi2_rel():
    rng = np.random.default_rng(303)
    records = binomial_records(rng, 1500, ATOMS, detection_sigma=4.0)
    result = xi2_rel(records, LEFT, RIGHT, 4.0, n_resamples=200, rng=np.random.default_rng(2))
    assert result.value == pytest.approx(1.0, abs=0.15)


def test_common_mode_invariance_is_exact():
    rng = np.random.default_rng(404)
    records = binomial_records(rng, 600, ATOMS)
    offsets = rng.normal(0.0, 0.05, size=600)
    offsets -= offsets.mean()  # keep region totals' mean imbalance untouched
    shifted = _shift_common_mode(records, offsets)

    clean = xi2_rel(records, LEFT, RIGHT, 0.0).value
    noisy = xi2_rel(shifted, LEFT, RIGHT, 0.0).value
    assert noisy == pytest.approx(clean, rel=1e-12)

    # the same shift inflates the direct estimator, so the check has power
    assert xi2_direct(shifted, FULL, 0.0).value > 5.0 * xi2_direct(records, FULL, 0.0).value


def test_direct_at_least_rel_under_common_mode_noise():
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        records = binomial_records(rng, 300, ATOMS)
        shifted = _shift_common_mode(records, rng.normal(0.0, 0.02, size=300))
        direct = xi2_direct(shifted, FULL, 0.0).value
        rel = xi2_rel(shifted, LEFT, RIGHT, 0.0).value
        assert direct >= rel


def test_weighted_combination_matches_xi2_rel():
    # noise-free synthetic data, equal halves: the relative estimator agrees
    # with the population-weighted mean of the halves' direct values
    rng = np.random.default_rng(505)
    records = binomial_records(rng, 1500, ATOMS)
    boot = np.random.default_rng(3)
    rel = xi2_rel(records, LEFT, RIGHT, 0.0, n_resamples=200, rng=boot)
    d_left = xi2_direct(records, LEFT, 0.0, n_resamples=200, rng=boot)
    d_right = xi2_direct(records, RIGHT, 0.0, n_resamples=200, rng=boot)
    n_left = n_right = 3 * 600
    weighted = (n_left * d_left.value + n_right * d_right.value) / (n_left + n_right)
    ci = rel.ci_halfwidth + 0.5 * (d_left.ci_halfwidth + d_right.ci_halfwidth)
    assert abs(rel.value - weighted) < 2.0 * ci


def test_xi2_rel_simple_formula():
    n_a = np.array([[300.0, 310.0], [290.0, 305.0], [310.0, 295.0], [305.0, 290.0]])
    n_b = 600.0 - n_a
    records = records_from_detected(n_a, n_b)
    left, right = RegionSpec(((0,),)), RegionSpec(((1,),))
    dz = (n_b[:, 0] - n_a[:, 0]) / 600.0 - (n_b[:, 1] - n_a[:, 1]) / 600.0
    expected = 1200.0 / 4.0 * np.var(dz)
    assert xi2_rel_simple(records, left, right) == pytest.approx(expected, rel=1e-12)


def test_xi2_metrological_scales_by_visibility():
    assert xi2_metrological(0.5, 0.8) == pytest.approx(0.5 / 0.64)
    with pytest.raises(ConfigError):
        xi2_metrological(0.5, 0.0)
    with pytest.raises(ConfigError):
        xi2_metrological(0.5, 1.2)


def test_negative_variance_flagged():
    n_a = np.full((50, 2), 300.0)
    n_b = np.full((50, 2), 300.0)
    records = records_from_detected(n_a, n_b)
    result = xi2_direct(records, RegionSpec(((0, 1),)), 4.0)
    assert result.value < 0
    assert result.negative_variance


def test_detection_variance_of_z_matches_monte_carlo():
    rng = np.random.default_rng(606)
    sigma, n_sites, per_mode = 4.0, 2, 500.0
    draws = 200_000
    na = per_mode + rng.normal(0.0, sigma, size=(draws, n_sites)).sum(axis=1)
    nb = per_mode + rng.normal(0.0, sigma, size=(draws, n_sites)).sum(axis=1)
    z = (nb - na) / (nb + na)
    predicted = detection_variance_of_z(per_mode, per_mode, n_sites, sigma)
    assert np.var(z) == pytest.approx(predicted, rel=0.03)


# --- guards ------------------------------------------------------------------


def test_minimum_shots_enforced():
    records = binomial_records(np.random.default_rng(0), 1, ATOMS)
    with pytest.raises(DataError, match="at least 2 shots"):
        xi2_direct(records, FULL, 0.0)


def test_region_shape_guards():
    records = binomial_records(np.random.default_rng(0), 10, ATOMS)
    two = RegionSpec(((0, 1), (2, 3)))
    with pytest.raises(ConfigError, match="single region"):
        xi2_direct(records, two, 0.0)
    with pytest.raises(ConfigError, match="two single regions"):
        xi2_rel(records, two, RIGHT, 0.0)


# --- fits --------------------------------------------------------------------


def test_fit_fringe_exact_recovery():
    phases = np.radians(np.arange(0, 360, 30))
    values = 0.8 * np.sin(phases + 0.6) + 0.1
    fit = fit_fringe(phases, values)
    assert fit.visibility == pytest.approx(0.8, rel=1e-12)
    assert fit.phase_offset == pytest.approx(0.6, abs=1e-12)
    assert fit.offset == pytest.approx(0.1, abs=1e-12)
    assert fit.residual_rms < 1e-12
    assert fit.visibility_err < 1e-10


def test_fit_fringe_phase_shift_moves_offset_only():
    rng = np.random.default_rng(7)
    phases = np.radians(np.arange(0, 360, 30))
    values = 0.7 * np.sin(phases + 0.4) + rng.normal(0, 1e-3, phases.size)
    base = fit_fringe(phases, values)
    shifted = fit_fringe(phases + 1.0, values)
    assert shifted.visibility == pytest.approx(base.visibility, rel=1e-9)
    wrapped = (base.phase_offset - shifted.phase_offset + math.pi) % (2 * math.pi) - math.pi
    assert wrapped == pytest.approx(1.0, abs=1e-9)


def test_fit_fringe_rejects_degenerate_input():
    with pytest.raises(DataError):
        fit_fringe([0.0, math.pi, 2 * math.pi, 3 * math.pi], [0, 0, 0, 0])
    with pytest.raises(DataError):
        fit_fringe([0.0, 1.0, 2.0], [0, 0, 0])
    with pytest.raises(ConfigError):
        fit_fringe([0.0, 1.0], [0, 0, 0])


def test_fit_quadratic_noise_exact_recovery():
    sizes = np.array([1000.0, 2000.0, 3000.0, 4000.0, 5000.0])
    var = 0.3 * sizes + 5e-4 * sizes**2
    fit = fit_quadratic_noise(sizes, var)
    assert fit.beta2 == pytest.approx(5e-4, rel=1e-9)
    assert fit.linear_term == pytest.approx(0.3, rel=1e-9)
    assert fit.beta2_err < 1e-10
    with pytest.raises(DataError):
        fit_quadratic_noise([1000, 1000, 2000], [1, 1, 2])


# --- bootstrap ---------------------------------------------------------------


def test_bootstrap_ci_is_deterministic_per_stream():
    records = binomial_records(np.random.default_rng(1), 200, ATOMS)
    a = xi2_direct(records, FULL, 0.0, n_resamples=200, rng=streams.substream(9, streams.BOOTSTRAP))
    b = xi2_direct(records, FULL, 0.0, n_resamples=200, rng=streams.substream(9, streams.BOOTSTRAP))
    c = xi2_direct(records, FULL, 0.0, n_resamples=200, rng=streams.substream(10, streams.BOOTSTRAP))
    assert (a.ci_low, a.ci_high) == (b.ci_low, b.ci_high)
    assert (a.ci_low, a.ci_high) != (c.ci_low, c.ci_high)
    assert a.n_resamples == 200


def test_bootstrap_resample_floor():
    records = binomial_records(np.random.default_rng(1), 50, ATOMS)
    with pytest.raises(ConfigError, match="n_resamples"):
        xi2_direct(records, FULL, 0.0, n_resamples=50, rng=np.random.default_rng(0))
    with pytest.raises(ConfigError, match="n_resamples"):
        bootstrap(lambda shots: 1.0, records, 10, np.random.default_rng(0))


def test_bootstrap_wraps_custom_estimator():
    records = binomial_records(np.random.default_rng(1), 100, ATOMS)

    def imbalance_spread(shots):
        return float(np.std([r.n_b_det.sum() - r.n_a_det.sum() for r in shots]))

    result = bootstrap(imbalance_spread, records, 200, np.random.default_rng(4))
    assert result.estimator_name == "imbalance_spread"
    assert result.value == pytest.approx(math.sqrt(3600.0), rel=0.2)
    assert result.ci_halfwidth > 0
