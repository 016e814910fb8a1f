"""Shot-noise draws, long-term drift blocks, and the sensitivity-ratio guard."""

import math

import numpy as np
import pytest

from squeezelab import rng as streams
from squeezelab.errors import ConfigError
from squeezelab.noise import (
    GEN_FIELD_TO_DETUNING,
    SensitivityRatioWarning,
    NoiseConfig,
    ShotNoise,
    check_sensitivity_ratio,
    detuning_during_hold,
    draw_block_offset,
    draw_shot_noise,
    draw_shot_noise_split,
)
from squeezelab.units import TWO_PI


def test_defaults_match_documented_magnitudes():
    cfg = NoiseConfig()
    assert cfg.field_sigma_shot == pytest.approx(3.0e-9)
    assert cfg.field_sigma_longterm == pytest.approx(4.5e-9)
    assert cfg.gen_field_to_detuning == pytest.approx(1.0e8)
    assert cfg.swap_sensitivity_ratio == pytest.approx(140.0)
    assert cfg.pulse_detuning_sigma == pytest.approx(1.5)
    assert cfg.gen_detuning_sigma == pytest.approx(0.45)
    assert cfg.detection_sigma == pytest.approx(4.0)
    assert not cfg.longterm_enabled


def test_zero_sigmas_give_zero_noise():
    cfg = NoiseConfig(field_sigma_shot=0.0, pulse_detuning_sigma=0.0, gen_detuning_sigma=0.0)
    shot = draw_shot_noise(cfg, np.random.default_rng(0))
    assert shot == ShotNoise.zero()


def test_draw_statistics_match_configured_sigmas():
    cfg = NoiseConfig()
    rng = np.random.default_rng(123)
    draws = [draw_shot_noise(cfg, rng) for _ in range(100_000)]
    fields = np.array([d.field_offset for d in draws])
    gens = np.array([d.gen_detuning for d in draws])
    pulses = np.array([d.pulse_detuning for d in draws])
    assert np.std(fields) == pytest.approx(3.0e-9, rel=0.02)
    assert np.std(gens) == pytest.approx(TWO_PI * 0.45, rel=0.02)
    assert np.std(pulses) == pytest.approx(TWO_PI * 1.5, rel=0.02)
    assert abs(np.mean(fields)) < 5e-11


def test_field_derived_generation_detuning_is_exact_conversion():
    cfg = NoiseConfig(field_sigma_shot=0.0, gen_mode="field-derived")
    shot = draw_shot_noise(cfg, np.random.default_rng(0), block_offset=3.0e-9)
    assert shot.field_offset == pytest.approx(3.0e-9)
    assert shot.gen_detuning == pytest.approx(TWO_PI * GEN_FIELD_TO_DETUNING * 3.0e-9)
    assert shot.gen_detuning == pytest.approx(TWO_PI * 0.3)


def test_split_streams_draw_components_independently():
    cfg = NoiseConfig()
    a = draw_shot_noise_split(
        cfg,
        streams.substream(7, streams.FIELD, 0),
        streams.substream(7, streams.GEN_DETUNING, 0),
        streams.substream(7, streams.PULSE_DETUNING, 0),
    )
    b = draw_shot_noise_split(
        cfg,
        streams.substream(7, streams.FIELD, 0),
        streams.substream(7, streams.GEN_DETUNING, 1),
        streams.substream(7, streams.PULSE_DETUNING, 1),
    )
    assert a.field_offset == b.field_offset
    assert a.gen_detuning != b.gen_detuning
    assert a.pulse_detuning != b.pulse_detuning


def test_block_offset_disabled_by_default():
    assert draw_block_offset(NoiseConfig(), np.random.default_rng(0)) == 0.0


def test_block_offset_statistics_when_enabled():
    cfg = NoiseConfig(longterm_enabled=True)
    rng = np.random.default_rng(5)
    draws = np.array([draw_block_offset(cfg, rng) for _ in range(50_000)])
    assert np.std(draws) == pytest.approx(4.5e-9, rel=0.02)


def test_detuning_during_hold_converts_field():
    cfg = NoiseConfig()
    sens = 140.0 * cfg.gen_field_to_detuning
    assert detuning_during_hold(cfg, 2.0e-9, sens) == pytest.approx(TWO_PI * sens * 2.0e-9)
    with pytest.raises(ConfigError):
        detuning_during_hold(cfg, 1e-9, 0.0)


def test_sensitivity_ratio_guard_warns_on_mismatch():
    cfg = NoiseConfig()
    with pytest.warns(SensitivityRatioWarning):
        assert not check_sensitivity_ratio(cfg, 1.0e10)


def test_sensitivity_ratio_guard_accepts_configured_ratio():
    cfg = NoiseConfig()
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert check_sensitivity_ratio(cfg, 140.0 * cfg.gen_field_to_detuning)
        # 10% tolerance band
        assert check_sensitivity_ratio(cfg, 1.09 * 140.0 * cfg.gen_field_to_detuning)


def test_config_validation_rejects_bad_values():
    with pytest.raises(ConfigError):
        NoiseConfig(detection_sigma=-1.0).validate()
    with pytest.raises(ConfigError):
        NoiseConfig(gen_mode="resonant").validate()
    with pytest.raises(ConfigError):
        NoiseConfig(block_size=0).validate()
    NoiseConfig().validate()
