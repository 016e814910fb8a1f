"""Stochastic experimental imperfections, drawn once per shot.

Field units are Tesla throughout; detunings are returned in rad/s.  The
per-shot field offset is quasi-static: every stage of a shot sees the same
value.  A slower per-block offset models long-term drift.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .units import TWO_PI

FIELD_SIGMA_SHOT = 3.0e-9  # T (30 uG shot to shot)
FIELD_SIGMA_LONGTERM = 4.5e-9  # T (45 uG slow drift)
# During generation the transition is second-order in field: 10 Hz per mG.
# 10 Hz/mG = 10 Hz / 1e-7 T = 1e8 Hz/T.
GEN_FIELD_TO_DETUNING = 1.0e8  # Hz/T
SWAP_SENSITIVITY_RATIO = 140.0  # swapped state is first-order field sensitive
PULSE_DETUNING_SIGMA = 1.5  # Hz, shot-to-shot pulse detuning spread
GEN_DETUNING_SIGMA = 0.45  # Hz, direct-mode generation detuning spread
DETECTION_SIGMA = 4.0  # atoms per detected cloud

RATIO_TOLERANCE = 0.1


class SensitivityRatioWarning(UserWarning):
    pass


@dataclass(frozen=True)
class NoiseConfig:
    field_sigma_shot: float = FIELD_SIGMA_SHOT
    field_sigma_longterm: float = FIELD_SIGMA_LONGTERM
    gen_field_to_detuning: float = GEN_FIELD_TO_DETUNING
    swap_sensitivity_ratio: float = SWAP_SENSITIVITY_RATIO
    pulse_detuning_sigma: float = PULSE_DETUNING_SIGMA
    gen_detuning_sigma: float = GEN_DETUNING_SIGMA
    detection_sigma: float = DETECTION_SIGMA
    gen_mode: str = "direct"  # "direct" draws gen detuning; "field-derived" converts field_offset
    longterm_enabled: bool = False
    block_size: int = 100  # shots sharing one long-term field offset

    def validate(self) -> None:
        for name in (
            "field_sigma_shot",
            "field_sigma_longterm",
            "gen_field_to_detuning",
            "swap_sensitivity_ratio",
            "pulse_detuning_sigma",
            "gen_detuning_sigma",
            "detection_sigma",
        ):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.gen_mode not in ("direct", "field-derived"):
            raise ConfigError(f"unknown gen_mode {self.gen_mode!r}")
        if self.block_size < 1:
            raise ConfigError("block_size must be >= 1")


@dataclass(frozen=True)
class ShotNoise:
    field_offset: float  # T, constant within the shot
    gen_detuning: float  # rad/s added during generation stages
    pulse_detuning: float  # rad/s added during driven pulses

    @staticmethod
    def zero() -> "ShotNoise":
        return ShotNoise(0.0, 0.0, 0.0)


def draw_block_offset(config: NoiseConfig, rng: np.random.Generator) -> float:
    """Slow field drift shared by a block of shots (Tesla)."""
    if not config.longterm_enabled or config.field_sigma_longterm == 0.0:
        return 0.0
    return float(rng.normal(0.0, config.field_sigma_longterm))


def draw_shot_noise(
    config: NoiseConfig,
    rng: np.random.Generator,
    block_offset: float = 0.0,
) -> ShotNoise:
    return draw_shot_noise_split(config, rng, rng, rng, block_offset)


def draw_shot_noise_split(
    config: NoiseConfig,
    field_rng: np.random.Generator,
    gen_rng: np.random.Generator,
    pulse_rng: np.random.Generator,
    block_offset: float = 0.0,
) -> ShotNoise:
    """Draw one shot's noise with a separate generator per component, so each
    component can live on its own derived substream."""
    field = block_offset
    if config.field_sigma_shot > 0.0:
        field += float(field_rng.normal(0.0, config.field_sigma_shot))
    if config.gen_mode == "field-derived":
        gen = TWO_PI * config.gen_field_to_detuning * field
    else:
        gen = TWO_PI * float(gen_rng.normal(0.0, config.gen_detuning_sigma)) if config.gen_detuning_sigma > 0 else 0.0
    pulse = (
        TWO_PI * float(pulse_rng.normal(0.0, config.pulse_detuning_sigma))
        if config.pulse_detuning_sigma > 0
        else 0.0
    )
    return ShotNoise(field_offset=field, gen_detuning=gen, pulse_detuning=pulse)


def detuning_during_hold(config: NoiseConfig, field_offset: float, swapped_sensitivity: float) -> float:
    """Detuning (rad/s) of the swapped, first-order-sensitive state pair."""
    if swapped_sensitivity <= 0:
        raise ConfigError("swapped sensitivity must be positive")
    check_sensitivity_ratio(config, swapped_sensitivity)
    return TWO_PI * swapped_sensitivity * field_offset


def check_sensitivity_ratio(config: NoiseConfig, swapped_sensitivity: float) -> bool:
    """Warn (once) when S disagrees with ratio * generation sensitivity."""
    if config.gen_field_to_detuning <= 0 or config.swap_sensitivity_ratio <= 0:
        return True
    ratio = swapped_sensitivity / config.gen_field_to_detuning
    ok = abs(ratio / config.swap_sensitivity_ratio - 1.0) <= RATIO_TOLERANCE
    if not ok:
        warnings.warn(
            f"swapped sensitivity / generation sensitivity = {ratio:.1f}, "
            f"configured ratio {config.swap_sensitivity_ratio:.1f}",
            SensitivityRatioWarning,
            stacklevel=3,
        )
    return ok
