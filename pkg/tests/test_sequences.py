"""Sequence builders, validation, serialization, and single-site execution."""

import math

import numpy as np
import pytest

from squeezelab import collective, sequences
from squeezelab.errors import ConfigError
from squeezelab.lattice import SiteParams
from squeezelab.loss import LossConfig
from squeezelab.noise import NoiseConfig, ShotNoise
from squeezelab.sequences import (
    OMEGA_GEN,
    PHASE_SQUEEZED_ANGLE,
    PHASE_SQUEEZED_PHASE,
    T_PI_SWAP,
    ExecutionParams,
    FreeOAT,
    Hold,
    Pulse,
    Readout,
    Sequence,
    SwapIn,
    SwapOut,
    execute,
    interrogation_time,
    make_oat_sequence,
    make_ramsey_sequence,
    sequence_from_dict,
    sequence_to_dict,
    tomography_readout,
)
from squeezelab.units import TWO_PI


def _site(n_atoms=40, chi=0.0, delta=0.0):
    return SiteParams(site_index=0, n_atoms=n_atoms, chi=chi, delta_offset=delta, position=0.0)


def _run(seq, site, *, swapped_sensitivity=0.0, extra_field=0.0):
    params = ExecutionParams(
        noise_config=NoiseConfig(),
        swapped_sensitivity=swapped_sensitivity,
        extra_field=extra_field,
    )
    return execute(seq, site, ShotNoise.zero(), params)


def _z(state):
    return 2.0 * collective.moments(state).mean[2] / state.n_atoms


# --- builders ----------------------------------------------------------------


def test_oat_builder_structure():
    seq = make_oat_sequence(0.020, math.radians(-30.0))
    kinds = [type(s) for s in seq.steps]
    assert kinds == [Pulse, FreeOAT, Pulse, FreeOAT, Readout]
    pi2, echo = seq.steps[0], seq.steps[2]
    assert pi2.phase == 0.0
    assert pi2.duration == pytest.approx((0.5 * math.pi) / OMEGA_GEN)
    assert echo.phase == pytest.approx(1.5 * math.pi)
    assert echo.duration == pytest.approx(math.pi / OMEGA_GEN)
    assert seq.steps[1].duration == pytest.approx(0.010)
    readout = seq.steps[-1]
    assert readout.kind == "tomography"
    assert readout.angle == pytest.approx(math.radians(30.0))
    assert readout.phase == pytest.approx(1.5 * math.pi)


def test_oat_builder_no_echo_single_free_segment():
    seq = make_oat_sequence(0.020, 0.0, echo=False)
    kinds = [type(s) for s in seq.steps]
    assert kinds == [Pulse, FreeOAT, Readout]
    assert seq.steps[1].duration == pytest.approx(0.020)


def test_echo_deficit_shortens_echo_pulse():
    seq = make_oat_sequence(0.010, 0.0, echo_deficit=0.1)
    echo = seq.steps[2]
    assert echo.duration == pytest.approx((math.pi - 0.1) / OMEGA_GEN)


def test_tomography_readout_sign_convention():
    pos = tomography_readout(math.radians(20.0))
    neg = tomography_readout(math.radians(-20.0))
    assert pos.angle == neg.angle == pytest.approx(math.radians(20.0))
    assert pos.phase == pytest.approx(0.5 * math.pi)
    assert neg.phase == pytest.approx(1.5 * math.pi)


def test_ramsey_builder_order_and_rotation():
    seq = make_ramsey_sequence(1e-3, 0.25)
    kinds = [type(s) for s in seq.steps]
    assert kinds == [Pulse, FreeOAT, Pulse, FreeOAT, Pulse, SwapOut, Hold, SwapIn, Readout]
    rotation = seq.steps[4]
    assert rotation.duration == pytest.approx(PHASE_SQUEEZED_ANGLE / OMEGA_GEN)
    assert rotation.phase == pytest.approx(PHASE_SQUEEZED_PHASE)
    assert seq.steps[6].duration == pytest.approx(1e-3)
    readout = seq.steps[-1]
    assert readout.kind == "ramsey"
    assert readout.phase == pytest.approx(0.25)


def test_ramsey_builder_zero_rotation_drops_pulse():
    seq = make_ramsey_sequence(1e-3, 0.0, rotation_angle=0.0)
    kinds = [type(s) for s in seq.steps]
    assert kinds == [Pulse, FreeOAT, Pulse, FreeOAT, SwapOut, Hold, SwapIn, Readout]


def test_interrogation_time_adds_both_swap_pulses():
    assert interrogation_time(0.0) == pytest.approx(2.0 * T_PI_SWAP)
    assert interrogation_time(1e-3) == pytest.approx(1e-3 + 1.0 / 7000.0)


def test_negative_evolution_or_hold_rejected():
    with pytest.raises(ConfigError):
        make_oat_sequence(-1e-3, 0.0)
    with pytest.raises(ConfigError):
        make_ramsey_sequence(-1e-6, 0.0)


# --- validation --------------------------------------------------------------


def test_validate_rejects_bad_swap_nesting():
    hold = Hold(1e-3)
    with pytest.raises(ConfigError, match="Hold outside"):
        Sequence((hold,)).validate()
    with pytest.raises(ConfigError, match="SwapIn without"):
        Sequence((SwapIn(),)).validate()
    with pytest.raises(ConfigError, match="nested"):
        Sequence((SwapOut(), SwapOut())).validate()
    with pytest.raises(ConfigError, match="never closed"):
        Sequence((SwapOut(), hold)).validate()


def test_validate_rejects_negative_duration():
    with pytest.raises(ConfigError, match="duration"):
        Sequence((FreeOAT(-1e-6),)).validate()


def test_sequence_without_readout_validates_and_runs():
    seq = make_oat_sequence(1e-3, 0.0, ideal_pulses=True)
    sliced = Sequence(seq.steps[:-1])
    sliced.validate()
    state = _run(sliced, _site())
    assert state.norm_error() < 1e-10


def test_with_readout_replaces_existing():
    seq = make_oat_sequence(1e-3, 0.0)
    swapped = seq.with_readout(Readout(kind="ramsey", phase=1.0))
    assert sum(isinstance(s, Readout) for s in swapped.steps) == 1
    assert swapped.steps[-1].kind == "ramsey"


# --- serialization -----------------------------------------------------------


def test_serialization_round_trip():
    seq = make_ramsey_sequence(2e-3, 0.5, echo_deficit=0.05, name="probe")
    clone = sequence_from_dict(sequence_to_dict(seq))
    assert clone == seq


def test_serialization_rejects_unknown_step():
    with pytest.raises(ConfigError, match="unknown sequence step"):
        sequence_from_dict({"steps": [{"type": "warp"}]})
    with pytest.raises(ConfigError, match="bad fields"):
        sequence_from_dict({"steps": [{"type": "hold", "length": 1.0}]})
    with pytest.raises(ConfigError, match="'steps'"):
        sequence_from_dict({"name": "empty"})


# --- execution physics -------------------------------------------------------


def test_opening_pulse_points_mean_along_plus_y():
    seq = Sequence((Pulse(OMEGA_GEN, 0.0, (0.5 * math.pi) / OMEGA_GEN, ideal=True),))
    state = _run(seq, _site(n_atoms=30))
    mean = collective.moments(state).mean
    assert mean[1] == pytest.approx(15.0, abs=1e-9)
    assert abs(mean[0]) < 1e-9 and abs(mean[2]) < 1e-9


def test_echo_cancels_static_detuning():
    delta = TWO_PI * 50.0
    site = _site(n_atoms=30, delta=delta)
    seq = make_oat_sequence(2e-3, 0.0, ideal_pulses=True, echo=True)
    mean = collective.moments(_run(seq, site)).mean
    assert mean[1] == pytest.approx(15.0, abs=1e-8)

    free = _run(make_oat_sequence(2e-3, 0.0, ideal_pulses=True, echo=False), site)
    mean_free = collective.moments(free).mean
    # without the echo the mean precesses by delta * t about z
    expected_transverse = 15.0 * abs(math.cos(delta * 2e-3))
    assert abs(mean_free[1]) == pytest.approx(expected_transverse, rel=1e-6)


def test_ramsey_fringe_ideal_pulses_full_visibility():
    site = _site(n_atoms=40)
    base = make_ramsey_sequence(1e-4, 0.0, ideal_pulses=True, rotation_angle=0.0)
    z0 = _z(_run(base, site, swapped_sensitivity=1.4e10))
    z90 = _z(
        _run(
            base.with_readout(Readout(kind="ramsey", phase=0.5 * math.pi, ideal=True)),
            site,
            swapped_sensitivity=1.4e10,
        )
    )
    assert math.hypot(z0, z90) == pytest.approx(1.0, abs=1e-9)


def test_swapped_interval_accumulates_field_phase_over_t_int():
    site = _site(n_atoms=24)
    t_hold = 1e-3
    base = make_ramsey_sequence(t_hold, 0.0, ideal_pulses=True, rotation_angle=0.0)
    ninety = base.with_readout(Readout(kind="ramsey", phase=0.5 * math.pi, ideal=True))
    sens = 1.4e10  # matches the configured swap/generation sensitivity ratio

    def fringe_phase(field):
        z0 = _z(_run(base, site, swapped_sensitivity=sens, extra_field=field))
        z90 = _z(_run(ninety, site, swapped_sensitivity=sens, extra_field=field))
        return math.atan2(z0, z90)

    b1, b2 = 1.0e-9, 3.0e-9
    shift = fringe_phase(b2) - fringe_phase(b1)
    shift = (shift + math.pi) % (2.0 * math.pi) - math.pi
    expected = TWO_PI * sens * (b2 - b1) * interrogation_time(t_hold)
    assert abs(shift) == pytest.approx(expected, rel=1e-9)


def test_loss_enabled_execution_requires_rng():
    seq = make_oat_sequence(1e-3, 0.0, ideal_pulses=True)
    params = ExecutionParams(loss=LossConfig(enabled=True))
    with pytest.raises(ConfigError, match="rng"):
        execute(seq, _site(), ShotNoise.zero(), params)
