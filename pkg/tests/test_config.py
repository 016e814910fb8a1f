"""Config round-trips, strict key checking, and run identity."""

import math
from dataclasses import replace

import pytest

from squeezelab.config import (
    EnvironmentConfig,
    RunConfig,
    build_sequence,
    config_from_dict,
    config_to_dict,
    load_config,
    save_config,
)
from squeezelab.errors import ConfigError
from squeezelab.lattice import AtomNumberLaw, LatticeConfig
from squeezelab.loss import LossConfig
from squeezelab.noise import NoiseConfig
from squeezelab.sequences import PHASE_SQUEEZED_ANGLE, Readout
from squeezelab.units import TWO_PI


def _sample_config():
    return RunConfig(
        lattice=LatticeConfig(n_sites=4, atom_number_law=AtomNumberLaw(kind="fixed", low=250)),
        sequence={"kind": "ramsey", "t_hold_s": 1e-3, "readout_phase_deg": 30.0},
        noise=NoiseConfig(detection_sigma=2.0, longterm_enabled=True, block_size=7),
        loss=LossConfig(enabled=True, feshbach_timescale=0.2),
        environment=EnvironmentConfig(gradient=1e-12),
        n_shots=17,
        master_seed=99,
    )


def test_round_trip_preserves_everything():
    config = _sample_config()
    clone = config_from_dict(config_to_dict(config))
    assert clone == config


def test_round_trip_through_file(tmp_path):
    config = _sample_config()
    path = tmp_path / "run.json"
    save_config(config, path)
    assert load_config(path) == config


def test_infinite_timescales_serialize_as_null():
    config = replace(_sample_config(), loss=LossConfig(enabled=True, feshbach_timescale=math.inf))
    payload = config_to_dict(config)
    assert payload["loss"]["one_body_timescale_s"] is None
    assert config_from_dict(payload).loss.feshbach_timescale == math.inf


def test_unknown_keys_rejected_at_every_level():
    good = config_to_dict(_sample_config())
    for mutate in (
        lambda d: d.update(banana=1),
        lambda d: d["lattice"].update(n_wells=9),
        lambda d: d["noise"].update(field_sigma=1.0),
        lambda d: d["loss"].update(rate=2.0),
        lambda d: d["protocol"].update(t_ramsey=1.0),
        lambda d: d["environment"].update(tilt=0.1),
        lambda d: d["sequence"].update(warp_factor=9),
    ):
        payload = config_to_dict(_sample_config())
        mutate(payload)
        with pytest.raises(ConfigError, match="unknown key"):
            config_from_dict(payload)
    config_from_dict(good)  # untouched payload still loads


def test_config_version_checked():
    payload = config_to_dict(_sample_config())
    payload["config_version"] = 2
    with pytest.raises(ConfigError, match="config_version"):
        config_from_dict(payload)


def test_ramsey_spec_needs_exactly_one_readout():
    with pytest.raises(ConfigError, match="exactly one"):
        build_sequence({"kind": "ramsey", "t_hold_s": 1e-3})
    with pytest.raises(ConfigError, match="exactly one"):
        build_sequence(
            {
                "kind": "ramsey",
                "t_hold_s": 1e-3,
                "readout_phase_deg": 0.0,
                "readout_tomography_angle_deg": 20.0,
            }
        )
    with pytest.raises(ConfigError, match="t_hold_s"):
        build_sequence({"kind": "ramsey", "readout_phase_deg": 0.0})


def test_unknown_sequence_kind():
    with pytest.raises(ConfigError, match="unknown sequence kind"):
        build_sequence({"kind": "rabi"})
    with pytest.raises(ConfigError, match="must be a dict"):
        build_sequence("oat")


def test_ramsey_defaults_follow_paper_rotation():
    seq = build_sequence({"kind": "ramsey", "t_hold_s": 1e-3, "readout_phase_deg": 0.0})
    rotation = seq.steps[4]
    assert rotation.duration * rotation.rabi == pytest.approx(PHASE_SQUEEZED_ANGLE)


def test_readout_ideal_defaults_to_ideal_pulses():
    spec = {"kind": "ramsey", "t_hold_s": 1e-3, "readout_phase_deg": 0.0}
    assert not build_sequence(spec).steps[-1].ideal
    assert build_sequence({**spec, "ideal_pulses": True}).steps[-1].ideal
    mixed = build_sequence({**spec, "readout_ideal": True})
    assert mixed.steps[-1].ideal
    assert not mixed.steps[0].ideal  # generation pulses stay real


def test_steps_kind_replays_serialized_sequences():
    seq = build_sequence(
        {
            "kind": "steps",
            "steps": [
                {"type": "pulse", "rabi": 100.0, "phase": 0.0, "duration": 0.01, "ideal": True},
                {"type": "readout", "kind": "ramsey", "angle": 0.0, "phase": 0.5, "ideal": True},
            ],
        }
    )
    assert isinstance(seq.steps[-1], Readout)


def test_run_id_stable_and_ignores_out_dir():
    a = _sample_config()
    b = replace(a, out_dir="/tmp/somewhere")
    c = replace(a, master_seed=100)
    assert a.run_id() == b.run_id()
    assert a.run_id() != c.run_id()
    assert len(a.run_id()) == 12
    assert a.run_id() == config_from_dict(config_to_dict(a)).run_id()


def test_interface_units_convert_to_internal():
    payload = config_to_dict(_sample_config())
    payload["lattice"]["chi_ref_hz"] = 0.1
    config = config_from_dict(payload)
    assert config.lattice.chi_ref == pytest.approx(TWO_PI * 0.1)


def test_atom_number_law_variants_round_trip():
    for law in (
        AtomNumberLaw(kind="fixed", low=400),
        AtomNumberLaw(kind="uniform", low=392, high=592),
        AtomNumberLaw(kind="list", values=(300, 400, 500, 600)),
    ):
        config = replace(
            _sample_config(), lattice=LatticeConfig(n_sites=4, atom_number_law=law)
        )
        assert config_from_dict(config_to_dict(config)).lattice.atom_number_law == law


def test_validation_catches_bad_shots_and_seed():
    with pytest.raises(ConfigError, match="n_shots"):
        replace(_sample_config(), n_shots=0).validate()
    with pytest.raises(ConfigError, match="master_seed"):
        replace(_sample_config(), master_seed=-1).validate()


def test_load_config_reports_json_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "n_shots": 5,\n  oops\n}\n')
    with pytest.raises(ConfigError, match="line 3"):
        load_config(path)
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.json")
