"""Run configuration: typed sub-configs, JSON round-trip, and run identity.

Config files use interface units (Hz, seconds, Tesla, micrometres, degrees
for tomography angles); conversion to internal rad/s and radians happens
here.  A run's identity is the SHA-256 of its canonical JSON form minus the
output directory, so identical physics always maps to the same run id.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .lattice import AtomNumberLaw, LatticeConfig
from .loss import LossConfig
from .magnetometry import FieldProtocolParams
from .noise import NoiseConfig
from .sequences import (
    OMEGA_GEN,
    PHASE_SQUEEZED_ANGLE,
    PHASE_SQUEEZED_PHASE,
    T_PI_SWAP,
    Readout,
    Sequence,
    make_oat_sequence,
    make_ramsey_sequence,
    sequence_from_dict,
    tomography_readout,
)
from .units import TWO_PI, deg_to_rad, rad_to_deg

CONFIG_VERSION = 1
RUN_ID_LENGTH = 12


@dataclass(frozen=True)
class EnvironmentConfig:
    """Static magnetic environment across the lattice (Tesla, T/um)."""

    uniform_field: float = 0.0
    gradient: float = 0.0

    def validate(self) -> None:
        for name in ("uniform_field", "gradient"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"environment.{name} must be finite")

    def field_at(self, position_um: float, center_um: float) -> float:
        """Extra field (T) at a site, gradient referenced to the array center."""
        return self.uniform_field + self.gradient * (position_um - center_um)


@dataclass(frozen=True)
class RunConfig:
    lattice: LatticeConfig = field(default_factory=LatticeConfig)
    sequence: dict = field(default_factory=lambda: default_sequence_spec())
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    loss: LossConfig = field(default_factory=lambda: LossConfig(enabled=False))
    protocol: FieldProtocolParams = field(default_factory=FieldProtocolParams)
    environment: EnvironmentConfig = field(default_factory=EnvironmentConfig)
    n_shots: int = 100
    master_seed: int = 0
    out_dir: str | None = None

    def validate(self) -> None:
        self.lattice.validate()
        self.noise.validate()
        self.loss.validate()
        self.protocol.validate()
        self.environment.validate()
        if self.n_shots < 1:
            raise ConfigError(f"n_shots must be >= 1, got {self.n_shots}")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ConfigError(f"master_seed must fit in uint64, got {self.master_seed}")
        build_sequence(self.sequence)  # raises ConfigError on a bad spec

    def build_sequence(self) -> Sequence:
        return build_sequence(self.sequence)

    def run_id(self) -> str:
        """Stable content hash of everything that affects output bytes."""
        payload = config_to_dict(self)
        payload.pop("out_dir", None)
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:RUN_ID_LENGTH]


def default_sequence_spec() -> dict:
    return {"kind": "oat", "evolution_total_s": 0.020, "tomography_angle_deg": 0.0}


# --- sequence specs ---------------------------------------------------------

_OAT_KEYS = {
    "kind",
    "evolution_total_s",
    "tomography_angle_deg",
    "echo",
    "echo_deficit_deg",
    "ideal_pulses",
    "omega_hz",
    "name",
}
_RAMSEY_KEYS = {
    "kind",
    "t_hold_s",
    "readout_phase_deg",
    "readout_tomography_angle_deg",
    "readout_ideal",
    "evolution_total_s",
    "echo",
    "echo_deficit_deg",
    "ideal_pulses",
    "omega_hz",
    "rotation_angle_deg",
    "rotation_phase_deg",
    "t_pi_s",
    "name",
}


def _reject_unknown(spec: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(spec) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in {where}")


def build_sequence(spec: dict) -> Sequence:
    """Interface-unit sequence spec (degrees, Hz, seconds) -> Sequence.

    Kinds: "oat" (generation + tomography readout), "ramsey" (generation,
    rotation to the phase-squeezed axis, swap/hold/swap, readout), "steps"
    (raw step dicts in internal units, for replaying serialized sequences).
    """
    if not isinstance(spec, dict):
        raise ConfigError(f"sequence spec must be a dict, got {type(spec).__name__}")
    kind = spec.get("kind")
    if kind == "oat":
        _reject_unknown(spec, _OAT_KEYS, "sequence (kind=oat)")
        return make_oat_sequence(
            float(spec.get("evolution_total_s", 0.020)),
            deg_to_rad(float(spec.get("tomography_angle_deg", 0.0))),
            omega=TWO_PI * float(spec.get("omega_hz", OMEGA_GEN / TWO_PI)),
            ideal_pulses=bool(spec.get("ideal_pulses", False)),
            echo=bool(spec.get("echo", True)),
            echo_deficit=deg_to_rad(float(spec.get("echo_deficit_deg", 0.0))),
            name=spec.get("name", ""),
        )
    if kind == "ramsey":
        _reject_unknown(spec, _RAMSEY_KEYS, "sequence (kind=ramsey)")
        if "t_hold_s" not in spec:
            raise ConfigError("sequence (kind=ramsey) needs t_hold_s")
        has_phase = "readout_phase_deg" in spec
        has_tomo = "readout_tomography_angle_deg" in spec
        if has_phase == has_tomo:
            raise ConfigError(
                "sequence (kind=ramsey) needs exactly one of "
                "readout_phase_deg or readout_tomography_angle_deg"
            )
        ideal = bool(spec.get("ideal_pulses", False))
        readout_ideal = bool(spec.get("readout_ideal", ideal))
        if has_tomo:
            readout = tomography_readout(
                deg_to_rad(float(spec["readout_tomography_angle_deg"])), readout_ideal
            )
        else:
            readout = Readout(
                kind="ramsey",
                phase=deg_to_rad(float(spec["readout_phase_deg"])),
                ideal=readout_ideal,
            )
        return make_ramsey_sequence(
            float(spec["t_hold_s"]),
            readout,
            evolution_total=float(spec.get("evolution_total_s", 0.020)),
            omega=TWO_PI * float(spec.get("omega_hz", OMEGA_GEN / TWO_PI)),
            ideal_pulses=ideal,
            echo=bool(spec.get("echo", True)),
            echo_deficit=deg_to_rad(float(spec.get("echo_deficit_deg", 0.0))),
            rotation_angle=deg_to_rad(float(spec.get("rotation_angle_deg", rad_to_deg(PHASE_SQUEEZED_ANGLE)))),
            rotation_phase=deg_to_rad(float(spec.get("rotation_phase_deg", rad_to_deg(PHASE_SQUEEZED_PHASE)))),
            t_pi=float(spec.get("t_pi_s", T_PI_SWAP)),
            name=spec.get("name", ""),
        )
    if kind == "steps":
        _reject_unknown(spec, {"kind", "name", "steps"}, "sequence (kind=steps)")
        return sequence_from_dict({"name": spec.get("name", ""), "steps": spec.get("steps", [])})
    raise ConfigError(f"unknown sequence kind {kind!r} (expected oat, ramsey, or steps)")


# --- JSON round-trip --------------------------------------------------------


def _atom_numbers_to_dict(law: AtomNumberLaw) -> dict:
    d: dict = {"kind": law.kind}
    if law.kind == "list":
        d["values"] = list(law.values or ())
    elif law.kind == "fixed":
        d["low"] = law.low
    else:
        d["low"] = law.low
        d["high"] = law.high
    return d


def _atom_numbers_from_dict(d: dict) -> AtomNumberLaw:
    _reject_unknown(d, {"kind", "low", "high", "values"}, "lattice.atom_numbers")
    kind = d.get("kind", "uniform")
    if kind == "list":
        values = d.get("values")
        if not isinstance(values, list):
            raise ConfigError("lattice.atom_numbers.values must be a list")
        return AtomNumberLaw(kind="list", values=tuple(int(v) for v in values))
    if kind == "fixed":
        return AtomNumberLaw(kind="fixed", low=int(d.get("low", 300)))
    return AtomNumberLaw(kind=kind, low=int(d.get("low", 300)), high=int(d.get("high", 600)))


def _timescale_to_json(t: float) -> float | None:
    return None if math.isinf(t) else t


def _timescale_from_json(v, where: str) -> float:
    if v is None:
        return math.inf
    t = float(v)
    if t <= 0:
        raise ConfigError(f"{where} must be positive (or null to disable the channel)")
    return t


def config_to_dict(config: RunConfig) -> dict:
    return {
        "config_version": CONFIG_VERSION,
        "lattice": {
            "n_sites": config.lattice.n_sites,
            "atom_numbers": _atom_numbers_to_dict(config.lattice.atom_number_law),
            "chi_ref_hz": config.lattice.chi_ref / TWO_PI,
            "delta0_hz": config.lattice.delta0 / TWO_PI,
            "delta_slope_hz_per_atom": config.lattice.delta_slope / TWO_PI,
            "spacing_um": config.lattice.spacing,
        },
        "sequence": dict(config.sequence),
        "noise": {
            "field_sigma_shot_t": config.noise.field_sigma_shot,
            "field_sigma_longterm_t": config.noise.field_sigma_longterm,
            "gen_field_to_detuning_hz_per_t": config.noise.gen_field_to_detuning,
            "swap_sensitivity_ratio": config.noise.swap_sensitivity_ratio,
            "pulse_detuning_sigma_hz": config.noise.pulse_detuning_sigma,
            "gen_detuning_sigma_hz": config.noise.gen_detuning_sigma,
            "detection_sigma_atoms": config.noise.detection_sigma,
            "gen_mode": config.noise.gen_mode,
            "longterm_enabled": config.noise.longterm_enabled,
            "block_size": config.noise.block_size,
        },
        "loss": {
            "enabled": config.loss.enabled,
            "one_body_timescale_s": _timescale_to_json(config.loss.feshbach_timescale),
            "two_body_timescale_s": _timescale_to_json(config.loss.two_body_relax_timescale),
        },
        "protocol": {
            "s_hz_per_t": config.protocol.s_per_tesla,
            "b0_t": config.protocol.b0,
            "t_hold_s": config.protocol.t_hold,
            "t_pi_s": config.protocol.t_pi,
            "visibility": config.protocol.visibility,
        },
        "environment": {
            "uniform_field_t": config.environment.uniform_field,
            "gradient_t_per_um": config.environment.gradient,
        },
        "n_shots": config.n_shots,
        "master_seed": int(config.master_seed),
        "out_dir": config.out_dir,
    }


_TOP_KEYS = {
    "config_version",
    "lattice",
    "sequence",
    "noise",
    "loss",
    "protocol",
    "environment",
    "n_shots",
    "master_seed",
    "out_dir",
}


def config_from_dict(d: dict) -> RunConfig:
    if not isinstance(d, dict):
        raise ConfigError(f"config must be a JSON object, got {type(d).__name__}")
    _reject_unknown(d, _TOP_KEYS, "config")
    version = d.get("config_version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config_version {version} (expected {CONFIG_VERSION})")

    lat = d.get("lattice", {})
    _reject_unknown(
        lat,
        {"n_sites", "atom_numbers", "chi_ref_hz", "delta0_hz", "delta_slope_hz_per_atom", "spacing_um"},
        "lattice",
    )
    lattice_defaults = LatticeConfig()
    lattice = LatticeConfig(
        n_sites=int(lat.get("n_sites", lattice_defaults.n_sites)),
        atom_number_law=_atom_numbers_from_dict(lat.get("atom_numbers", {})),
        chi_ref=TWO_PI * float(lat.get("chi_ref_hz", lattice_defaults.chi_ref / TWO_PI)),
        delta0=TWO_PI * float(lat.get("delta0_hz", lattice_defaults.delta0 / TWO_PI)),
        delta_slope=TWO_PI * float(lat.get("delta_slope_hz_per_atom", lattice_defaults.delta_slope / TWO_PI)),
        spacing=float(lat.get("spacing_um", lattice_defaults.spacing)),
    )

    noi = d.get("noise", {})
    _reject_unknown(
        noi,
        {
            "field_sigma_shot_t",
            "field_sigma_longterm_t",
            "gen_field_to_detuning_hz_per_t",
            "swap_sensitivity_ratio",
            "pulse_detuning_sigma_hz",
            "gen_detuning_sigma_hz",
            "detection_sigma_atoms",
            "gen_mode",
            "longterm_enabled",
            "block_size",
        },
        "noise",
    )
    noise_defaults = NoiseConfig()
    noise = NoiseConfig(
        field_sigma_shot=float(noi.get("field_sigma_shot_t", noise_defaults.field_sigma_shot)),
        field_sigma_longterm=float(noi.get("field_sigma_longterm_t", noise_defaults.field_sigma_longterm)),
        gen_field_to_detuning=float(
            noi.get("gen_field_to_detuning_hz_per_t", noise_defaults.gen_field_to_detuning)
        ),
        swap_sensitivity_ratio=float(noi.get("swap_sensitivity_ratio", noise_defaults.swap_sensitivity_ratio)),
        pulse_detuning_sigma=float(noi.get("pulse_detuning_sigma_hz", noise_defaults.pulse_detuning_sigma)),
        gen_detuning_sigma=float(noi.get("gen_detuning_sigma_hz", noise_defaults.gen_detuning_sigma)),
        detection_sigma=float(noi.get("detection_sigma_atoms", noise_defaults.detection_sigma)),
        gen_mode=str(noi.get("gen_mode", noise_defaults.gen_mode)),
        longterm_enabled=bool(noi.get("longterm_enabled", noise_defaults.longterm_enabled)),
        block_size=int(noi.get("block_size", noise_defaults.block_size)),
    )

    los = d.get("loss", {})
    _reject_unknown(los, {"enabled", "one_body_timescale_s", "two_body_timescale_s"}, "loss")
    loss_defaults = LossConfig()
    loss = LossConfig(
        enabled=bool(los.get("enabled", False)),
        feshbach_timescale=_timescale_from_json(
            los.get("one_body_timescale_s", loss_defaults.feshbach_timescale), "loss.one_body_timescale_s"
        ),
        two_body_relax_timescale=_timescale_from_json(
            los.get("two_body_timescale_s", loss_defaults.two_body_relax_timescale),
            "loss.two_body_timescale_s",
        ),
    )

    pro = d.get("protocol", {})
    _reject_unknown(pro, {"s_hz_per_t", "b0_t", "t_hold_s", "t_pi_s", "visibility"}, "protocol")
    protocol_defaults = FieldProtocolParams()
    protocol = FieldProtocolParams(
        s_per_tesla=float(pro.get("s_hz_per_t", protocol_defaults.s_per_tesla)),
        b0=float(pro.get("b0_t", protocol_defaults.b0)),
        t_hold=float(pro.get("t_hold_s", protocol_defaults.t_hold)),
        t_pi=float(pro.get("t_pi_s", protocol_defaults.t_pi)),
        visibility=float(pro.get("visibility", protocol_defaults.visibility)),
    )

    env = d.get("environment", {})
    _reject_unknown(env, {"uniform_field_t", "gradient_t_per_um"}, "environment")
    environment = EnvironmentConfig(
        uniform_field=float(env.get("uniform_field_t", 0.0)),
        gradient=float(env.get("gradient_t_per_um", 0.0)),
    )

    sequence = d.get("sequence", default_sequence_spec())
    config = RunConfig(
        lattice=lattice,
        sequence=sequence,
        noise=noise,
        loss=loss,
        protocol=protocol,
        environment=environment,
        n_shots=int(d.get("n_shots", 100)),
        master_seed=int(d.get("master_seed", 0)),
        out_dir=d.get("out_dir"),
    )
    config.validate()
    return config


def load_config(path: str | Path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {p} is not valid JSON: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return config_from_dict(data)


def save_config(config: RunConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(config), indent=2, sort_keys=True) + "\n")
