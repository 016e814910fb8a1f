"""Experiment programs (pulses, free twisting, swaps, holds) and their
single-site executor.

Phase bookkeeping: the opening pi/2 pulse defines phase 0; the echo pulse
runs at 3*pi/2.  A tomography readout stores a non-negative pulse angle and
an axis phase: scans label (angle, pi/2) as positive alpha and
(angle, 3*pi/2) as negative alpha.  During the swapped interval the state
pair is first-order field sensitive; the accumulated z phase covers
t_hold + 2*t_pi via half-pi-time contributions on each swap step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from . import collective
from .errors import ConfigError
from .lattice import N_REF, SiteParams, chi_of_n
from .loss import LossConfig, free_segment_with_loss
from .noise import NoiseConfig, ShotNoise, detuning_during_hold
from .units import TWO_PI

OMEGA_GEN = TWO_PI * 310.0  # rad/s two-photon Rabi frequency
SWAP_RABI_HZ = 7000.0  # one-photon Rabi frequency
T_PI_SWAP = 1.0 / (2.0 * SWAP_RABI_HZ)  # s
PHASE_SQUEEZED_ANGLE = math.radians(75.5)
# Rotation about the mean-spin axis (+y after the first pulse) that turns the
# imbalance-squeezed ellipse into a phase-squeezed one: the variance maximum
# of the tomography scan sits at positive angles with this readout phase.
PHASE_SQUEEZED_PHASE = 0.5 * math.pi


@dataclass(frozen=True)
class Pulse:
    rabi: float  # rad/s
    phase: float  # radians
    duration: float  # s
    ideal: bool = False


@dataclass(frozen=True)
class FreeOAT:
    duration: float


@dataclass(frozen=True)
class SwapOut:
    t_pi: float = T_PI_SWAP


@dataclass(frozen=True)
class Hold:
    duration: float


@dataclass(frozen=True)
class SwapIn:
    t_pi: float = T_PI_SWAP


@dataclass(frozen=True)
class Readout:
    kind: str  # "tomography" | "ramsey"
    angle: float = 0.0  # tomography pulse angle, radians, >= 0
    phase: float = 0.0  # axis phase (tomography) or fringe phase (ramsey)
    ideal: bool = False


SequenceStep = Union[Pulse, FreeOAT, SwapOut, Hold, SwapIn, Readout]


@dataclass(frozen=True)
class Sequence:
    steps: tuple[SequenceStep, ...]
    name: str = ""

    def validate(self) -> None:
        in_swap = False
        for step in self.steps:
            dur = getattr(step, "duration", getattr(step, "t_pi", 0.0))
            if dur < 0 or not math.isfinite(dur):
                raise ConfigError(f"negative or non-finite duration in {step}")
            if isinstance(step, SwapOut):
                if in_swap:
                    raise ConfigError("nested SwapOut")
                in_swap = True
            elif isinstance(step, SwapIn):
                if not in_swap:
                    raise ConfigError("SwapIn without SwapOut")
                in_swap = False
            elif isinstance(step, Hold) and not in_swap:
                raise ConfigError("Hold outside a SwapOut/SwapIn bracket")
        if in_swap:
            raise ConfigError("SwapOut never closed by SwapIn")

    def with_readout(self, readout: Readout) -> "Sequence":
        steps = tuple(s for s in self.steps if not isinstance(s, Readout)) + (readout,)
        return replace(self, steps=steps)


def tomography_readout(alpha: float, ideal: bool = False) -> Readout:
    """Signed scan angle alpha -> stored (|alpha|, axis phase) readout."""
    phase = 0.5 * math.pi if alpha >= 0 else 1.5 * math.pi
    return Readout(kind="tomography", angle=abs(alpha), phase=phase, ideal=ideal)


def _generation_steps(
    evolution_total: float,
    omega: float,
    ideal_pulses: bool,
    echo: bool,
    echo_deficit: float,
) -> list[SequenceStep]:
    if evolution_total < 0:
        raise ConfigError("evolution time must be non-negative")
    steps: list[SequenceStep] = [Pulse(omega, 0.0, (0.5 * math.pi) / omega, ideal_pulses)]
    if echo:
        steps.append(FreeOAT(0.5 * evolution_total))
        steps.append(Pulse(omega, 1.5 * math.pi, (math.pi - echo_deficit) / omega, ideal_pulses))
        steps.append(FreeOAT(0.5 * evolution_total))
    else:
        steps.append(FreeOAT(evolution_total))
    return steps


def make_oat_sequence(
    evolution_total: float,
    tomography_angle: float,
    *,
    omega: float = OMEGA_GEN,
    ideal_pulses: bool = False,
    echo: bool = True,
    echo_deficit: float = 0.0,
    name: str = "",
) -> Sequence:
    """Squeezing generation (pi/2, twist, echo pi, twist) ending in a
    tomography rotation by the signed angle `tomography_angle`."""
    steps = _generation_steps(evolution_total, omega, ideal_pulses, echo, echo_deficit)
    steps.append(tomography_readout(tomography_angle, ideal_pulses))
    seq = Sequence(tuple(steps), name=name or "oat")
    seq.validate()
    return seq


def make_ramsey_sequence(
    t_hold: float,
    readout: Readout | float,
    *,
    evolution_total: float = 0.020,
    omega: float = OMEGA_GEN,
    ideal_pulses: bool = False,
    echo: bool = True,
    echo_deficit: float = 0.0,
    rotation_angle: float = PHASE_SQUEEZED_ANGLE,
    rotation_phase: float = PHASE_SQUEEZED_PHASE,
    t_pi: float = T_PI_SWAP,
    name: str = "",
) -> Sequence:
    """Generation, rotation to the phase-squeezed axis, swap-out, hold,
    swap-in, then `readout` -- either a Readout step (fringe or tomography
    after the swap) or a bare fringe phase in radians."""
    if t_hold < 0:
        raise ConfigError("t_hold must be non-negative")
    if not isinstance(readout, Readout):
        readout = Readout(kind="ramsey", phase=float(readout), ideal=ideal_pulses)
    steps = _generation_steps(evolution_total, omega, ideal_pulses, echo, echo_deficit)
    if rotation_angle != 0.0:
        steps.append(Pulse(omega, rotation_phase, rotation_angle / omega, ideal_pulses))
    steps += [SwapOut(t_pi), Hold(t_hold), SwapIn(t_pi), readout]
    seq = Sequence(tuple(steps), name=name or "ramsey")
    seq.validate()
    return seq


def interrogation_time(t_hold: float, t_pi: float = T_PI_SWAP) -> float:
    return t_hold + 2.0 * t_pi


# --- executor ---------------------------------------------------------------


@dataclass(frozen=True)
class ExecutionParams:
    """Per-run knobs the executor needs beyond the sequence itself."""

    noise_config: NoiseConfig = field(default_factory=NoiseConfig)
    swapped_sensitivity: float = 0.0  # Hz/T; 0 disables swapped-phase pickup
    extra_field: float = 0.0  # T static field addition at this site (gradients)
    hold_chi: float = 0.0  # rad/s residual nonlinearity during Hold
    loss: LossConfig | None = None
    omega_readout: float = OMEGA_GEN


@dataclass
class _SiteState:
    n: int
    amps: np.ndarray
    chi_ref: float  # chi law anchor of this site
    delta_site: float


def _current_chi(site_state: _SiteState) -> float:
    return chi_of_n(site_state.n, site_state.chi_ref)


def _run_pulse(
    ss: _SiteState, rabi: float, phase: float, duration: float, ideal: bool, delta: float
) -> None:
    if duration == 0.0:
        return
    st = collective._state(ss.n, ss.amps)
    if ideal:
        out = collective.rotate(st, rabi * duration, phase)
    else:
        out = collective.evolve_pulse(st, rabi, phase, delta, _current_chi(ss), duration)
    ss.amps = np.array(out.amplitudes)


def execute(
    seq: Sequence,
    site: SiteParams,
    shot: ShotNoise,
    params: ExecutionParams,
    rng: np.random.Generator | None = None,
) -> collective.CollectiveState:
    """Run a sequence on one site from |all lower>, applying this shot's
    noise draws.  With loss enabled an rng is required (jump sampling) and
    free-twisting segments follow a single stochastic trajectory."""
    seq.validate()
    loss_on = params.loss is not None and params.loss.enabled
    if loss_on and rng is None:
        raise ConfigError("loss-enabled execution needs an rng for jump sampling")
    chi_ref = site.chi / math.sqrt(N_REF / site.n_atoms)
    ss = _SiteState(
        n=site.n_atoms,
        amps=np.array(collective.make_css(site.n_atoms, 0.0, 0.0).amplitudes),
        chi_ref=chi_ref,
        delta_site=site.delta_offset,
    )
    gamma2 = params.loss.two_body_rate(site.n_atoms) if loss_on else 0.0
    gen_extra = TWO_PI * params.noise_config.gen_field_to_detuning * params.extra_field
    delta_free = ss.delta_site + shot.gen_detuning + gen_extra
    delta_pulse = delta_free + shot.pulse_detuning
    swap_rate = 0.0
    if params.swapped_sensitivity > 0.0:
        swap_rate = detuning_during_hold(
            params.noise_config, shot.field_offset + params.extra_field, params.swapped_sensitivity
        )
    swap_rate += shot.pulse_detuning  # residual detuning of the swapped pair

    for step in seq.steps:
        if isinstance(step, Pulse):
            _run_pulse(ss, step.rabi, step.phase, step.duration, step.ideal, delta_pulse)
        elif isinstance(step, FreeOAT):
            if step.duration == 0.0:
                continue
            if loss_on:
                ss.amps, ss.n = free_segment_with_loss(
                    ss.amps, ss.n, chi_ref, delta_free, params.loss, step.duration, rng, gamma2=gamma2
                )
            else:
                st = collective.evolve_oat(
                    collective._state(ss.n, ss.amps), _current_chi(ss), delta_free, step.duration
                )
                ss.amps = np.array(st.amplitudes)
        elif isinstance(step, SwapOut):
            st = collective.rotate(collective._state(ss.n, ss.amps), math.pi, 0.0)
            st = collective.apply_z_phase(st, swap_rate * step.t_pi)
            ss.amps = np.array(st.amplitudes)
        elif isinstance(step, Hold):
            st = collective._state(ss.n, ss.amps)
            if params.hold_chi != 0.0:
                st = collective.evolve_oat(st, params.hold_chi, swap_rate, step.duration)
            else:
                st = collective.apply_z_phase(st, swap_rate * step.duration)
            ss.amps = np.array(st.amplitudes)
        elif isinstance(step, SwapIn):
            st = collective.apply_z_phase(collective._state(ss.n, ss.amps), swap_rate * step.t_pi)
            st = collective.rotate(st, math.pi, 0.0)
            ss.amps = np.array(st.amplitudes)
        elif isinstance(step, Readout):
            if step.kind == "tomography":
                _run_pulse(
                    ss, params.omega_readout, step.phase, step.angle / params.omega_readout, step.ideal, delta_pulse
                )
            elif step.kind == "ramsey":
                _run_pulse(
                    ss,
                    params.omega_readout,
                    step.phase,
                    (0.5 * math.pi) / params.omega_readout,
                    step.ideal,
                    delta_pulse,
                )
            else:
                raise ConfigError(f"unknown readout kind {step.kind!r}")
        else:
            raise ConfigError(f"unknown step {step!r}")
    return collective._state(ss.n, ss.amps)


# --- serialization ----------------------------------------------------------

_STEP_TAGS = {
    Pulse: "pulse",
    FreeOAT: "free_oat",
    SwapOut: "swap_out",
    Hold: "hold",
    SwapIn: "swap_in",
    Readout: "readout",
}


def step_to_dict(step: SequenceStep) -> dict:
    d = {"type": _STEP_TAGS[type(step)]}
    d.update({k: getattr(step, k) for k in step.__dataclass_fields__})
    return d


def step_from_dict(d: dict) -> SequenceStep:
    tags = {v: k for k, v in _STEP_TAGS.items()}
    kind = d.get("type")
    if kind not in tags:
        raise ConfigError(f"unknown sequence step type {kind!r}")
    cls = tags[kind]
    kwargs = {k: v for k, v in d.items() if k != "type"}
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad fields for step {kind!r}: {exc}") from None


def sequence_to_dict(seq: Sequence) -> dict:
    return {"name": seq.name, "steps": [step_to_dict(s) for s in seq.steps]}


def sequence_from_dict(d: dict) -> Sequence:
    try:
        steps = tuple(step_from_dict(s) for s in d["steps"])
    except KeyError:
        raise ConfigError("sequence dict needs a 'steps' list") from None
    seq = Sequence(steps, name=d.get("name", ""))
    seq.validate()
    return seq
