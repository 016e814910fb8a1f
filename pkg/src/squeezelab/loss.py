"""Quantum-jump (Monte Carlo wavefunction) atom loss during twisting.

Two channels: a symmetric one-body loss acting on both modes (combined
timescale tau_1, default 110 ms) and a two-body channel removing pairs from
the upper mode (timescale tau_2, default 200 ms, calibrated so the initial
upper-mode decay rate matches 1/tau_2).

The drift Hamiltonian during free twisting is diagonal, so the no-jump
norm decay is known in closed form and jump times are located exactly by
root finding -- there is no time-step discretization anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import collective
from .errors import ConfigError, NumericalError
from .lattice import N_REF

TWO_BODY_TIMESCALE = 0.200  # s
ONE_BODY_TIMESCALE = 0.110  # s
DEFAULT_TRAJECTORIES = 500

_OK = 0
_NEED_MORE = 1
_DEAD = 2


@dataclass(frozen=True)
class LossConfig:
    two_body_relax_timescale: float = TWO_BODY_TIMESCALE
    feshbach_timescale: float = ONE_BODY_TIMESCALE
    enabled: bool = True

    def validate(self) -> None:
        if self.two_body_relax_timescale <= 0 or self.feshbach_timescale <= 0:
            raise ConfigError("loss timescales must be positive")

    def one_body_rate(self) -> float:
        """Per-atom loss rate (1/s)."""
        return 0.0 if math.isinf(self.feshbach_timescale) else 1.0 / self.feshbach_timescale

    def two_body_rate(self, n_initial: int) -> float:
        """Pair-jump rate gamma2 (1/s) such that the upper mode of a balanced
        n_initial-atom state initially decays on the configured timescale."""
        if math.isinf(self.two_body_relax_timescale):
            return 0.0
        n_b0 = 0.5 * n_initial
        if n_b0 <= 1.0:
            return 0.0
        return 1.0 / (2.0 * self.two_body_relax_timescale * (n_b0 - 1.0))


def _decay_rates(n: int, gamma1: float, gamma2: float) -> np.ndarray:
    """R(k) = total jump rate out of ladder state k at atom number n."""
    k = np.arange(n + 1, dtype=float)
    return gamma1 * n + gamma2 * k * (k - 1.0)


def _apply_jump(amps: np.ndarray, n: int, channel: int) -> tuple[np.ndarray, int]:
    k = np.arange(n + 1, dtype=float)
    if channel == 0:  # one lower-mode atom leaves; ladder index unchanged
        out = np.sqrt(n - k)[: n] * amps[:n] if n >= 1 else amps
        return out, n - 1
    if channel == 1:  # one upper-mode atom leaves; ladder index drops by one
        out = np.sqrt(k[1:]) * amps[1:]
        return out, n - 1
    out = np.sqrt(k[2:] * (k[2:] - 1.0)) * amps[2:]  # upper-mode pair
    return out, n - 2


@njit(cache=True)
def _segment_kernel(amps, n, chi_ref, n_ref, delta, gamma1, gamma2, remaining, uniforms):
    # pragma: no cover - exercised via free_segment_with_loss
    """Jump-resolved free twisting.  Consumes one uniform per epoch for the
    jump time and a second per realized jump for the channel choice; returns
    (amplitudes, n, remaining, status) and asks for a refill when the buffer
    runs out."""
    used = 0
    while remaining > 0.0 and n > 0:
        if used + 2 > uniforms.shape[0]:
            return amps, n, remaining, _NEED_MORE
        dim = n + 1
        chi = chi_ref * np.sqrt(n_ref / n)
        half = 0.5 * n
        # occupation probabilities (kept normalized between epochs)
        nrm2 = 0.0
        for i in range(dim):
            nrm2 += amps[i].real ** 2 + amps[i].imag ** 2
        if nrm2 <= 0.0:
            return amps, n, remaining, _DEAD
        u = uniforms[used]
        used += 1
        # survival(tau) = sum_k p_k exp(-R_k tau) with R_k = gamma1 n + gamma2 k(k-1)
        base = gamma1 * n
        s_rem = 0.0
        for i in range(dim):
            p_i = (amps[i].real ** 2 + amps[i].imag ** 2) / nrm2
            rate = base + gamma2 * i * (i - 1.0)
            s_rem += p_i * np.exp(-rate * remaining)
        if s_rem >= u:
            tau = remaining
            jump = False
        else:
            jump = True
            # safeguarded Newton on log survival - log u
            lo = 0.0
            hi = remaining
            tau = remaining * 0.5
            for _ in range(200):
                s = 0.0
                ds = 0.0
                for i in range(dim):
                    p_i = (amps[i].real ** 2 + amps[i].imag ** 2) / nrm2
                    rate = base + gamma2 * i * (i - 1.0)
                    e = p_i * np.exp(-rate * tau)
                    s += e
                    ds -= rate * e
                f = np.log(s) - np.log(u)
                if f > 0.0:
                    lo = tau
                else:
                    hi = tau
                if hi - lo <= 1e-14 * remaining or abs(f) < 1e-14:
                    break
                step = f * s / ds  # Newton step on log survival
                cand = tau - step
                if cand <= lo or cand >= hi:
                    cand = 0.5 * (lo + hi)
                tau = cand
        # drift: twisting phases and the no-jump amplitude decay
        for i in range(dim):
            m = i - half
            rate = base + gamma2 * i * (i - 1.0)
            ang = -(chi * m * m + delta * m) * tau
            damp = np.exp(-0.5 * rate * tau)
            ph = complex(np.cos(ang), np.sin(ang)) * damp
            amps[i] = amps[i] * ph
        remaining -= tau
        if not jump:
            break
        # channel weights from the post-drift occupations
        w_low = 0.0
        w_up = 0.0
        w_pair = 0.0
        for i in range(dim):
            w = amps[i].real ** 2 + amps[i].imag ** 2
            w_low += w * (n - i)
            w_up += w * i
            w_pair += w * i * (i - 1.0)
        w_low *= gamma1
        w_up *= gamma1
        w_pair *= gamma2
        total = w_low + w_up + w_pair
        if total <= 0.0:
            break
        u2 = uniforms[used] * total
        used += 1
        if u2 < w_low:  # lower-mode atom leaves; ladder index unchanged
            out = np.empty(n, np.complex128)
            for i in range(n):
                out[i] = np.sqrt(n - i) * amps[i]
            amps = out
            n -= 1
        elif u2 < w_low + w_up:  # upper-mode atom leaves; index drops by one
            out = np.empty(n, np.complex128)
            for i in range(n):
                out[i] = np.sqrt(i + 1.0) * amps[i + 1]
            amps = out
            n -= 1
        else:  # upper-mode pair
            out = np.empty(n - 1, np.complex128)
            for i in range(n - 1):
                out[i] = np.sqrt((i + 2.0) * (i + 1.0)) * amps[i + 2]
            amps = out
            n -= 2
        nrm2 = 0.0
        for i in range(n + 1):
            nrm2 += amps[i].real ** 2 + amps[i].imag ** 2
        if nrm2 <= 0.0:
            return amps, n, remaining, _DEAD
        inv = 1.0 / np.sqrt(nrm2)
        for i in range(n + 1):
            amps[i] = amps[i] * inv
    return amps, n, remaining, _OK


def free_segment_with_loss(
    amps: np.ndarray,
    n: int,
    chi_ref: float,
    delta: float,
    config: LossConfig,
    t: float,
    rng: np.random.Generator,
    gamma2: float | None = None,
) -> tuple[np.ndarray, int]:
    """One stochastic trajectory of free twisting with loss for time t.

    chi is re-evaluated from the site law chi_ref * sqrt(500/n) after every
    jump.  Returns (normalized amplitudes, remaining atom number).
    """
    if t < 0:
        raise ConfigError("segment duration must be non-negative")
    gamma1 = config.one_body_rate()
    if gamma2 is None:
        gamma2 = config.two_body_rate(n)
    amps = np.ascontiguousarray(amps, dtype=np.complex128).copy()
    remaining = float(t)
    expected = n * (gamma1 + gamma2 * n) * remaining
    chunk = max(64, int(4 * expected) + 16)
    while True:
        amps, n, remaining, status = _segment_kernel(
            amps, n, chi_ref, float(N_REF), delta, gamma1, gamma2, remaining, rng.random(chunk)
        )
        if status == _OK:
            break
        if status == _DEAD:
            raise NumericalError("trajectory lost all amplitude")
        chunk *= 2
    nrm = float(np.linalg.norm(amps))
    if nrm == 0.0:
        raise NumericalError("trajectory lost all amplitude")
    return amps / nrm, int(n)


# --- ensemble scan ----------------------------------------------------------


@dataclass(frozen=True)
class LossEnsembleResult:
    times: np.ndarray
    mean_spin: np.ndarray  # |<J>| of the trajectory-averaged state
    n_mean: np.ndarray  # mean remaining atom number
    var_min: np.ndarray  # minimal transverse variance of the averaged state
    squeezing_db: np.ndarray  # metrological: 10 log10(<N> var_min / |<J>|^2)
    squeezing_stderr_db: np.ndarray  # batch-mean spread
    n_trajectories: int

    def floor(self) -> tuple[float, float]:
        """(best squeezing in dB, time at which it occurs)."""
        i = int(np.argmin(self.squeezing_db))
        return float(self.squeezing_db[i]), float(self.times[i])


def _ensemble_moments(records: list[tuple[np.ndarray, np.ndarray, float]]):
    """Average per-trajectory (mean, raw second moment, n) into mixed-state
    moments; returns (SpinMoments-like stats, mean atom number)."""
    means = np.array([r[0] for r in records])
    raws = np.array([r[1] for r in records])
    ns = np.array([r[2] for r in records])
    mean = means.mean(axis=0)
    cov = raws.mean(axis=0) - np.outer(mean, mean)
    cov = 0.5 * (cov + cov.T)
    n_mean = float(ns.mean())
    axes = collective._transverse_axes(mean, max(int(round(n_mean)), 1))
    mom = collective.SpinMoments(int(round(n_mean)), mean, cov, axes)
    return mom, n_mean


def _metrological_db(mom: collective.SpinMoments, n_mean: float) -> float:
    spin = mom.spin_length
    if spin <= 0:
        return float("inf")
    ratio = n_mean * mom.min_variance() / spin**2
    return 10.0 * math.log10(max(ratio, 1e-300))


def evolve_with_loss(
    initial: collective.CollectiveState,
    site,
    config: LossConfig,
    times,
    n_trajectories: int,
    rng: np.random.Generator,
    n_batches: int = 10,
) -> LossEnsembleResult:
    """Trajectory-averaged twisting-with-loss moments on a time grid.

    site supplies n_atoms, chi (at that n) and delta_offset; squeezing_db is
    the metrological ratio <N> Var_min / |<J>|^2 of the averaged state.
    """
    if n_trajectories < 1:
        raise ConfigError("need at least one trajectory")
    config.validate()
    grid = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(grid < 0) or np.any(np.diff(grid) < 0):
        raise ConfigError("times must be non-negative and sorted")
    n0 = initial.n_atoms
    chi_ref = site.chi / math.sqrt(N_REF / n0)  # invert the site law once
    delta = site.delta_offset
    gamma2 = config.two_body_rate(n0)
    if not config.enabled:
        checkpoints = []
        for t in grid:
            st = collective.evolve_oat(initial, site.chi, delta, float(t))
            mom = collective.moments(st)
            raw = mom.cov + np.outer(mom.mean, mom.mean)
            checkpoints.append([(mom.mean, raw, float(n0))])
        return _pack_result(grid, checkpoints, n_trajectories=1)

    checkpoints: list[list[tuple[np.ndarray, np.ndarray, float]]] = [[] for _ in grid]
    for _ in range(n_trajectories):
        amps = np.array(initial.amplitudes)
        n = n0
        t_prev = 0.0
        for gi, t in enumerate(grid):
            amps, n = free_segment_with_loss(amps, n, chi_ref, delta, config, float(t) - t_prev, rng, gamma2=gamma2)
            t_prev = float(t)
            mom = collective.moments(collective._state(n, amps))
            raw = mom.cov + np.outer(mom.mean, mom.mean)
            checkpoints[gi].append((mom.mean, raw, float(n)))
    return _pack_result(grid, checkpoints, n_trajectories, n_batches)


def _pack_result(grid, checkpoints, n_trajectories, n_batches: int = 10) -> LossEnsembleResult:
    mean_spin = np.empty(len(grid))
    n_mean = np.empty(len(grid))
    var_min = np.empty(len(grid))
    sq_db = np.empty(len(grid))
    sq_err = np.zeros(len(grid))
    for gi in range(len(grid)):
        records = checkpoints[gi]
        mom, nm = _ensemble_moments(records)
        mean_spin[gi] = mom.spin_length
        n_mean[gi] = nm
        var_min[gi] = mom.min_variance()
        sq_db[gi] = _metrological_db(mom, nm)
        if len(records) >= 2 * n_batches and n_batches > 1:
            edges = np.array_split(np.arange(len(records)), n_batches)
            vals = []
            for batch in edges:
                bmom, bn = _ensemble_moments([records[i] for i in batch])
                vals.append(_metrological_db(bmom, bn))
            sq_err[gi] = float(np.std(vals, ddof=1) / math.sqrt(len(vals)))
    return LossEnsembleResult(
        times=np.asarray(grid, dtype=float),
        mean_spin=mean_spin,
        n_mean=n_mean,
        var_min=var_min,
        squeezing_db=sq_db,
        squeezing_stderr_db=sq_err,
        n_trajectories=n_trajectories,
    )
