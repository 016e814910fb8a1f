"""Collective-spin states of n two-mode atoms on the symmetric ladder.

A state is a complex vector over k = 0..n, where k counts atoms in the upper
mode, m = k - n/2, and j = n/2.  k = 0 is every atom in the lower mode.
All evolution preserves the norm to 1e-10; constructors enforce it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from . import krylov, wignerd
from .errors import ConfigError, NumericalError

NORM_TOL = 1e-10


@dataclass(frozen=True)
class CollectiveState:
    n_atoms: int
    amplitudes: np.ndarray

    def norm_error(self) -> float:
        return abs(float(np.sum(np.abs(self.amplitudes) ** 2)) - 1.0)


def _state(n: int, amps: np.ndarray) -> CollectiveState:
    err = abs(float(np.sum(np.abs(amps) ** 2)) - 1.0)
    if not np.isfinite(err) or err > NORM_TOL:
        raise NumericalError(f"state norm drifted by {err:.3e}")
    amps = np.asarray(amps, dtype=complex)
    amps.setflags(write=False)
    return CollectiveState(n_atoms=n, amplitudes=amps)


@lru_cache(maxsize=256)
def ladder_coupling(n: int) -> np.ndarray:
    """a_k = |<k+1| J+ |k>| for k = 0..n-1."""
    j = 0.5 * n
    m = np.arange(n, dtype=float) - j
    a = np.sqrt(j * (j + 1.0) - m * (m + 1.0))
    a.setflags(write=False)
    return a


@lru_cache(maxsize=256)
def jz_values(n: int) -> np.ndarray:
    m = np.arange(n + 1, dtype=float) - 0.5 * n
    m.setflags(write=False)
    return m


def make_css(n: int, polar: float, azimuth: float) -> CollectiveState:
    """Coherent spin state with every atom along (polar, azimuth); polar = 0
    is all atoms in the lower mode (<Jz> = -n/2), and the equatorial mean
    spin points along azimuth measured from +x."""
    if n < 0:
        raise ConfigError(f"atom number must be non-negative, got {n}")
    if not 0.0 <= polar <= math.pi:
        raise ConfigError(f"polar angle must lie in [0, pi], got {polar}")
    if n == 0:
        return _state(0, np.ones(1, dtype=complex))
    half = 0.5 * polar
    c, s = math.cos(half), math.sin(half)
    k = np.arange(n + 1, dtype=float)
    if s == 0.0:
        amps = np.zeros(n + 1, dtype=complex)
        amps[0] = 1.0
    elif c == 0.0:
        amps = np.zeros(n + 1, dtype=complex)
        amps[n] = np.exp(-1j * azimuth * n)
    else:
        logmag = 0.5 * (gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0))
        logmag += (n - k) * math.log(c) + k * math.log(s)
        with np.errstate(under="ignore"):
            amps = np.exp(logmag) * np.exp(-1j * azimuth * k)
    return _state(n, amps)


def evolve_oat(state: CollectiveState, chi: float, delta: float, t: float) -> CollectiveState:
    """Free twisting evolution under chi*Jz^2 + delta*Jz (rad/s, seconds)."""
    m = jz_values(state.n_atoms)
    phases = np.exp(-1j * (chi * m * m + delta * m) * t)
    return _state(state.n_atoms, phases * state.amplitudes)


def apply_z_phase(state: CollectiveState, angle: float) -> CollectiveState:
    """z-rotation exp(-i angle Jz)."""
    m = jz_values(state.n_atoms)
    return _state(state.n_atoms, np.exp(-1j * angle * m) * state.amplitudes)


def rotate(state: CollectiveState, theta: float, phase: float) -> CollectiveState:
    """exp(-i theta (Jx cos(phase) + Jy sin(phase))), via the small-d recursion."""
    out = wignerd.apply_rotation(state.amplitudes, theta, phase)
    return _state(state.n_atoms, out)


def evolve_pulse(
    state: CollectiveState,
    rabi: float,
    phase: float,
    delta: float,
    chi: float,
    t: float,
) -> CollectiveState:
    """Driven evolution under rabi*(Jx cos phase + Jy sin phase) + delta*Jz + chi*Jz^2.

    rabi = 0 reduces exactly to evolve_oat.
    """
    if rabi == 0.0:
        return evolve_oat(state, chi, delta, t)
    n = state.n_atoms
    m = jz_values(n)
    diag = chi * m * m + delta * m
    # <k|H|k+1> couples through the lowering part, so the drive axis at
    # azimuth `phase` puts e^{+i phase} on the upper off-diagonal.
    off = 0.5 * rabi * np.exp(1j * phase) * ladder_coupling(n)
    out = krylov.expm_lanczos(diag, off, np.array(state.amplitudes), t)
    return _state(n, out)


# --- moments ---------------------------------------------------------------


@dataclass(frozen=True)
class SpinMoments:
    """First and second moments of (Jx, Jy, Jz) plus the transverse-plane frame.

    `axes` rows are (e1, e2) spanning the plane orthogonal to the mean spin;
    directions in that plane are n(alpha) = e1 cos(alpha) + e2 sin(alpha),
    with e1 the projection of the z-axis when non-degenerate.
    """

    n_atoms: int
    mean: np.ndarray  # (3,)
    cov: np.ndarray  # (3, 3) symmetrized second central moments
    axes: np.ndarray  # (2, 3)

    @property
    def spin_length(self) -> float:
        return float(np.linalg.norm(self.mean))

    def var_along(self, alpha: float) -> float:
        nvec = self.axes[0] * math.cos(alpha) + self.axes[1] * math.sin(alpha)
        return float(nvec @ self.cov @ nvec)

    def optimal_angle(self) -> float:
        """Angle of minimal transverse variance, in [0, pi).

        Grid scan at 1e-3 rad refined by golden-section search; exact ties
        resolve to the smallest non-negative angle.
        """
        grid = np.arange(0.0, math.pi, 1e-3)
        e1c = self.axes[0] @ self.cov
        e2c = self.axes[1] @ self.cov
        aa = float(self.axes[0] @ e1c)
        bb = float(self.axes[1] @ e2c)
        ab = float(self.axes[1] @ e1c)
        cos_g, sin_g = np.cos(grid), np.sin(grid)
        vals = aa * cos_g**2 + bb * sin_g**2 + 2.0 * ab * cos_g * sin_g
        scale = max(abs(aa), abs(bb), abs(ab), 1e-30)
        vmin = float(vals.min())
        if float(vals.max()) - vmin < 1e-12 * scale:
            return 0.0
        first = int(np.nonzero(vals <= vmin + 1e-12 * scale)[0][0])
        lo = grid[first] - 1e-3
        hi = grid[first] + 1e-3
        invphi = (math.sqrt(5.0) - 1.0) / 2.0
        x1 = hi - invphi * (hi - lo)
        x2 = lo + invphi * (hi - lo)
        f1, f2 = self.var_along(x1), self.var_along(x2)
        for _ in range(60):
            if f1 <= f2:
                hi, x2, f2 = x2, x1, f1
                x1 = hi - invphi * (hi - lo)
                f1 = self.var_along(x1)
            else:
                lo, x1, f1 = x1, x2, f2
                x2 = lo + invphi * (hi - lo)
                f2 = self.var_along(x2)
        best = 0.5 * (lo + hi)
        if best < 0.0:
            best += math.pi
        return float(best % math.pi)

    def min_variance(self) -> float:
        return self.var_along(self.optimal_angle())


def _transverse_axes(mean: np.ndarray, n: int) -> np.ndarray:
    scale = max(0.5 * n, 1.0)
    mhat = np.array([1.0, 0.0, 0.0]) if np.linalg.norm(mean) < 1e-12 * scale else mean / np.linalg.norm(mean)
    e1 = np.array([0.0, 0.0, 1.0]) - mhat[2] * mhat
    if np.linalg.norm(e1) < 1e-9:
        e1 = np.array([1.0, 0.0, 0.0]) - mhat[0] * mhat
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(mhat, e1)
    return np.vstack([e1, e2])


def moments(state: CollectiveState) -> SpinMoments:
    """Exact spin means and symmetrized covariance of the state."""
    n = state.n_atoms
    psi = state.amplitudes
    m = jz_values(n)
    if n == 0:
        return SpinMoments(0, np.zeros(3), np.zeros((3, 3)), _transverse_axes(np.zeros(3), 0))
    a = ladder_coupling(n)
    jz_psi = m * psi
    up = np.zeros_like(psi)
    up[1:] = a * psi[:-1]  # J+ psi
    dn = np.zeros_like(psi)
    dn[:-1] = a * psi[1:]  # J- psi
    jx_psi = 0.5 * (up + dn)
    jy_psi = -0.5j * (up - dn)
    vecs = (jx_psi, jy_psi, jz_psi)
    mean = np.array([float(np.real(np.vdot(psi, v))) for v in vecs])
    raw = np.empty((3, 3))
    for i in range(3):
        for k in range(i, 3):
            raw[i, k] = raw[k, i] = float(np.real(np.vdot(vecs[i], vecs[k])))
    cov = raw - np.outer(mean, mean)
    cov = 0.5 * (cov + cov.T)
    return SpinMoments(n, mean, cov, _transverse_axes(mean, n))


# --- sampling --------------------------------------------------------------


def sample_jz(state: CollectiveState, rng: np.random.Generator) -> float:
    """Draw one projective Jz outcome m (half-integer for odd n)."""
    p = np.abs(state.amplitudes) ** 2
    cdf = np.cumsum(p)
    cdf /= cdf[-1]
    k = int(np.searchsorted(cdf, rng.random(), side="right"))
    k = min(k, state.n_atoms)
    return float(k - 0.5 * state.n_atoms)


def sample_upper_count(state: CollectiveState, rng: np.random.Generator) -> int:
    """Draw the number of atoms in the upper mode (the ladder index itself)."""
    return int(round(sample_jz(state, rng) + 0.5 * state.n_atoms))


# --- independent oracle -----------------------------------------------------

ORACLE_MAX_ATOMS = 10


def brute_force_oracle(
    initial: np.ndarray,
    n: int,
    chi: float,
    delta: float,
    rabi: float,
    phase: float,
    t: float,
) -> np.ndarray:
    """Dense matrix-exponential propagation for n <= 10, an independent code
    path used only to validate the production evolution operators."""
    if n > ORACLE_MAX_ATOMS:
        raise ConfigError(f"oracle supports n <= {ORACLE_MAX_ATOMS}, got {n}")
    if len(initial) != n + 1:
        raise ConfigError("initial vector must have length n + 1")
    j = 0.5 * n
    dim = n + 1
    jp = np.zeros((dim, dim), dtype=complex)
    for k in range(n):
        mk = k - j
        jp[k + 1, k] = math.sqrt(j * (j + 1) - mk * (mk + 1))
    jm = jp.conj().T
    jx = 0.5 * (jp + jm)
    jy = -0.5j * (jp - jm)
    jz = np.diag(np.arange(dim) - j).astype(complex)
    h = rabi * (math.cos(phase) * jx + math.sin(phase) * jy) + delta * jz + chi * (jz @ jz)
    evals, evecs = np.linalg.eigh(h)
    u = (evecs * np.exp(-1j * evals * t)) @ evecs.conj().T
    return u @ np.asarray(initial, dtype=complex)


# --- closed-form twisting moments ------------------------------------------


def oat_closed_form(n: int, theta: float) -> dict[str, float]:
    """Exact moments of a twisted coherent state, theta = chi * t.

    Starting from the CSS along +x, evolution under chi*Jz^2 leaves
    <Jx> = j cos^(n-1)(theta) with the transverse covariance known in closed
    form; used as the analytic oracle for the production evolution chain.
    """
    j = 0.5 * n
    mean_jx = j * math.cos(theta) ** (n - 1)
    vz = 0.5 * j
    vy = (j * (2 * j + 1) - j * (2 * j - 1) * math.cos(2 * theta) ** (n - 2)) / 4.0
    cyz = 0.5 * j * (2 * j - 1) * math.sin(theta) * math.cos(theta) ** (n - 2)
    half_diff = 0.5 * (vy - vz)
    radius = math.hypot(half_diff, cyz)
    vmin = 0.5 * (vy + vz) - radius
    vmax = 0.5 * (vy + vz) + radius
    # in the moments() frame for a +x mean spin: e1 = z, e2 = -y, where
    # var(alpha) = vz cos^2 + vy sin^2 - 2 cyz sin cos
    two_alpha = math.atan2(-cyz, 0.5 * (vz - vy)) + math.pi
    alpha_min = (0.5 * two_alpha) % math.pi
    return {
        "mean_jx": mean_jx,
        "var_min": vmin,
        "var_max": vmax,
        "var_jz": vz,
        "var_jy": vy,
        "cov_yz": cyz,
        "alpha_min": alpha_min,
    }
