"""Short-time propagator for tridiagonal-plus-diagonal Hermitian matrices.

Applies ``exp(-i t H)`` to a state vector where ``H`` has a real diagonal and
a complex first off-diagonal (upper ``off``, lower ``conj(off)``).  A diagonal
gauge change first makes the coupling real and non-negative; a compiled
Lanczos recursion then builds a small subspace from the current vector and
propagates inside it.  The subspace and its eigendecomposition do not depend
on the substep length, so the adaptive step control (halving on rejection,
doubling after acceptance) only re-evaluates a small coefficient vector.

The local error per substep is estimated from the first neglected Krylov
coupling and kept below ``LOCAL_TOL``.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .errors import NumericalError

MAX_DIM = 30  # Lanczos subspace cap; matrices at most this size are exact
LOCAL_TOL = 1e-10  # local truncation target per substep
BREAKDOWN_TOL = 1e-12  # relative residual treated as an invariant subspace
NORM_TOL = 1e-8  # allowed norm drift of the final vector
START_ANGLE = 16.0  # first substep length, in units of 1/spectral-halfwidth

_OK = 0
_STEP_UNDERFLOW = 1
_NOT_FINITE = 2


@njit(cache=True)
def _kernel(diag, off, psi, t, tol):  # pragma: no cover - exercised via wrapper
    dim = psi.shape[0]
    m_cap = MAX_DIM if dim > MAX_DIM else dim
    basis = np.empty((m_cap, dim), np.complex128)
    w = np.empty(dim, np.complex128)
    alpha = np.empty(m_cap, np.float64)
    beta = np.empty(m_cap, np.float64)

    # Gershgorin bound on the spectral halfwidth sets the substep scale.
    lo = diag[0]
    hi = diag[0]
    for i in range(dim):
        r = 0.0
        if i > 0:
            r += off[i - 1]
        if i + 1 < dim:
            r += off[i]
        d = diag[i]
        if d - r < lo:
            lo = d - r
        if d + r > hi:
            hi = d + r
    halfwidth = 0.5 * (hi - lo)
    out = psi.copy()
    if halfwidth <= 0.0:
        # Multiple of the identity: a global phase.
        phase = complex(np.cos(diag[0] * t), -np.sin(diag[0] * t))
        for i in range(dim):
            out[i] = out[i] * phase
        return out, _OK

    remaining = abs(t)
    sign = 1.0 if t >= 0.0 else -1.0
    dt_prev = 0.5 * START_ANGLE / halfwidth
    halvings = 0
    while remaining > 0.0:
        # --- Lanczos basis from the current vector (independent of dt) ---
        nrm2 = 0.0
        for i in range(dim):
            nrm2 += out[i].real ** 2 + out[i].imag ** 2
        nrm = np.sqrt(nrm2)
        if not np.isfinite(nrm) or nrm == 0.0:
            return out, _NOT_FINITE
        inv = 1.0 / nrm
        for i in range(dim):
            basis[0, i] = out[i] * inv
        size = m_cap
        beta_next = 0.0
        for k in range(m_cap):
            if dim == 1:
                w[0] = diag[0] * basis[k, 0]
            else:
                w[0] = diag[0] * basis[k, 0] + off[0] * basis[k, 1]
                for i in range(1, dim - 1):
                    w[i] = (
                        diag[i] * basis[k, i]
                        + off[i - 1] * basis[k, i - 1]
                        + off[i] * basis[k, i + 1]
                    )
                w[dim - 1] = (
                    diag[dim - 1] * basis[k, dim - 1]
                    + off[dim - 2] * basis[k, dim - 2]
                )
            a = 0.0
            for i in range(dim):
                a += basis[k, i].real * w[i].real + basis[k, i].imag * w[i].imag
            alpha[k] = a
            if k > 0:
                b = beta[k - 1]
                for i in range(dim):
                    w[i] -= a * basis[k, i] + b * basis[k - 1, i]
            else:
                for i in range(dim):
                    w[i] -= a * basis[k, i]
            bn2 = 0.0
            for i in range(dim):
                bn2 += w[i].real ** 2 + w[i].imag ** 2
            beta_next = np.sqrt(bn2)
            if not np.isfinite(beta_next):
                return out, _NOT_FINITE
            if k + 1 == m_cap:
                break
            if beta_next <= BREAKDOWN_TOL * halfwidth:
                size = k + 1
                break
            beta[k] = beta_next
            invb = 1.0 / beta_next
            for i in range(dim):
                basis[k + 1, i] = w[i] * invb

        tmat = np.zeros((size, size), np.float64)
        for k in range(size):
            tmat[k, k] = alpha[k]
            if k + 1 < size:
                tmat[k, k + 1] = beta[k]
                tmat[k + 1, k] = beta[k]
        evals, evecs = np.linalg.eigh(tmat)

        # --- pick the largest substep whose local error passes ---
        dt = 2.0 * dt_prev
        if dt > remaining:
            dt = remaining
        coeff = np.empty(size, np.complex128)
        while True:
            for k in range(size):
                coeff[k] = 0.0
            for j in range(size):
                ang = -sign * dt * evals[j]
                ph = complex(np.cos(ang), np.sin(ang)) * evecs[0, j]
                for k in range(size):
                    coeff[k] += evecs[k, j] * ph
            err = dt * beta_next * abs(coeff[size - 1])
            if not np.isfinite(err):
                return out, _NOT_FINITE
            if err <= tol:
                break
            dt *= 0.5
            halvings += 1
            if halvings > 200 or dt <= 1e-18 * abs(t):
                return out, _STEP_UNDERFLOW

        for i in range(dim):
            out[i] = 0.0
        for k in range(size):
            c = coeff[k] * nrm
            for i in range(dim):
                out[i] += c * basis[k, i]
        remaining -= dt
        dt_prev = dt
    return out, _OK


def expm_lanczos(diag: np.ndarray, off: np.ndarray, psi: np.ndarray, t: float) -> np.ndarray:
    """Propagate ``psi`` under ``exp(-i t H)``; norm preserved to 1e-8 or it raises."""
    psi = np.ascontiguousarray(psi, dtype=np.complex128)
    dim = psi.shape[0]
    if t == 0.0:
        return psi.copy()
    if dim == 1:
        return psi * np.exp(-1j * float(diag[0]) * t)
    diag = np.ascontiguousarray(diag, dtype=np.float64)
    off_c = np.asarray(off, dtype=np.complex128)
    # Diagonal gauge: theta[k+1] = theta[k] + arg(off[k]) turns the coupling
    # into its magnitude while leaving the propagated physics unchanged.
    theta = np.concatenate(([0.0], np.cumsum(np.angle(off_c))))
    gauge = np.exp(1j * theta)
    out, status = _kernel(
        diag,
        np.ascontiguousarray(np.abs(off_c)),
        np.ascontiguousarray(gauge * psi),
        float(t),
        LOCAL_TOL,
    )
    if status == _STEP_UNDERFLOW:
        raise NumericalError("propagator substep underflow: local error target unreachable")
    if status == _NOT_FINITE:
        raise NumericalError("propagator produced a non-finite intermediate")
    out = gauge.conj() * out
    norm_in = float(np.linalg.norm(psi))
    norm_out = float(np.linalg.norm(out))
    if norm_in == 0.0 or abs(norm_out / norm_in - 1.0) > NORM_TOL:
        raise NumericalError("propagator norm drift exceeds tolerance")
    return out * (norm_in / norm_out)
