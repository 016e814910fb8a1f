"""Short-time propagator against dense references."""

import math

import numpy as np
import pytest
from scipy.linalg import expm

from squeezelab import krylov


def _random_tridiagonal(rng, dim):
    diag = rng.uniform(-50, 50, size=dim)
    off = rng.uniform(-30, 30, size=dim - 1) * np.exp(1j * rng.uniform(0, 2 * math.pi, size=dim - 1))
    return diag, off


def _dense(diag, off):
    h = np.diag(diag.astype(complex))
    idx = np.arange(len(off))
    h[idx, idx + 1] = off
    h[idx + 1, idx] = np.conj(off)
    return h


def _unit(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def test_matches_dense_matrix_exponential():
    rng = np.random.default_rng(21)
    worst = 0.0
    for dim in (2, 3, 5, 16, 40, 120):
        for _ in range(6):
            diag, off = _random_tridiagonal(rng, dim)
            psi = _unit(rng, dim)
            t = rng.uniform(1e-4, 0.05)
            got = krylov.expm_lanczos(diag, off, psi.copy(), t)
            want = expm(-1j * _dense(diag, off) * t) @ psi
            worst = max(worst, float(np.max(np.abs(got - want))))
    assert worst < 1e-8


def test_strong_drive_large_system():
    # paper-scale dimensions and rabi couplings, against a dense reference
    rng = np.random.default_rng(22)
    dim = 401
    n = dim - 1
    j = 0.5 * n
    m = np.arange(dim) - j
    diag = 2.0 * (m**2) * 0.4 + 3.0 * m
    rabi = 2 * math.pi * 310.0
    off = 0.5 * rabi * np.sqrt(j * (j + 1) - m[:-1] * (m[:-1] + 1)) * np.exp(0.7j)
    psi = _unit(rng, dim)
    t = 1.0 / (4 * 310.0)  # a quarter Rabi period
    got = krylov.expm_lanczos(diag, off, psi.copy(), t)
    want = expm(-1j * _dense(diag, off) * t) @ psi
    assert float(np.max(np.abs(got - want))) < 1e-8


def test_unitarity():
    rng = np.random.default_rng(23)
    diag, off = _random_tridiagonal(rng, 80)
    psi = _unit(rng, 80)
    out = krylov.expm_lanczos(diag, off, psi, 0.02)
    assert np.linalg.norm(out) == pytest.approx(1.0, abs=1e-8)


def test_time_additivity():
    rng = np.random.default_rng(24)
    diag, off = _random_tridiagonal(rng, 60)
    psi = _unit(rng, 60)
    one_step = krylov.expm_lanczos(diag, off, psi.copy(), 0.03)
    two_step = krylov.expm_lanczos(diag, off, krylov.expm_lanczos(diag, off, psi.copy(), 0.011), 0.019)
    assert np.max(np.abs(one_step - two_step)) < 1e-8


def test_zero_time_is_identity():
    rng = np.random.default_rng(25)
    diag, off = _random_tridiagonal(rng, 30)
    psi = _unit(rng, 30)
    assert np.allclose(krylov.expm_lanczos(diag, off, psi.copy(), 0.0), psi, atol=1e-13)
