"""Shared helpers for the test suite: synthetic shot records and tolerances."""

from __future__ import annotations

import numpy as np

from squeezelab.measurement import ShotRecord


def records_from_detected(n_a: np.ndarray, n_b: np.ndarray) -> list[ShotRecord]:
    """Build shot records from (n_shots, n_sites) detected population arrays.

    True populations are the rounded detected ones; good enough for estimator
    algebra tests, which only read the detected columns.
    """
    n_a = np.atleast_2d(np.asarray(n_a, dtype=float))
    n_b = np.atleast_2d(np.asarray(n_b, dtype=float))
    assert n_a.shape == n_b.shape
    return [
        ShotRecord(
            shot_index=s,
            n_a_true=np.round(n_a[s]).astype(int),
            n_b_true=np.round(n_b[s]).astype(int),
            n_a_det=n_a[s].copy(),
            n_b_det=n_b[s].copy(),
        )
        for s in range(n_a.shape[0])
    ]


def binomial_records(
    rng: np.random.Generator,
    n_shots: int,
    site_atoms: list[int],
    p: float = 0.5,
    detection_sigma: float = 0.0,
) -> list[ShotRecord]:
    """Uncorrelated binomial (coherent-state-like) populations per site."""
    n_sites = len(site_atoms)
    n_b = np.empty((n_shots, n_sites))
    n_a = np.empty((n_shots, n_sites))
    for j, n in enumerate(site_atoms):
        k = rng.binomial(n, p, size=n_shots)
        n_b[:, j] = k
        n_a[:, j] = n - k
    if detection_sigma > 0:
        n_a = n_a + rng.normal(0.0, detection_sigma, size=n_a.shape)
        n_b = n_b + rng.normal(0.0, detection_sigma, size=n_b.shape)
    return records_from_detected(n_a, n_b)
