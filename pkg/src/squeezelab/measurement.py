"""Projective readout of all sites in a shot and detection-noise application."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import collective
from .errors import DataError
from .lattice import RegionSpec, sum_region
from .noise import NoiseConfig, ShotNoise


@dataclass(frozen=True)
class ShotRecord:
    shot_index: int
    n_a_true: np.ndarray  # int per site
    n_b_true: np.ndarray
    n_a_det: np.ndarray  # float per site (additive detection noise)
    n_b_det: np.ndarray
    noise: ShotNoise | None = None  # echoed draws for auditability
    run_id: str = ""

    @property
    def n_sites(self) -> int:
        return len(self.n_a_true)


@dataclass(frozen=True)
class ImbalanceView:
    z: np.ndarray  # one imbalance per region

    @property
    def delta_z(self) -> float:
        if len(self.z) != 2:
            raise DataError(f"delta_z needs exactly 2 regions, have {len(self.z)}")
        return float(self.z[0] - self.z[1])


def measure_shot(
    final_states: list[collective.CollectiveState],
    config: NoiseConfig,
    rng: np.random.Generator,
    detection_rng: np.random.Generator | None = None,
    shot_index: int = 0,
    noise: ShotNoise | None = None,
    run_id: str = "",
) -> ShotRecord:
    """Sample per-site populations and add per-cloud Gaussian detection noise."""
    det_rng = detection_rng if detection_rng is not None else rng
    n_sites = len(final_states)
    n_a_true = np.empty(n_sites, dtype=int)
    n_b_true = np.empty(n_sites, dtype=int)
    for i, state in enumerate(final_states):
        k = collective.sample_upper_count(state, rng)
        n_b_true[i] = k
        n_a_true[i] = state.n_atoms - k
    sigma = config.detection_sigma
    if sigma > 0:
        n_a_det = n_a_true + det_rng.normal(0.0, sigma, size=n_sites)
        n_b_det = n_b_true + det_rng.normal(0.0, sigma, size=n_sites)
    else:
        n_a_det = n_a_true.astype(float)
        n_b_det = n_b_true.astype(float)
    return ShotRecord(
        shot_index=shot_index,
        n_a_true=n_a_true,
        n_b_true=n_b_true,
        n_a_det=n_a_det,
        n_b_det=n_b_det,
        noise=noise,
        run_id=run_id,
    )


def imbalances(shot: ShotRecord, regions: RegionSpec, detected: bool = True) -> ImbalanceView:
    """z = (N_b - N_a) / (N_b + N_a) per summed region."""
    sums = sum_region(shot, regions, detected=detected)
    z = np.empty(len(sums))
    for i, (na, nb) in enumerate(sums):
        total = na + nb
        if total <= 0:
            raise DataError(f"region {i} has non-positive detected total {total}")
        z[i] = (nb - na) / total
    return ImbalanceView(z=z)
