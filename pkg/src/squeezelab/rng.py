"""Deterministic substream derivation for parallel runs.

Every random draw in a run comes from a counter-based Philox substream keyed
by (master_seed, purpose, shot, site).  Substreams are independent of worker
count and evaluation order, so a run is byte-identical for 1 or N workers.

The counter layout puts the stream id in the three high words and leaves the
low word for in-stream advancement; distinct ids can never collide within
2^64 draws.
"""

from __future__ import annotations

import numpy as np

# fixed purpose codes; never renumber, they are part of the determinism contract
FIELD = 1         # per-shot field offset (shot-to-shot component)
BLOCK = 2         # per-block long-term field offset
GEN_DETUNING = 3  # per-shot two-photon detuning during generation
PULSE_DETUNING = 4  # per-shot pulse/swap detuning
LOSS = 5          # per (shot, site) quantum-jump trajectory
PROJECTION = 6    # per-shot Jz projection draws (sites consumed in order)
DETECTION = 7     # per-shot detection noise (sites consumed in order)
ATOM_NUMBERS = 8  # lattice build
BOOTSTRAP = 9     # estimator resampling
COMBINATIONS = 10  # subset sampling

_KEY_SALT = 0x9E3779B97F4A7C15  # second key word, arbitrary fixed constant


def substream(master_seed: int, purpose: int, shot: int = 0, site: int = 0) -> np.random.Generator:
    """Generator for one (purpose, shot, site) substream of a master seed."""
    if not 0 <= int(master_seed) < 2**64:
        raise ValueError(f"master seed must fit in uint64, got {master_seed}")
    bits = np.random.Philox(
        counter=[0, int(purpose), int(shot), int(site)],
        key=[int(master_seed), _KEY_SALT],
    )
    return np.random.Generator(bits)
