"""Site-array geometry, atom-number-dependent couplings, and region algebra.

Sites sit on a 1D lattice (5.5 um default spacing).  Per-site couplings follow
the calibrated laws chi(N) = chi_ref * sqrt(500/N) and
delta(N) = delta0 + delta_slope * (N - 500).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .units import TWO_PI

N_REF = 500  # atom-number anchor of both coupling laws
MAX_SITES = 30
CHI_REF_DEFAULT = TWO_PI * 0.064  # rad/s at N_REF atoms
DELTA_SLOPE_DEFAULT = TWO_PI / 40.0  # rad/s per atom
SPACING_DEFAULT = 5.5  # um
COMBINATION_BAND = 0.02  # relative half-width of the subset-sum window


@dataclass(frozen=True)
class AtomNumberLaw:
    """Per-site atom-number draw: 'uniform' integers on [low, high], 'fixed'
    at low, or an explicit per-site 'list' in values."""

    kind: str = "uniform"
    low: int = 300
    high: int = 600
    values: tuple[int, ...] | None = None

    def draw(self, n_sites: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "uniform":
            if self.high < self.low or self.low < 1:
                raise ConfigError(f"empty atom-number range [{self.low}, {self.high}]")
            return rng.integers(self.low, self.high + 1, size=n_sites)
        if self.kind == "fixed":
            if self.low < 1:
                raise ConfigError("fixed atom number must be >= 1")
            return np.full(n_sites, self.low, dtype=int)
        if self.kind == "list":
            if self.values is None or len(self.values) != n_sites:
                raise ConfigError("list law needs one value per site")
            if min(self.values) < 1:
                raise ConfigError("atom numbers must be >= 1")
            return np.array(self.values, dtype=int)
        raise ConfigError(f"unknown atom-number law {self.kind!r}")


@dataclass(frozen=True)
class LatticeConfig:
    n_sites: int = 25
    atom_number_law: AtomNumberLaw = field(default_factory=AtomNumberLaw)
    chi_ref: float = CHI_REF_DEFAULT
    delta0: float = 0.0
    delta_slope: float = DELTA_SLOPE_DEFAULT
    spacing: float = SPACING_DEFAULT

    def validate(self) -> None:
        if not 1 <= self.n_sites <= MAX_SITES:
            raise ConfigError(f"n_sites must lie in [1, {MAX_SITES}], got {self.n_sites}")
        if self.spacing <= 0:
            raise ConfigError("spacing must be positive")
        if self.chi_ref <= 0:
            raise ConfigError("chi_ref must be positive")


@dataclass(frozen=True)
class SiteParams:
    site_index: int
    n_atoms: int
    chi: float  # rad/s
    delta_offset: float  # rad/s
    position: float  # um


@dataclass(frozen=True)
class RegionSpec:
    """Disjoint sets of site indices to be summed together."""

    regions: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        seen: set[int] = set()
        for region in self.regions:
            for idx in region:
                if idx in seen:
                    raise ConfigError(f"site {idx} appears in more than one region")
                seen.add(idx)

    @property
    def n_regions(self) -> int:
        return len(self.regions)


def chi_of_n(n_atoms: int, chi_ref: float = CHI_REF_DEFAULT) -> float:
    return chi_ref * math.sqrt(N_REF / n_atoms)


def delta_of_n(n_atoms: int, delta0: float = 0.0, delta_slope: float = DELTA_SLOPE_DEFAULT) -> float:
    return delta0 + delta_slope * (n_atoms - N_REF)


def build_lattice(config: LatticeConfig, rng: np.random.Generator) -> list[SiteParams]:
    """Draw per-site atom numbers and derive couplings and positions."""
    config.validate()
    counts = config.atom_number_law.draw(config.n_sites, rng)
    return [
        SiteParams(
            site_index=i,
            n_atoms=int(n),
            chi=chi_of_n(int(n), config.chi_ref),
            delta_offset=delta_of_n(int(n), config.delta0, config.delta_slope),
            position=i * config.spacing,
        )
        for i, n in enumerate(counts)
    ]


def halves(n_sites: int) -> RegionSpec:
    """Left/right split; the left half takes the middle site when odd."""
    cut = (n_sites + 1) // 2
    return RegionSpec((tuple(range(cut)), tuple(range(cut, n_sites))))


def centered_window_pair(n_sites: int, width: int) -> RegionSpec:
    """Adjacent windows of `width` sites on each side of the half boundary.

    Centroid separation grows as spacing * width, the gradiometer baseline.
    """
    cut = (n_sites + 1) // 2
    if width < 1 or cut - width < 0 or cut + width > n_sites:
        raise ConfigError(f"window width {width} does not fit {n_sites} sites")
    return RegionSpec((tuple(range(cut - width, cut)), tuple(range(cut, cut + width))))


def region_centroid(sites: list[SiteParams], region: tuple[int, ...]) -> float:
    return float(np.mean([sites[i].position for i in region]))


def sum_region(shot, spec: RegionSpec, detected: bool = True) -> list[tuple[float, float]]:
    """Component-wise population sums per region of a shot record."""
    n_a = shot.n_a_det if detected else shot.n_a_true
    n_b = shot.n_b_det if detected else shot.n_b_true
    n_sites = len(n_a)
    out = []
    for region in spec.regions:
        if any(not 0 <= i < n_sites for i in region):
            raise ConfigError(f"region {region} outside 0..{n_sites - 1}")
        idx = list(region)
        out.append((float(np.sum(np.asarray(n_a)[idx])), float(np.sum(np.asarray(n_b)[idx]))))
    return out


# --- subset enumeration -----------------------------------------------------


def _suffix_counts(atoms: np.ndarray) -> np.ndarray:
    """ways[i, s] = number of subsets of atoms[i:] summing to s."""
    total = int(atoms.sum())
    n = len(atoms)
    ways = np.zeros((n + 1, total + 1), dtype=np.float64)
    ways[n, 0] = 1.0
    for i in range(n - 1, -1, -1):
        a = int(atoms[i])
        ways[i] = ways[i + 1]
        ways[i, a:] = ways[i, a:] + ways[i + 1, : total + 1 - a]
    return ways


def _decode_subset(order_idx: float, atoms: np.ndarray, cum: np.ndarray, lo: int, hi: int) -> tuple[int, ...]:
    """Return the order_idx-th subset (exclude-before-include order) whose sum
    lands in [lo, hi], using cumulative suffix counts."""
    total = cum.shape[1] - 2
    n = len(atoms)

    def window(i: int, partial: int) -> float:
        a = min(hi - partial, total)
        b = lo - partial - 1
        if a < 0:
            return 0.0
        return cum[i, a + 1] - (cum[i, b + 1] if b >= 0 else 0.0)

    chosen = []
    partial = 0
    u = order_idx
    for i in range(n):
        without = window(i + 1, partial)
        if u < without:
            continue
        u -= without
        chosen.append(i)
        partial += int(atoms[i])
    return tuple(chosen)


def enumerate_combinations(
    sites: list[SiteParams],
    target_mean_atoms: int,
    max_subsets: int,
    rng: np.random.Generator,
    band: float = COMBINATION_BAND,
) -> list[RegionSpec]:
    """All site subsets whose total atom number lies within +-band of the
    target; uniformly subsampled (seeded) when there are more than
    max_subsets.  Counting and decoding run on a subset-sum table, so no
    power-set walk ever happens."""
    if not sites:
        return []
    if max_subsets < 1:
        raise ConfigError("max_subsets must be >= 1")
    ordered = sorted(sites, key=lambda s: s.site_index)
    atoms = np.array([s.n_atoms for s in ordered], dtype=int)
    index_of = [s.site_index for s in ordered]
    lo = math.ceil(target_mean_atoms * (1.0 - band))
    hi = math.floor(target_mean_atoms * (1.0 + band))
    if hi < lo or hi < 0 or lo > int(atoms.sum()):
        return []
    lo = max(lo, 0)
    ways = _suffix_counts(atoms)
    cum = np.concatenate([np.zeros((len(atoms) + 1, 1)), np.cumsum(ways, axis=1)], axis=1)
    total = int(atoms.sum())
    k_lo = min(lo, total + 1)
    k_hi = min(hi, total)
    count = float(np.sum(ways[0, k_lo : k_hi + 1])) if k_lo <= k_hi else 0.0
    if count <= 0:
        return []
    if count > 2**53:
        raise ConfigError("subset count exceeds exact float range; narrow the band")
    n_found = int(count)
    if n_found <= max_subsets:
        picks = range(n_found)
    else:
        chosen: set[int] = set()
        while len(chosen) < max_subsets:
            draw = int(rng.integers(0, n_found))
            chosen.add(draw)
        picks = sorted(chosen)
    out = []
    for u in picks:
        subset = _decode_subset(float(u), atoms, cum, lo, hi)
        out.append(RegionSpec((tuple(index_of[i] for i in subset),)))
    return out
