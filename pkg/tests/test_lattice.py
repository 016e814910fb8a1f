"""Lattice construction, coupling laws, regions, and subset enumeration."""

import itertools
import math

import numpy as np
import pytest

from squeezelab import rng as streams
from squeezelab.errors import ConfigError
from squeezelab.lattice import (
    CHI_REF_DEFAULT,
    AtomNumberLaw,
    LatticeConfig,
    RegionSpec,
    build_lattice,
    centered_window_pair,
    chi_of_n,
    delta_of_n,
    enumerate_combinations,
    halves,
    region_centroid,
    sum_region,
)
from util import records_from_detected


def test_coupling_law_anchor_and_scaling():
    assert chi_of_n(500) == pytest.approx(2 * math.pi * 0.064, rel=1e-12)
    assert chi_of_n(125) == pytest.approx(2 * CHI_REF_DEFAULT, rel=1e-12)
    # density scaling: chi ~ 1/sqrt(N)
    assert chi_of_n(2000) == pytest.approx(0.5 * CHI_REF_DEFAULT, rel=1e-12)


def test_detuning_law_slope():
    # 1 Hz per 40 atoms around the 500-atom anchor
    assert delta_of_n(540) - delta_of_n(500) == pytest.approx(2 * math.pi, rel=1e-12)
    assert delta_of_n(500, delta0=3.0) == pytest.approx(3.0, rel=1e-12)


def test_atom_number_laws():
    rng = streams.substream(0, streams.ATOM_NUMBERS)
    uniform = AtomNumberLaw(kind="uniform", low=300, high=600).draw(500, rng)
    assert uniform.min() >= 300 and uniform.max() <= 600
    fixed = AtomNumberLaw(kind="fixed", low=450).draw(4, rng)
    assert np.array_equal(fixed, [450] * 4)
    listed = AtomNumberLaw(kind="list", values=(10, 20, 30)).draw(3, rng)
    assert np.array_equal(listed, [10, 20, 30])


def test_build_lattice_sites():
    config = LatticeConfig(n_sites=5, atom_number_law=AtomNumberLaw(kind="fixed", low=400))
    sites = build_lattice(config, streams.substream(1, streams.ATOM_NUMBERS))
    assert [s.site_index for s in sites] == list(range(5))
    assert [s.position for s in sites] == [0.0, 5.5, 11.0, 16.5, 22.0]
    assert all(s.n_atoms == 400 for s in sites)
    assert all(s.chi == pytest.approx(chi_of_n(400)) for s in sites)


def test_build_lattice_deterministic():
    config = LatticeConfig(n_sites=8)
    a = build_lattice(config, streams.substream(3, streams.ATOM_NUMBERS))
    b = build_lattice(config, streams.substream(3, streams.ATOM_NUMBERS))
    assert [s.n_atoms for s in a] == [s.n_atoms for s in b]


def test_halves_split():
    assert halves(4).regions == ((0, 1), (2, 3))
    left, right = halves(25).regions
    assert len(left) == 13 and len(right) == 12  # odd middle site goes left
    assert left[-1] == 12 and right[0] == 13


def test_centered_window_pair_geometry():
    config = LatticeConfig(n_sites=25, atom_number_law=AtomNumberLaw(kind="fixed", low=400))
    sites = build_lattice(config, streams.substream(0, streams.ATOM_NUMBERS))
    for width in (1, 4, 9, 12):
        spec = centered_window_pair(25, width)
        baseline = region_centroid(sites, spec.regions[1]) - region_centroid(sites, spec.regions[0])
        assert baseline == pytest.approx(width * 5.5, rel=1e-12)
    with pytest.raises(ConfigError):
        centered_window_pair(25, 13)
    with pytest.raises(ConfigError):
        centered_window_pair(25, 0)


def test_region_spec_validation():
    with pytest.raises(ConfigError):
        RegionSpec(((0, 0, 1),))  # duplicate site
    with pytest.raises(ConfigError):
        RegionSpec(((0, 1), (1, 2)))  # overlapping regions


def test_sum_region_detected_and_true():
    rec = records_from_detected([[10.0, 20.0, 30.0]], [[1.0, 2.0, 3.0]])[0]
    spec = RegionSpec(((0, 2), (1,)))
    assert sum_region(rec, spec) == [(40.0, 4.0), (20.0, 2.0)]
    with pytest.raises(ConfigError):
        sum_region(rec, RegionSpec(((5,),)))


def test_combination_enumeration_matches_brute_force():
    rng = streams.substream(7, streams.COMBINATIONS)
    config = LatticeConfig(n_sites=10, atom_number_law=AtomNumberLaw(kind="uniform", low=300, high=600))
    sites = build_lattice(config, streams.substream(11, streams.ATOM_NUMBERS))
    atoms = [s.n_atoms for s in sites]
    target = 1500
    band = 0.02
    expected = set()
    for r in range(1, 11):
        for combo in itertools.combinations(range(10), r):
            total = sum(atoms[i] for i in combo)
            if abs(total - target) <= band * target:
                expected.add(tuple(sorted(combo)))
    combos = enumerate_combinations(sites, target, 10_000, rng)
    got = {tuple(sorted(spec.regions[0])) for spec in combos}
    assert got == expected
    for spec in combos:
        total = sum(atoms[i] for i in spec.regions[0])
        assert abs(total - target) <= band * target


def test_combination_enumeration_caps_and_dedupes():
    config = LatticeConfig(n_sites=10, atom_number_law=AtomNumberLaw(kind="uniform", low=300, high=600))
    sites = build_lattice(config, streams.substream(13, streams.ATOM_NUMBERS))
    combos = enumerate_combinations(sites, 2000, 5, streams.substream(1, streams.COMBINATIONS))
    assert 0 < len(combos) <= 5
    keys = [tuple(sorted(spec.regions[0])) for spec in combos]
    assert len(keys) == len(set(keys))
