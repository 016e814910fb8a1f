import math

import numpy as np
import pytest

from squeezelab import units


def test_angle_round_trip():
    rng = np.random.default_rng(1)
    for a in rng.uniform(-720, 720, size=50):
        assert units.rad_to_deg(units.deg_to_rad(a)) == pytest.approx(a, abs=1e-12)
    assert units.deg_to_rad(180.0) == pytest.approx(math.pi, rel=1e-15)


def test_frequency_round_trip():
    rng = np.random.default_rng(2)
    for f in rng.uniform(-1e9, 1e9, size=50):
        assert units.rad_to_hz(units.hz_to_rad(f)) == pytest.approx(f, rel=1e-14)
    assert units.hz_to_rad(1.0) == pytest.approx(units.TWO_PI)


def test_field_unit_round_trip():
    assert units.gauss_to_tesla(1.0) == 1e-4
    assert units.tesla_to_gauss(units.gauss_to_tesla(0.03)) == pytest.approx(0.03, rel=1e-15)


def test_db_round_trip():
    rng = np.random.default_rng(3)
    for x_db in rng.uniform(-40, 40, size=100):
        assert units.to_db(units.from_db(x_db)) == pytest.approx(x_db, abs=1e-10)
    for x in rng.uniform(1e-6, 1e6, size=100):
        assert units.from_db(units.to_db(x)) == pytest.approx(x, rel=1e-12)
    assert units.to_db(1.0) == 0.0


def test_db_rejects_non_positive():
    with pytest.raises(ValueError):
        units.to_db(0.0)
    with pytest.raises(ValueError):
        units.to_db(-3.0)
