"""Unit conversions, centralized so interface units stay consistent.

Interfaces use Hz, seconds, Tesla and degrees; everything internal is
rad/s and radians.  dB values are power-like: 10*log10.
"""

import math

TWO_PI = 2.0 * math.pi

GAUSS_PER_TESLA = 1.0e4
TESLA_PER_GAUSS = 1.0e-4


def hz_to_rad(f_hz: float) -> float:
    return TWO_PI * f_hz


def rad_to_hz(w_rad: float) -> float:
    return w_rad / TWO_PI


def deg_to_rad(a_deg: float) -> float:
    return math.radians(a_deg)


def rad_to_deg(a_rad: float) -> float:
    return math.degrees(a_rad)


def gauss_to_tesla(b_gauss: float) -> float:
    return b_gauss * TESLA_PER_GAUSS


def tesla_to_gauss(b_tesla: float) -> float:
    return b_tesla * GAUSS_PER_TESLA


def to_db(x: float) -> float:
    if x <= 0.0:
        raise ValueError(f"dB undefined for non-positive value {x}")
    return 10.0 * math.log10(x)


def from_db(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)
