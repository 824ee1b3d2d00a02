"""Deterministic link-budget factors: free-space loss, beam pattern, composite gain."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ValidationError
from .specfun import bessel_j

__all__ = [
    "SPEED_OF_LIGHT",
    "HALF_POWER_U",
    "LinkGeometry",
    "db_to_linear",
    "free_space_loss",
    "beam_u",
    "beam_pattern",
    "beam_gain",
    "composite_gain",
    "boresight_gain",
]

SPEED_OF_LIGHT = 299_792_458.0  # m/s, exact SI value
HALF_POWER_U = 2.07123

# Below this u the Bessel ratios cancel badly; use 1 - 5 u^2 / 64 instead.
# (J1(u)/2u = 1/4 - u^2/32 + ..., 36 J3(u)/u^3 = 3/4 - 3 u^2/64 + ...)
_LIMIT_U = 1e-4
_LIMIT_QUAD = 5.0 / 64.0


@dataclass(frozen=True)
class LinkGeometry:
    """Per-user link geometry; angles in degrees, gains in dBi."""

    carrier_hz: float = 1e9
    distance_m: float = 1_000_000.0
    angle_deg: float = 0.1
    angle3db_deg: float = 0.4
    sat_gain_dbi: float = 24.3
    user_gain_dbi: float = 3.5

    def __post_init__(self):
        if not self.carrier_hz > 0:
            raise ValidationError(f"carrier_hz must be positive, got {self.carrier_hz}")
        if not self.distance_m > 0:
            raise ValidationError(f"distance_m must be positive, got {self.distance_m}")
        if not 0 <= self.angle_deg < 90:
            raise ValidationError(f"angle_deg must lie in [0, 90), got {self.angle_deg}")
        if not self.angle3db_deg > 0:
            raise ValidationError(f"angle3db_deg must be positive, got {self.angle3db_deg}")


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def free_space_loss(carrier_hz: float, distance_m: float) -> float:
    """``(lambda / (4 pi d))^2`` with ``lambda = c / f``."""
    if not (carrier_hz > 0 and distance_m > 0):
        raise ValueError("carrier frequency and distance must be positive")
    wavelength = SPEED_OF_LIGHT / carrier_hz
    return (wavelength / (4.0 * math.pi * distance_m)) ** 2


def beam_u(angle_deg: float, angle3db_deg: float) -> float:
    return HALF_POWER_U * math.sin(math.radians(angle_deg)) / math.sin(math.radians(angle3db_deg))


def beam_pattern(u: float) -> float:
    """Normalized pattern ``J1(u)/(2u) + 36 J3(u)/u^3``; equals 1 at ``u = 0``."""
    u = abs(u)
    if u < _LIMIT_U:
        return 1.0 - _LIMIT_QUAD * u * u
    return bessel_j(1, u) / (2.0 * u) + 36.0 * bessel_j(3, u) / u**3


def beam_gain(user_gain_linear: float, angle_deg: float, angle3db_deg: float) -> float:
    if not angle3db_deg > 0:
        raise ValueError(f"3-dB angle must be positive, got {angle3db_deg}")
    if angle_deg < 0:
        raise ValueError(f"off-boresight angle must be nonnegative, got {angle_deg}")
    return user_gain_linear * beam_pattern(beam_u(angle_deg, angle3db_deg))


def composite_gain(geom: LinkGeometry) -> float:
    """Free-space loss times satellite gain times the user's beam gain."""
    eta = free_space_loss(geom.carrier_hz, geom.distance_m)
    g_user = beam_gain(db_to_linear(geom.user_gain_dbi), geom.angle_deg, geom.angle3db_deg)
    return eta * db_to_linear(geom.sat_gain_dbi) * g_user


def boresight_gain(geom: LinkGeometry) -> float:
    """Composite gain the same link would have at the beam centre."""
    eta = free_space_loss(geom.carrier_hz, geom.distance_m)
    return eta * db_to_linear(geom.sat_gain_dbi) * db_to_linear(geom.user_gain_dbi)
