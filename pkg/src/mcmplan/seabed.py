"""Sand-ripple gating of the detection rate.

The survey rectangle is split along its diagonal into a rippled triangle and
a clean one. In the rippled part a target only accrues detection when the
vehicle heading is (nearly) perpendicular to the ripple crests::

    dom = rect(w) * (ripple_gain(psi) * S(w) + (1 - S(w)))

with ``rect`` a soft indicator of the rectangle and ``S`` a soft indicator of
the rippled triangle, both built from ``tanh`` edges.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import wrap_angle
from .sensor import SensorParams, Target

SPLITS = ("upper_left", "lower_right")
DOM_FORMS = ("partition", "paper_literal")
REFERENCE_CREST_ANGLE = 0.75 * math.pi


@dataclass(frozen=True)
class RippleField:
    domain_lo: tuple = (5.0, 5.0)
    domain_hi: tuple = (25.0, 25.0)
    ripple_angle: float = REFERENCE_CREST_ANGLE
    edge_sharpness: float = 30.0
    ripple_width_sigma: float = 0.1
    split: str = "upper_left"
    dom_form: str = "partition"

    def __post_init__(self):
        object.__setattr__(self, "domain_lo", tuple(float(v) for v in self.domain_lo))
        object.__setattr__(self, "domain_hi", tuple(float(v) for v in self.domain_hi))
        if not all(lo < hi for lo, hi in zip(self.domain_lo, self.domain_hi)):
            raise ValueError("domain_lo must be below domain_hi componentwise")
        if not self.ripple_width_sigma > 0:
            raise ValueError("ripple_width_sigma must be positive")
        if not self.edge_sharpness > 0:
            raise ValueError("edge_sharpness must be positive")
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}")
        if self.dom_form not in DOM_FORMS:
            raise ValueError(f"dom_form must be one of {DOM_FORMS}")

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                *self.domain_lo,
                *self.domain_hi,
                self.ripple_angle,
                self.edge_sharpness,
                self.ripple_width_sigma,
                float(SPLITS.index(self.split)),
                float(DOM_FORMS.index(self.dom_form)),
            ]
        )


def _band(u, lo, hi, k):
    return 0.5 * (np.tanh(k * (u - lo)) - np.tanh(k * (u - hi)))


def _diagonal_offset(x, y, field: RippleField):
    # signed offset from the lo->hi diagonal, scaled to y units; y - x on a square at the origin diagonal
    (xl, yl), (xh, yh) = field.domain_lo, field.domain_hi
    return (np.asarray(y) - yl) - (np.asarray(x) - xl) * (yh - yl) / (xh - xl)


def soft_rect(x, y, field: RippleField):
    """Smooth indicator of the survey rectangle."""
    k = field.edge_sharpness
    return _band(x, field.domain_lo[0], field.domain_hi[0], k) * _band(y, field.domain_lo[1], field.domain_hi[1], k)


def triangle_blend(x, y, field: RippleField):
    """Weight of the rippled triangle: ~1 inside it, ~0 in the clean one, 0.5 on the diagonal."""
    d = _diagonal_offset(x, y, field)
    if field.split == "lower_right":
        d = -d
    return 0.5 * (np.tanh(field.edge_sharpness * d) + 1.0)


def ripple_gain(heading, field: RippleField = None):
    """Four Gaussian lobes in heading, peaked where the heading crosses the crests at right angles."""
    field = field or RippleField()
    theta = wrap_angle(np.asarray(heading, dtype=float) - (field.ripple_angle - REFERENCE_CREST_ANGLE))
    s = field.ripple_width_sigma
    total = 0.0
    for k in (-1, 0, 1, 2):
        u = (theta - 0.25 * math.pi + math.pi * k) / s
        total = total + np.exp(-0.5 * u * u)
    return total


def ripple_gain_derivative(heading, field: RippleField = None):
    field = field or RippleField()
    theta = wrap_angle(np.asarray(heading, dtype=float) - (field.ripple_angle - REFERENCE_CREST_ANGLE))
    s = field.ripple_width_sigma
    total = 0.0
    for k in (-1, 0, 1, 2):
        u = (theta - 0.25 * math.pi + math.pi * k) / s
        total = total - u / s * np.exp(-0.5 * u * u)
    return total


def _literal_dom(x, y, heading, field: RippleField):
    k = field.edge_sharpness
    d = _diagonal_offset(x, y, field)
    yh = field.domain_hi[1]
    ax = _band(x, field.domain_lo[0], field.domain_hi[0], k)
    upper = 0.5 * (np.tanh(k * d) - np.tanh(k * (np.asarray(y) - yh)))
    lower = 0.5 * (np.tanh(k * (np.asarray(y) - yh)) - np.tanh(k * d))
    return ripple_gain(heading, field) * ax * upper + ax * lower


def dom_weight(omega_x, omega_y, heading, field: RippleField):
    """Ripple gate evaluated at the target position with the vehicle heading."""
    if field.dom_form == "paper_literal":
        return _literal_dom(omega_x, omega_y, heading, field)
    s = triangle_blend(omega_x, omega_y, field)
    return soft_rect(omega_x, omega_y, field) * (ripple_gain(heading, field) * s + (1.0 - s))


def gated_rate(sensor, x, y, psi, ox, oy, field: RippleField = None):
    """Vectorized detection rate of any sensor, gated by the ripple field when given."""
    g = sensor.rate(x, y, psi, ox, oy)
    if field is None:
        return g
    return np.maximum(0.0, g * dom_weight(ox, oy, psi, field))


def effective_gamma(state, target: Target, sensor: SensorParams, field: RippleField = None) -> float:
    return float(gated_rate(sensor, state.x, state.y, state.psi, target.omega_x, target.omega_y, field))


def function_grid(field: RippleField, nx: int, ny: int, heading: float):
    """Sample ``soft_rect``, ``triangle_blend`` and ``dom_weight`` on a regular grid.

    Returns a dict of 2-D arrays indexed ``[iy, ix]`` plus the axis vectors.
    """
    xs = np.linspace(field.domain_lo[0], field.domain_hi[0], nx)
    ys = np.linspace(field.domain_lo[1], field.domain_hi[1], ny)
    gx, gy = np.meshgrid(xs, ys)
    return {
        "x": xs,
        "y": ys,
        "soft_rect": soft_rect(gx, gy, field),
        "triangle_blend": triangle_blend(gx, gy, field),
        "dom_weight": dom_weight(gx, gy, heading, field),
    }
