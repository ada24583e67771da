"""Closed-form sensors with known risk values, used to validate the integrator and optimizer.

Each exposes the same vectorized ``rate(x, y, psi, ox, oy)`` hook as
:class:`mcmplan.sensor.SensorParams`.
"""
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ConstantRateSensor:
    """Detects every target at the same rate, wherever the vehicle is."""

    c: float

    def rate(self, x, y, psi, ox, oy):
        return np.full(np.broadcast(np.asarray(ox), np.asarray(x)).shape, float(self.c))


@dataclass(frozen=True)
class HalfPlaneSensor:
    """Rate ``c`` for targets with ``omega_x > x_split``, zero elsewhere."""

    c: float
    x_split: float

    def rate(self, x, y, psi, ox, oy):
        ox = np.asarray(ox, dtype=float)
        return np.where(ox > self.x_split, float(self.c), 0.0) + 0.0 * np.asarray(x)


@dataclass(frozen=True)
class DiskSensor:
    """Detects targets inside a fixed disk, weighted by how squarely the vehicle faces the disk.

    The facing weight ``(1 + cos(bearing error)) / 2`` makes the rate depend on
    the vehicle pose, so an optimizer has something to steer.
    """

    c: float
    center: tuple
    radius: float

    def rate(self, x, y, psi, ox, oy):
        ox = np.asarray(ox, dtype=float)
        oy = np.asarray(oy, dtype=float)
        inside = (ox - self.center[0]) ** 2 + (oy - self.center[1]) ** 2 <= self.radius**2
        bearing = np.arctan2(self.center[1] - y, self.center[0] - x)
        facing = 0.5 * (1.0 + np.cos(bearing - psi))
        return np.where(inside, self.c * facing, 0.0)
