"""Monte Carlo estimate of the residual risk and deterministic coverage grids.

Residual risk is the probability that a mine placed uniformly at random in
the survey rectangle is never detected::

    risk = E_w[ exp(-integral_0^T sum_v gamma_v(x_v(t), w) dt) ]

Rates of several vehicles add inside the exponent (independent Poisson
detection processes).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import exposure_array


@dataclass(frozen=True)
class Domain:
    x_lo: float
    y_lo: float
    x_hi: float
    y_hi: float

    def __post_init__(self):
        if not (self.x_hi > self.x_lo and self.y_hi > self.y_lo):
            raise ValueError("degenerate domain: need x_lo < x_hi and y_lo < y_hi")

    @property
    def lo(self):
        return (self.x_lo, self.y_lo)

    @property
    def hi(self):
        return (self.x_hi, self.y_hi)

    @property
    def area(self) -> float:
        return (self.x_hi - self.x_lo) * (self.y_hi - self.y_lo)

    def contains(self, x, y) -> bool:
        return self.x_lo <= x <= self.x_hi and self.y_lo <= y <= self.y_hi

    def scaled(self, factor: float) -> "Domain":
        return Domain(self.x_lo * factor, self.y_lo * factor, self.x_hi * factor, self.y_hi * factor)


@dataclass
class TargetSample:
    ox: np.ndarray
    oy: np.ndarray
    seed: int

    @property
    def count_m(self) -> int:
        return self.ox.size

    @property
    def targets(self):
        from .sensor import Target

        return [Target(float(a), float(b)) for a, b in zip(self.ox, self.oy)]


@dataclass
class RiskReport:
    residual_risk: float
    std_error: float
    mission_time: float
    per_target_detection: np.ndarray = field(repr=False)


@dataclass
class CoverageGrid:
    """Detection probability at cell centers, indexed ``values[iy, ix]`` with y ascending."""

    domain: Domain
    values: np.ndarray

    @property
    def resolution(self):
        ny, nx = self.values.shape
        return nx, ny

    def cell_centers(self):
        return cell_centers(self.domain, *self.resolution)

    def to_csv(self, path):
        nx, ny = self.resolution
        d = self.domain
        with open(path, "w") as fh:
            fh.write(f"# x_lo={d.x_lo!r} y_lo={d.y_lo!r} x_hi={d.x_hi!r} y_hi={d.y_hi!r} nx={nx} ny={ny}\n")
            fh.write("# rows: y ascending from y_lo; columns: x ascending from x_lo; value: detection probability\n")
            for row in self.values:
                fh.write(",".join(f"{v:.6f}" for v in row) + "\n")

    @classmethod
    def from_csv(cls, path) -> "CoverageGrid":
        with open(path) as fh:
            meta = dict(tok.split("=") for tok in fh.readline().lstrip("# ").split())
        values = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
        d = Domain(*(float(meta[k]) for k in ("x_lo", "y_lo", "x_hi", "y_hi")))
        return cls(d, values)

    def to_pgm(self, path):
        """Binary 8-bit PGM, top row = largest y."""
        nx, ny = self.resolution
        img = np.rint(255.0 * np.clip(self.values, 0.0, 1.0)).astype(np.uint8)[::-1]
        with open(path, "wb") as fh:
            fh.write(f"P5 {nx} {ny} 255\n".encode("ascii"))
            fh.write(img.tobytes())


def sample_targets(domain: Domain, count_m: int, seed: int) -> TargetSample:
    """Uniform i.i.d. targets from an explicitly seeded PCG64 stream."""
    if count_m < 1:
        raise ValueError("count_m must be >= 1")
    if domain.area <= 0:
        raise ValueError("degenerate domain")
    rng = np.random.Generator(np.random.PCG64(seed))
    u = rng.random((count_m, 2))
    ox = domain.x_lo + (domain.x_hi - domain.x_lo) * u[:, 0]
    oy = domain.y_lo + (domain.y_hi - domain.y_lo) * u[:, 1]
    return TargetSample(ox, oy, seed)


def exposure(trajectories, target, sensors, field=None, backend=None) -> float:
    """Integrated detection rate of a single target over the mission."""
    return float(exposure_array(trajectories, [target.omega_x], [target.omega_y], sensors, field, backend)[0])


def residual_risk(trajectories, sample: TargetSample, sensors, field=None, backend=None) -> RiskReport:
    if sample.count_m < 1:
        raise ValueError("empty target sample")
    e = exposure_array(trajectories, sample.ox, sample.oy, sensors, field, backend)
    q = np.exp(-e)
    m = q.size
    std = float(np.std(q, ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    return RiskReport(
        residual_risk=float(np.mean(q)),
        std_error=std,
        mission_time=trajectories[0].mission_time,
        per_target_detection=-np.expm1(-e),
    )


def cell_centers(domain: Domain, nx: int, ny: int):
    xs = domain.x_lo + (np.arange(nx) + 0.5) * (domain.x_hi - domain.x_lo) / nx
    ys = domain.y_lo + (np.arange(ny) + 0.5) * (domain.y_hi - domain.y_lo) / ny
    return xs, ys


def coverage_grid(trajectories, resolution, sensors, domain: Domain, field=None, backend=None) -> CoverageGrid:
    nx, ny = resolution
    if nx < 2 or ny < 2:
        raise ValueError("resolution must be at least (2, 2)")
    xs, ys = cell_centers(domain, nx, ny)
    gx, gy = np.meshgrid(xs, ys)
    e = exposure_array(trajectories, gx.ravel(), gy.ravel(), sensors, field, backend)
    return CoverageGrid(domain, (-np.expm1(-e)).reshape(ny, nx))
