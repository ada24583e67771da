"""Forward-looking sonar detection model.

The instantaneous detection rate of a target at ``(ox, oy)`` seen from a
vehicle at ``(x, y)`` with heading ``psi`` is::

    gamma = lam * p(range) * F_alpha(bearing) * F_eps(elevation)

where ``p`` is a normal-CDF detection probability driven by the sonar figure
of merit, and ``F_alpha``/``F_eps`` are smooth two-sided logistic gates for the
horizontal and vertical fields of view.

All angles are radians. Every ``*_arrays`` helper broadcasts over numpy
arrays; the state/target wrappers are the scalar convenience API.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, ndtr

RANGE_FLOOR = 0.1  # m
RATE_FLUSH = 1e-13  # 1/s; rates bounded below this are returned as exactly 0

RANGE_METRICS = ("euclidean", "l1_paper_literal")
TL_FORMS = ("standard", "paper_literal")


@dataclass(frozen=True)
class SensorParams:
    """Sonar and detection-gate constants. Defaults are the reference survey values."""

    scan_rate_lambda: float = 20.0
    fom: float = 72.0
    sigma: float = 9.0
    atten_a: float = 5.2  # dB/km
    alpha_fov: float = math.radians(120.0)
    p_alpha: float = 25.0
    eps_fov: float = math.radians(5.0)
    eps_de: float = math.radians(-6.0)
    p_eps: float = 400.0
    height_h: float = 20.0
    range_metric: str = "euclidean"
    tl_form: str = "standard"

    def __post_init__(self):
        positive = ("scan_rate_lambda", "sigma", "alpha_fov", "eps_fov", "height_h", "p_alpha", "p_eps")
        for name in positive:
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value!r}")
        if not (math.isfinite(self.atten_a) and self.atten_a >= 0):
            raise ValueError(f"atten_a must be >= 0, got {self.atten_a!r}")
        for name in ("fom", "eps_de"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.range_metric not in RANGE_METRICS:
            raise ValueError(f"range_metric must be one of {RANGE_METRICS}")
        if self.tl_form not in TL_FORMS:
            raise ValueError(f"tl_form must be one of {TL_FORMS}")

    def rate(self, x, y, psi, ox, oy):
        """Vectorized detection rate; this is the hook the risk integrator calls."""
        return gamma_arrays(x, y, psi, ox, oy, self)

    def as_array(self) -> np.ndarray:
        """Pack into the flat float layout the compiled kernels expect."""
        return np.array(
            [
                self.scan_rate_lambda,
                self.fom,
                self.sigma,
                self.atten_a,
                self.alpha_fov,
                self.p_alpha,
                self.eps_fov,
                self.eps_de,
                self.p_eps,
                self.height_h,
                float(RANGE_METRICS.index(self.range_metric)),
                float(TL_FORMS.index(self.tl_form)),
            ]
        )


@dataclass(frozen=True)
class Target:
    omega_x: float
    omega_y: float

    def __post_init__(self):
        if not (math.isfinite(self.omega_x) and math.isfinite(self.omega_y)):
            raise ValueError("target coordinates must be finite")


def slant_range_arrays(x, y, ox, oy, metric="euclidean"):
    dx = np.asarray(ox) - x
    dy = np.asarray(oy) - y
    if metric == "l1_paper_literal":
        rng = np.abs(dx) + np.abs(dy)
    else:
        rng = np.hypot(dx, dy)
    return np.maximum(rng, RANGE_FLOOR)


def transmission_loss(range_m, atten_a=5.2, tl_form="standard"):
    """Spherical spreading plus absorption, in dB.

    ``atten_a`` is in dB/km. ``tl_form="paper_literal"`` evaluates
    ``20 log10(r + a r)`` instead.
    """
    r = np.asarray(range_m, dtype=float)
    if np.any(r <= 0):
        raise ValueError("range must be positive")
    if tl_form == "paper_literal":
        out = 20.0 * np.log10(r * (1.0 + atten_a))
    elif tl_form == "standard":
        out = 20.0 * np.log10(r) + atten_a * r / 1000.0
    else:
        raise ValueError(f"unknown tl_form {tl_form!r}")
    return out[()] if out.ndim == 0 else out


def detect_prob_arrays(x, y, ox, oy, params: SensorParams):
    rng = slant_range_arrays(x, y, ox, oy, params.range_metric)
    tl = transmission_loss(rng, params.atten_a, params.tl_form)
    return ndtr((params.fom - tl) / params.sigma)


def bearing_arrays(x, y, psi, ox, oy):
    """Body-frame bearing: 0 dead ahead, +pi/2 to port (left of the heading)."""
    ddx = np.asarray(ox) - x
    ddy = np.asarray(oy) - y
    c, s = np.cos(psi), np.sin(psi)
    along = ddx * c + ddy * s
    across = -ddx * s + ddy * c
    return np.arctan2(across, along)


def window_gate(angle, center, width, slope):
    """Two logistic edges at ``center -/+ width/2``; ~1 inside, ~0 outside.

    Written as ``expit(b) - expit(-a)`` which equals
    ``expit(a) + expit(b) - 1`` without the cancellation error.
    """
    half = 0.5 * width
    a = slope * (angle - center + half)
    b = slope * (center + half - angle)
    return expit(b) - expit(-a)


def f_alpha_arrays(x, y, psi, ox, oy, params: SensorParams):
    return window_gate(bearing_arrays(x, y, psi, ox, oy), 0.0, params.alpha_fov, params.p_alpha)


def elevation_arrays(x, y, ox, oy, params: SensorParams):
    rng = slant_range_arrays(x, y, ox, oy, params.range_metric)
    return np.arctan(-params.height_h / rng)


def f_eps_arrays(x, y, ox, oy, params: SensorParams):
    eps = elevation_arrays(x, y, ox, oy, params)
    return window_gate(eps, params.eps_de, params.eps_fov, params.p_eps)


def gamma_arrays(x, y, psi, ox, oy, params: SensorParams):
    p = detect_prob_arrays(x, y, ox, oy, params)
    fa = f_alpha_arrays(x, y, psi, ox, oy, params)
    fe = f_eps_arrays(x, y, ox, oy, params)
    bound = params.scan_rate_lambda * fe
    flushed = (bound < RATE_FLUSH) | (bound * fa < RATE_FLUSH)
    return np.where(flushed, 0.0, bound * fa * p)


# --- state/target API ----------------------------------------------------


def detect_prob_p(state, target: Target, params: SensorParams) -> float:
    """Normal-CDF detection probability ``Phi((FOM - TL) / sigma)``."""
    return float(detect_prob_arrays(state.x, state.y, target.omega_x, target.omega_y, params))


def bearing_alpha_b(state, target: Target) -> float:
    return float(bearing_arrays(state.x, state.y, state.psi, target.omega_x, target.omega_y))


def f_alpha(state, target: Target, params: SensorParams) -> float:
    return float(f_alpha_arrays(state.x, state.y, state.psi, target.omega_x, target.omega_y, params))


def elevation_eps_b(state, target: Target, params: SensorParams) -> float:
    return float(elevation_arrays(state.x, state.y, target.omega_x, target.omega_y, params))


def f_eps(state, target: Target, params: SensorParams) -> float:
    return float(f_eps_arrays(state.x, state.y, target.omega_x, target.omega_y, params))


def gamma_rate(state, target: Target, params: SensorParams) -> float:
    """Instantaneous detection rate in 1/s, clamped to ``[0, lambda]``."""
    return float(gamma_arrays(state.x, state.y, state.psi, target.omega_x, target.omega_y, params))


def _dexpit(u):
    e = expit(u)
    return e * (1.0 - e)


def gamma_and_grad_arrays(x, y, psi, ox, oy, params: SensorParams):
    """Rate and its partials with respect to vehicle ``x``, ``y`` and ``psi``.

    Returns ``(g, dg_dx, dg_dy, dg_dpsi)``. Flushed rates have zero gradient.
    """
    ox = np.asarray(ox, dtype=float)
    oy = np.asarray(oy, dtype=float)
    dx = ox - x
    dy = oy - y
    if params.range_metric == "l1_paper_literal":
        raw = np.abs(dx) + np.abs(dy)
        drx, dry = -np.sign(dx), -np.sign(dy)
    else:
        raw = np.hypot(dx, dy)
        safe = np.where(raw > 0, raw, 1.0)
        drx, dry = -dx / safe, -dy / safe
    floored = raw < RANGE_FLOOR
    rng = np.where(floored, RANGE_FLOOR, raw)
    drx = np.where(floored, 0.0, drx)
    dry = np.where(floored, 0.0, dry)

    h, pe, pa = params.height_h, params.p_eps, params.p_alpha
    eps = np.arctan(-h / rng)
    he = 0.5 * params.eps_fov
    ue1 = pe * (params.eps_de + he - eps)
    ue2 = -pe * (eps - params.eps_de + he)
    fe = expit(ue1) - expit(ue2)
    dfe = (-pe * _dexpit(ue1) + pe * _dexpit(ue2)) * h / (rng * rng + h * h)

    c, s = np.cos(psi), np.sin(psi)
    alpha = np.arctan2(-dx * s + dy * c, dx * c + dy * s)
    ha = 0.5 * params.alpha_fov
    ua1 = pa * (ha - alpha)
    ua2 = -pa * (alpha + ha)
    fa = expit(ua1) - expit(ua2)
    dfa = -pa * _dexpit(ua1) + pa * _dexpit(ua2)
    r2 = dx * dx + dy * dy
    r2 = np.where(r2 > 0, r2, np.inf)
    dax, day = dy / r2, -dx / r2

    if params.tl_form == "paper_literal":
        tl = 20.0 * np.log10(rng * (1.0 + params.atten_a))
        dtl = 20.0 / (rng * math.log(10.0))
    else:
        tl = 20.0 * np.log10(rng) + params.atten_a * rng / 1000.0
        dtl = 20.0 / (rng * math.log(10.0)) + params.atten_a / 1000.0
    z = (params.fom - tl) / params.sigma
    p = ndtr(z)
    dp = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi) * (-dtl / params.sigma)

    lam = params.scan_rate_lambda
    bound = lam * fe
    flushed = (bound < RATE_FLUSH) | (bound * fa < RATE_FLUSH)
    g = np.where(flushed, 0.0, bound * fa * p)
    dg_drng = lam * fa * (dp * fe + p * dfe)
    dg_dalpha = lam * p * fe * dfa
    gx = np.where(flushed, 0.0, dg_drng * drx + dg_dalpha * dax)
    gy = np.where(flushed, 0.0, dg_drng * dry + dg_dalpha * day)
    gpsi = np.where(flushed, 0.0, -dg_dalpha)
    return g, gx, gy, gpsi
