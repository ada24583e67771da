"""Exposure kernels: time-integrated detection rate per target.

The numba kernel loops targets in parallel (one independent accumulator per
target, fixed summation order), so results do not depend on the thread
count. The numpy kernel vectorizes over targets and loops over time in the
same order; it also accepts arbitrary sensor objects exposing ``rate``.
"""
from __future__ import annotations

import math

import numpy as np

from ._accel import njit, prange, resolve_backend
from .seabed import (
    DOM_FORMS,
    _band,
    _diagonal_offset,
    ripple_gain,
    ripple_gain_derivative,
    soft_rect,
    triangle_blend,
)
from .sensor import RANGE_FLOOR, RATE_FLUSH, SensorParams, gamma_and_grad_arrays

def trapezoid_weights(times: np.ndarray) -> np.ndarray:
    h = np.diff(times)
    w = np.zeros(times.size)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w


def dom_factors(ox, oy, field):
    """Split the ripple gate as ``A(target) * gain(heading) + B(target)``."""
    if field.dom_form == DOM_FORMS[1]:
        k = field.edge_sharpness
        d = _diagonal_offset(ox, oy, field)
        yh = field.domain_hi[1]
        ax = _band(ox, field.domain_lo[0], field.domain_hi[0], k)
        upper = 0.5 * (np.tanh(k * d) - np.tanh(k * (oy - yh)))
        return ax * upper, ax * (-upper)
    rect = soft_rect(ox, oy, field)
    s = triangle_blend(ox, oy, field)
    return rect * s, rect * (1.0 - s)


@njit
def _expit(z):
    return 1.0 / (1.0 + math.exp(-z))


@njit
def _fls_rate(x, y, c, s, ox, oy, sp):
    lam, fom, sigma, atten, afov, palpha, efov, ede, peps, h = (
        sp[0], sp[1], sp[2], sp[3], sp[4], sp[5], sp[6], sp[7], sp[8], sp[9])
    dx = ox - x
    dy = oy - y
    if sp[10] == 1.0:
        rng = abs(dx) + abs(dy)
    else:
        rng = math.sqrt(dx * dx + dy * dy)
    if rng < RANGE_FLOOR:
        rng = RANGE_FLOOR
    # cheapest gate first; flush negligible rates before the costly terms
    eps = math.atan(-h / rng)
    he = 0.5 * efov
    fe = _expit(peps * (ede + he - eps)) - _expit(-peps * (eps - ede + he))
    bound = lam * fe
    if bound < RATE_FLUSH:
        return 0.0
    along = dx * c + dy * s
    across = -dx * s + dy * c
    alpha = math.atan2(across, along)
    ha = 0.5 * afov
    fa = _expit(palpha * (ha - alpha)) - _expit(-palpha * (alpha + ha))
    bound *= fa
    if bound < RATE_FLUSH:
        return 0.0
    if sp[11] == 1.0:
        tl = 20.0 * math.log10(rng * (1.0 + atten))
    else:
        tl = 20.0 * math.log10(rng) + atten * rng / 1000.0
    p = 0.5 * math.erfc(-(fom - tl) / sigma * 0.7071067811865476)
    return bound * p


@njit(parallel=True)
def _exposure_numba(xs, ys, cs, ss, weights, sps, gains, dom_a, dom_b, gated, ox, oy, cap):
    nv, nk = xs.shape
    nm = ox.size
    out = np.empty(nm)
    for m in prange(nm):
        total = 0.0
        for v in range(nv):
            # each vehicle's integral is summed on its own, then added: rates combine linearly
            sp = sps[v]
            acc = 0.0
            for k in range(nk):
                if total + acc > cap:
                    break
                w = weights[k]
                if w == 0.0:
                    continue
                g = _fls_rate(xs[v, k], ys[v, k], cs[v, k], ss[v, k], ox[m], oy[m], sp)
                if gated:
                    g = g * (dom_a[m] * gains[v, k] + dom_b[m])
                    if g < 0.0:
                        g = 0.0
                acc += w * g
            total += acc
            if total > cap:
                break
        out[m] = total
    return out


def _exposure_numpy(trajectories, weights, sensors, field, ox, oy, cap, block_elems=1 << 18):
    """Blocks of time steps are evaluated at once; sums run in a fixed order (no BLAS)."""
    total = np.zeros(ox.size)
    if field is not None:
        dom_a, dom_b = dom_factors(ox, oy, field)
    capped = math.isfinite(cap)
    live = np.arange(ox.size)
    nk = weights.size
    block = max(1, block_elems // max(ox.size, 1))  # fixed, so capping never regroups the sums
    for traj, sensor in zip(trajectories, sensors):
        gains = ripple_gain(traj.psi, field) if field is not None else None
        acc = np.zeros(ox.size)
        k = 0
        while k < nk:
            if capped:
                live = live[total[live] + acc[live] <= cap]
            if live.size == 0:
                break
            sl = slice(k, min(nk, k + block))
            k = sl.stop
            g = sensor.rate(traj.x[sl, None], traj.y[sl, None], traj.psi[sl, None], ox[None, live], oy[None, live])
            if field is not None:
                g = np.maximum(0.0, g * (dom_a[live] * gains[sl, None] + dom_b[live]))
            acc[live] += np.sum(weights[sl, None] * g, axis=0)
        total += acc
    return total


def check_grids(trajectories):
    if not trajectories:
        raise ValueError("no trajectories")
    t0 = trajectories[0].times
    for tr in trajectories[1:]:
        if tr.times.shape != t0.shape or not np.array_equal(tr.times, t0):
            raise ValueError("trajectories must share the same time grid")
    return t0


def exposure_array(trajectories, ox, oy, sensors, field=None, backend=None, cap=math.inf) -> np.ndarray:
    """Trapezoid-rule integral of the summed (gated) detection rates, one value per target.

    With a finite ``cap``, accumulation for a target stops once its exposure
    exceeds ``cap``; the returned value is then a lower bound above ``cap``.
    """
    times = check_grids(trajectories)
    if len(sensors) != len(trajectories):
        raise ValueError("need one sensor per trajectory")
    ox = np.ascontiguousarray(ox, dtype=float)
    oy = np.ascontiguousarray(oy, dtype=float)
    weights = trapezoid_weights(times)
    fls = all(isinstance(s, SensorParams) for s in sensors)
    if resolve_backend(backend) == "numpy" or not fls:
        return _exposure_numpy(trajectories, weights, sensors, field, ox, oy, cap)
    xs = np.ascontiguousarray(np.stack([t.x for t in trajectories]))
    ys = np.ascontiguousarray(np.stack([t.y for t in trajectories]))
    psis = np.stack([t.psi for t in trajectories])
    sps = np.stack([s.as_array() for s in sensors])
    if field is not None:
        gains = np.ascontiguousarray(ripple_gain(psis, field))
        dom_a, dom_b = dom_factors(ox, oy, field)
    else:
        gains = np.zeros_like(psis)
        dom_a = dom_b = np.zeros(ox.size)
    return _exposure_numba(
        xs, ys, np.cos(psis), np.sin(psis), weights, sps, gains,
        np.ascontiguousarray(dom_a), np.ascontiguousarray(dom_b), field is not None, ox, oy, float(cap),
    )



@njit
def _dexpit(u):
    e = 1.0 / (1.0 + math.exp(-u))
    return e * (1.0 - e)


@njit
def _fls_rate_grad(x, y, c, s, ox, oy, sp):
    """Rate and partials in ``(x, y, psi)``; mirrors ``_fls_rate`` term by term."""
    lam, fom, sigma, atten, afov, palpha, efov, ede, peps, h = (
        sp[0], sp[1], sp[2], sp[3], sp[4], sp[5], sp[6], sp[7], sp[8], sp[9])
    dx = ox - x
    dy = oy - y
    if sp[10] == 1.0:
        rng = abs(dx) + abs(dy)
        drx = -1.0 if dx > 0 else (1.0 if dx < 0 else 0.0)
        dry = -1.0 if dy > 0 else (1.0 if dy < 0 else 0.0)
    else:
        rng = math.sqrt(dx * dx + dy * dy)
        drx = -dx / rng if rng > 0 else 0.0
        dry = -dy / rng if rng > 0 else 0.0
    if rng < RANGE_FLOOR:
        rng = RANGE_FLOOR
        drx = 0.0
        dry = 0.0
    eps = math.atan(-h / rng)
    he = 0.5 * efov
    ue1 = peps * (ede + he - eps)
    ue2 = -peps * (eps - ede + he)
    fe = _expit(ue1) - _expit(ue2)
    bound = lam * fe
    if bound < RATE_FLUSH:
        return 0.0, 0.0, 0.0, 0.0
    along = dx * c + dy * s
    across = -dx * s + dy * c
    alpha = math.atan2(across, along)
    ha = 0.5 * afov
    ua1 = palpha * (ha - alpha)
    ua2 = -palpha * (alpha + ha)
    fa = _expit(ua1) - _expit(ua2)
    if bound * fa < RATE_FLUSH:
        return 0.0, 0.0, 0.0, 0.0
    dfe = (-peps * _dexpit(ue1) + peps * _dexpit(ue2)) * h / (rng * rng + h * h)
    dfa = -palpha * _dexpit(ua1) + palpha * _dexpit(ua2)
    r2 = dx * dx + dy * dy
    dax = dy / r2 if r2 > 0 else 0.0
    day = -dx / r2 if r2 > 0 else 0.0
    if sp[11] == 1.0:
        tl = 20.0 * math.log10(rng * (1.0 + atten))
        dtl = 20.0 / (rng * math.log(10.0))
    else:
        tl = 20.0 * math.log10(rng) + atten * rng / 1000.0
        dtl = 20.0 / (rng * math.log(10.0)) + atten / 1000.0
    z = (fom - tl) / sigma
    p = 0.5 * math.erfc(-z * 0.7071067811865476)
    dp = math.exp(-0.5 * z * z) * 0.3989422804014327 * (-dtl / sigma)
    g = bound * fa * p
    dg_drng = lam * fa * (dp * fe + p * dfe)
    dg_dalpha = lam * p * fe * dfa
    return g, dg_drng * drx + dg_dalpha * dax, dg_drng * dry + dg_dalpha * day, -dg_dalpha


@njit(parallel=True)
def _state_seeds_numba(xs, ys, cs, ss, weights, sps, gains, dgains, dom_a, dom_b, gated, ox, oy, qw, qmin):
    nv, nk = xs.shape
    nm = ox.size
    out = np.zeros((nv, nk, 3))
    for j in prange(nv * nk):
        v = j // nk
        k = j % nk
        w = weights[k]
        if w == 0.0:
            continue
        sp = sps[v]
        ax = 0.0
        ay = 0.0
        ap = 0.0
        for m in range(nm):
            if qw[m] < qmin:
                continue
            g, gx, gy, gp = _fls_rate_grad(xs[v, k], ys[v, k], cs[v, k], ss[v, k], ox[m], oy[m], sp)
            if g == 0.0:
                continue
            if gated:
                d = dom_a[m] * gains[v, k] + dom_b[m]
                if g * d <= 0.0:
                    continue
                gp = gp * d + g * dom_a[m] * dgains[v, k]
                gx = gx * d
                gy = gy * d
            ax += qw[m] * gx
            ay += qw[m] * gy
            ap += qw[m] * gp
        out[v, k, 0] = -w * ax
        out[v, k, 1] = -w * ay
        out[v, k, 2] = -w * ap
    return out


def _state_seeds_numpy(trajectories, weights, sensors, field, ox, oy, qw, qmin):
    out = np.zeros((len(trajectories), len(trajectories[0]), 3))
    keep = qw >= qmin
    ox, oy, qw = ox[keep], oy[keep], qw[keep]
    if field is not None:
        dom_a, dom_b = dom_factors(ox, oy, field)
    for v, (traj, sensor) in enumerate(zip(trajectories, sensors)):
        if field is not None:
            gains = ripple_gain(traj.psi, field)
            dgains = ripple_gain_derivative(traj.psi, field)
        for k in range(len(traj)):
            w = weights[k]
            if w == 0.0:
                continue
            g, gx, gy, gp = gamma_and_grad_arrays(traj.x[k], traj.y[k], traj.psi[k], ox, oy, sensor)
            if field is not None:
                d = dom_a * gains[k] + dom_b
                live = g * d > 0.0
                gp = np.where(live, gp * d + g * dom_a * dgains[k], 0.0)
                gx = np.where(live, gx * d, 0.0)
                gy = np.where(live, gy * d, 0.0)
            out[v, k] = -w * np.array([qw @ gx, qw @ gy, qw @ gp])
    return out


def risk_state_gradient(trajectories, ox, oy, sensors, field=None, backend=None, cap=math.inf):
    """Mean non-detection ``mean(exp(-E))`` and its gradient w.r.t. every sampled ``(x, y, psi)``.

    Returns ``(risk, exposure, grad)`` with ``grad`` shaped ``(vehicles, samples, 3)``.
    Targets whose exposure exceeds ``cap`` are dropped from the gradient.
    Only sonar-model sensors are supported.
    """
    if not all(isinstance(s, SensorParams) for s in sensors):
        raise TypeError("analytic gradient needs SensorParams sensors")
    ox = np.ascontiguousarray(ox, dtype=float)
    oy = np.ascontiguousarray(oy, dtype=float)
    e = exposure_array(trajectories, ox, oy, sensors, field, backend, cap)
    q = np.exp(-e)
    qw = q / q.size
    qmin = math.exp(-cap) / q.size if math.isfinite(cap) else 0.0
    weights = trapezoid_weights(trajectories[0].times)
    if resolve_backend(backend) == "numpy":
        grad = _state_seeds_numpy(trajectories, weights, sensors, field, ox, oy, qw, qmin)
        return float(np.mean(q)), e, grad
    psis = np.stack([t.psi for t in trajectories])
    if field is not None:
        gains = ripple_gain(psis, field)
        dgains = ripple_gain_derivative(psis, field)
        dom_a, dom_b = dom_factors(ox, oy, field)
    else:
        gains = dgains = np.zeros_like(psis)
        dom_a = dom_b = np.zeros(ox.size)
    grad = _state_seeds_numba(
        np.ascontiguousarray(np.stack([t.x for t in trajectories])),
        np.ascontiguousarray(np.stack([t.y for t in trajectories])),
        np.cos(psis), np.sin(psis), weights,
        np.stack([s.as_array() for s in sensors]),
        np.ascontiguousarray(gains), np.ascontiguousarray(dgains),
        np.ascontiguousarray(dom_a), np.ascontiguousarray(dom_b),
        field is not None, ox, oy, qw, qmin,
    )
    return float(np.mean(q)), e, grad
