"""Constant-speed first-order Nomoto steering model.

State is ``(x, y, psi, r)``; the rudder deflection ``p(t)`` drives the turn
rate through ``T r' = K p - r``. Trajectories are produced with fixed-step
classical RK4 on a time grid shared with the risk quadrature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._accel import njit, resolve_backend


def wrap_angle(a):
    """Wrap to ``(-pi, pi]``."""
    return math.pi - np.mod(math.pi - np.asarray(a, dtype=float), 2.0 * math.pi)


@dataclass(frozen=True)
class VehicleState:
    x: float
    y: float
    psi: float = 0.0
    r: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.psi, self.r)):
            raise ValueError("vehicle state must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.psi, self.r])


@dataclass(frozen=True)
class VehicleParams:
    speed_v: float = 2.5
    nomoto_k: float = 5.0
    nomoto_t: float = 0.5
    rudder_limit: float = math.radians(30.0)

    def __post_init__(self):
        for name in ("speed_v", "nomoto_t", "rudder_limit"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value!r}")
        if not math.isfinite(self.nomoto_k):
            raise ValueError("nomoto_k must be finite")


class ControlSchedule:
    """Piecewise-linear rudder schedule over ``[0, T_f]``.

    A single knot at ``t=0`` describes a zero-length mission.
    """

    def __init__(self, knot_times, rudder_values):
        t = np.array(knot_times, dtype=float)
        v = np.array(rudder_values, dtype=float)
        if t.ndim != 1 or t.size == 0:
            raise ValueError("schedule needs at least one knot")
        if t.shape != v.shape:
            raise ValueError("knot_times and rudder_values differ in length")
        if t[0] != 0.0:
            raise ValueError("first knot must be at t=0")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("knot_times must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise ValueError("schedule must be finite")
        self.knot_times = t
        self.rudder_values = v

    @classmethod
    def uniform(cls, t_final: float, values) -> "ControlSchedule":
        values = np.asarray(values, dtype=float)
        if t_final <= 0:
            return cls([0.0], values[:1])
        return cls(np.linspace(0.0, t_final, values.size), values)

    @property
    def t_final(self) -> float:
        return float(self.knot_times[-1])

    def __call__(self, t):
        if self.knot_times.size == 1:
            return np.full_like(np.asarray(t, dtype=float), self.rudder_values[0])
        return np.interp(t, self.knot_times, self.rudder_values)

    def rescaled(self, t_final: float) -> "ControlSchedule":
        """Stretch knot times to a new horizon, keeping the values."""
        return ControlSchedule.uniform(t_final, self.rudder_values) if self.knot_times.size > 1 else self

    def check_bounds(self, rudder_limit: float):
        if np.any(np.abs(self.rudder_values) > rudder_limit):
            raise ValueError("rudder values exceed rudder_limit")

    def __eq__(self, other):
        return (
            isinstance(other, ControlSchedule)
            and np.array_equal(self.knot_times, other.knot_times)
            and np.array_equal(self.rudder_values, other.rudder_values)
        )

    def __repr__(self):
        return f"ControlSchedule(n={self.knot_times.size}, t_final={self.t_final:g})"


@dataclass
class Trajectory:
    """Sampled rollout. ``states`` rows are ``(x, y, psi, r)`` with psi wrapped."""

    dt: float
    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray

    def __post_init__(self):
        if self.states.shape[0] < 2:
            raise ValueError("trajectory needs at least two samples")

    def __len__(self):
        return self.times.size

    @property
    def x(self):
        return self.states[:, 0]

    @property
    def y(self):
        return self.states[:, 1]

    @property
    def psi(self):
        return self.states[:, 2]

    @property
    def r(self):
        return self.states[:, 3]

    def state(self, i: int) -> VehicleState:
        return VehicleState(*map(float, self.states[i]))

    @property
    def mission_time(self) -> float:
        return float(self.times[-1])


def state_derivative(state: VehicleState, rudder: float, params: VehicleParams):
    """Time derivative ``(dx, dy, dpsi, dr)``."""
    v = params.speed_v
    return (
        v * math.cos(state.psi),
        v * math.sin(state.psi),
        state.r,
        (params.nomoto_k * rudder - state.r) / params.nomoto_t,
    )


def rk4_step(state: VehicleState, schedule: ControlSchedule, t: float, dt: float, params: VehicleParams):
    if dt <= 0:
        raise ValueError("dt must be positive")
    p0, pm, p1 = (float(u) for u in schedule(np.array([t, t + 0.5 * dt, t + dt])))
    s = state.as_array()
    out = _rk4_single(s[0], s[1], s[2], s[3], dt, p0, pm, p1, params.speed_v, params.nomoto_k, params.nomoto_t)
    return VehicleState(out[0], out[1], float(wrap_angle(out[2])), out[3])


def _deriv(psi, r, p, v, k, tc):
    return v * math.cos(psi), v * math.sin(psi), r, (k * p - r) / tc


def _rk4_single(x, y, psi, r, h, p0, pm, p1, v, k, tc):
    k1 = _deriv(psi, r, p0, v, k, tc)
    k2 = _deriv(psi + 0.5 * h * k1[2], r + 0.5 * h * k1[3], pm, v, k, tc)
    k3 = _deriv(psi + 0.5 * h * k2[2], r + 0.5 * h * k2[3], pm, v, k, tc)
    k4 = _deriv(psi + h * k3[2], r + h * k3[3], p1, v, k, tc)
    w = h / 6.0
    return (
        x + w * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y + w * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        psi + w * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
        r + w * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3]),
    )


@njit
def _rollout_numba(x0, steps, p_start, p_mid, p_end, v, k, tc):
    n = steps.size
    out = np.empty((n + 1, 4))
    out[0, :] = x0
    x, y, psi, r = x0[0], x0[1], x0[2], x0[3]
    for i in range(n):
        h = steps[i]
        c, s = math.cos(psi), math.sin(psi)
        k1 = (v * c, v * s, r, (k * p_start[i] - r) / tc)
        psi2 = psi + 0.5 * h * k1[2]
        r2 = r + 0.5 * h * k1[3]
        k2 = (v * math.cos(psi2), v * math.sin(psi2), r2, (k * p_mid[i] - r2) / tc)
        psi3 = psi + 0.5 * h * k2[2]
        r3 = r + 0.5 * h * k2[3]
        k3 = (v * math.cos(psi3), v * math.sin(psi3), r3, (k * p_mid[i] - r3) / tc)
        psi4 = psi + h * k3[2]
        r4 = r + h * k3[3]
        k4 = (v * math.cos(psi4), v * math.sin(psi4), r4, (k * p_end[i] - r4) / tc)
        w = h / 6.0
        x = x + w * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        y = y + w * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        psi = psi + w * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
        r = r + w * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3])
        out[i + 1, 0] = x
        out[i + 1, 1] = y
        out[i + 1, 2] = psi
        out[i + 1, 3] = r
    return out


def _rollout_python(x0, steps, p_start, p_mid, p_end, v, k, tc):
    out = np.empty((steps.size + 1, 4))
    out[0] = x0
    s = tuple(float(u) for u in x0)
    for i, h in enumerate(steps):
        s = _rk4_single(*s, h, p_start[i], p_mid[i], p_end[i], v, k, tc)
        out[i + 1] = s
    return out


def time_grid(t_final: float, dt: float) -> np.ndarray:
    """``0, dt, 2dt, ...`` up to ``t_final``; the last step is shortened if needed."""
    if t_final <= 0:
        return np.zeros(2)
    if dt <= 0:
        raise ValueError("dt must be positive")
    n = int(math.floor(t_final / dt + 1e-9))
    times = np.arange(n + 1) * dt
    if t_final - times[-1] > 1e-9 * max(t_final, 1.0):
        times = np.append(times, t_final)
    else:
        times[-1] = t_final
    return times


def rollout(
    initial: VehicleState,
    schedule: ControlSchedule,
    dt: float,
    params: VehicleParams,
    backend=None,
) -> Trajectory:
    """Integrate the steering model over the schedule horizon."""
    if schedule is None or schedule.knot_times.size == 0:
        raise ValueError("empty schedule")
    times = time_grid(schedule.t_final, dt)
    steps = np.diff(times)
    p_start = schedule(times[:-1])
    p_mid = schedule(times[:-1] + 0.5 * steps)
    p_end = schedule(times[1:])
    x0 = initial.as_array()
    args = (x0, steps, p_start, p_mid, p_end, params.speed_v, params.nomoto_k, params.nomoto_t)
    if resolve_backend(backend) == "numba":
        states = _rollout_numba(*args)
    else:
        states = _rollout_python(*args)
    states[:, 2] = wrap_angle(states[:, 2])
    return Trajectory(dt=float(dt) if schedule.t_final > 0 else 0.0, times=times, states=states, controls=schedule(times))



def _rk4_adjoint(states, steps, p_start, p_mid, p_end, v, k, tc, seeds):
    """Reverse sweep through the rollout's RK4 stages.

    ``seeds[i]`` is the direct gradient of the objective w.r.t. ``states[i]``.
    Returns gradients w.r.t. the rudder samples at step start, midpoint and end.
    """
    n = steps.size
    g0 = np.zeros(n)
    gm = np.zeros(n)
    g1 = np.zeros(n)
    ax, ay, ap, ar = seeds[n, 0], seeds[n, 1], seeds[n, 2], seeds[n, 3]
    kt = k / tc
    for i in range(n - 1, -1, -1):
        h = steps[i]
        psi = states[i, 2]
        r = states[i, 3]
        # rebuild stage values
        k1r = (k * p_start[i] - r) / tc
        psi2 = psi + 0.5 * h * r
        r2 = r + 0.5 * h * k1r
        k2r = (k * p_mid[i] - r2) / tc
        psi3 = psi + 0.5 * h * r2
        r3 = r + 0.5 * h * k2r
        psi4 = psi + h * r3

        w = h / 6.0
        bx1, by1, bp1, br1 = w * ax, w * ay, w * ap, w * ar
        bx2, by2, bp2, br2 = 2.0 * bx1, 2.0 * by1, 2.0 * bp1, 2.0 * br1
        bx3, by3, bp3, br3 = bx2, by2, bp2, br2
        bx4, by4, bp4, br4 = bx1, by1, bp1, br1
        npsi = ap
        nr = ar

        spsi = v * (-math.sin(psi4) * bx4 + math.cos(psi4) * by4)
        sr = bp4 - br4 / tc
        g1[i] += kt * br4
        npsi += spsi
        nr += sr
        bp3 += h * spsi
        br3 += h * sr

        spsi = v * (-math.sin(psi3) * bx3 + math.cos(psi3) * by3)
        sr = bp3 - br3 / tc
        gm[i] += kt * br3
        npsi += spsi
        nr += sr
        bp2 += 0.5 * h * spsi
        br2 += 0.5 * h * sr

        spsi = v * (-math.sin(psi2) * bx2 + math.cos(psi2) * by2)
        sr = bp2 - br2 / tc
        gm[i] += kt * br2
        npsi += spsi
        nr += sr
        bp1 += 0.5 * h * spsi
        br1 += 0.5 * h * sr

        npsi += v * (-math.sin(psi) * bx1 + math.cos(psi) * by1)
        nr += bp1 - br1 / tc
        g0[i] += kt * br1

        ax = ax + seeds[i, 0]
        ay = ay + seeds[i, 1]
        ap = npsi + seeds[i, 2]
        ar = nr + seeds[i, 3]
    return g0, gm, g1


_rk4_adjoint_numba = njit(_rk4_adjoint)


def interp_matrix(t, knot_times) -> np.ndarray:
    """Dense matrix ``W`` with ``schedule(t) == W @ rudder_values``."""
    n = knot_times.size
    if n == 1:
        return np.ones((np.size(t), 1))
    eye = np.eye(n)
    return np.stack([np.interp(t, knot_times, eye[j]) for j in range(n)], axis=1)


def schedule_gradient(traj: Trajectory, schedule: ControlSchedule, params: VehicleParams, state_grad, backend=None):
    """Chain a gradient w.r.t. sampled states back to the schedule's knot values.

    ``state_grad`` is ``(samples, 3)`` for ``(x, y, psi)`` or ``(samples, 4)``.
    """
    times = traj.times
    steps = np.diff(times)
    seeds = np.zeros((times.size, 4))
    seeds[:, : state_grad.shape[1]] = state_grad
    mids = times[:-1] + 0.5 * steps
    args = (
        traj.states, steps, schedule(times[:-1]), schedule(mids), schedule(times[1:]),
        params.speed_v, params.nomoto_k, params.nomoto_t, seeds,
    )
    fn = _rk4_adjoint_numba if resolve_backend(backend) == "numba" else _rk4_adjoint
    g0, gm, g1 = fn(*args)
    kt = schedule.knot_times
    return (
        interp_matrix(times[:-1], kt).T @ g0
        + interp_matrix(mids, kt).T @ gm
        + interp_matrix(times[1:], kt).T @ g1
    )
