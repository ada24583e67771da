"""Minimum-time planning under a residual-risk constraint.

The free-final-time problem is split in two levels:

* ``inner_minimize_risk`` fixes the mission time and minimizes the Monte Carlo
  risk estimate over all vehicles' rudder knots (bound-constrained L-BFGS-B,
  common random numbers so the objective is deterministic);
* ``outer_min_time`` bisects the mission time against the (monotone) map from
  time to the smallest achievable risk.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .dynamics import ControlSchedule, rollout, schedule_gradient
from .kernels import exposure_array, risk_state_gradient
from .risk import RiskReport, residual_risk
from .sensor import SensorParams

log = logging.getLogger(__name__)

# targets past this exposure contribute < 2e-22 to the risk; the objective stops integrating them
EXPOSURE_CAP = 50.0


class OptimizationError(RuntimeError):
    pass


class InfeasibleBracket(OptimizationError):
    pass


@dataclass
class OptimizationConfig:
    risk_threshold_rho: float = 0.1
    knots_n: int = 48
    max_inner_iters: int = 200
    gradient_step: float = 1e-4  # rad, finite-difference step
    time_bracket: tuple = (100.0, 4000.0)
    time_tolerance: float = 5.0
    restarts: int = 0
    seed: int = 0
    gradient: str = "adjoint"
    gradient_tolerance: float = 1e-6
    confine_to_domain: bool = False
    confine_weight: float = 1e-4

    def __post_init__(self):
        if not 0.0 < self.risk_threshold_rho < 1.0:
            raise ValueError("risk_threshold must be in (0, 1)")
        if self.knots_n < 2:
            raise ValueError("knots_n must be >= 2")
        lo, hi = self.time_bracket
        if not 0.0 <= lo < hi:
            raise ValueError("time_bracket needs 0 <= T_lo < T_hi")
        if self.time_tolerance <= 0:
            raise ValueError("time_tolerance must be positive")
        if self.max_inner_iters < 1 or self.restarts < 0:
            raise ValueError("max_inner_iters must be >= 1 and restarts >= 0")
        if self.gradient not in ("adjoint", "fd"):
            raise ValueError("gradient must be 'adjoint' or 'fd'")
        if self.gradient_step <= 0:
            raise ValueError("gradient_step must be positive")


@dataclass
class PlanResult:
    mission_time: float
    schedules: list
    achieved_risk: float
    inner_iterations: int
    wall_clock: float
    history: list = field(default_factory=list)  # (T, min risk, feasible) per outer iterate


class RiskObjective:
    """Risk estimate at a fixed horizon as a function of the stacked knot values."""

    def __init__(self, scenario, t_final, sample, field=None, backend=None):
        self.scenario = scenario
        self.t_final = float(t_final)
        self.sample = sample
        self.field = field
        self.backend = backend
        self.vehicles = scenario.world_vehicles()
        self.sensors = [v.sensor for v in self.vehicles]
        self.domain = scenario.world_domain()
        self.dt = scenario.step_for(self.t_final)
        self.n = scenario.opt.knots_n
        self.evaluations = 0
        limits = np.repeat([v.params.rudder_limit for v in self.vehicles], self.n)
        self.lower, self.upper = -limits, limits

    def schedules(self, z):
        z = np.asarray(z, dtype=float).reshape(len(self.vehicles), self.n)
        return [ControlSchedule.uniform(self.t_final, row) for row in z]

    def trajectories(self, z):
        return [
            rollout(v.initial, s, self.dt, v.params, backend=self.backend)
            for v, s in zip(self.vehicles, self.schedules(z))
        ]

    def _penalty(self, trajectories):
        if not self.scenario.opt.confine_to_domain:
            return 0.0, None
        d = self.domain
        w = self.scenario.opt.confine_weight / max(self.t_final, 1e-12)
        total, grads = 0.0, []
        for tr in trajectories:
            ex = np.maximum(d.x_lo - tr.x, 0.0) - np.maximum(tr.x - d.x_hi, 0.0)
            ey = np.maximum(d.y_lo - tr.y, 0.0) - np.maximum(tr.y - d.y_hi, 0.0)
            wt = w * np.gradient(tr.times) if tr.times[-1] > 0 else np.zeros_like(tr.times)
            total += float(np.sum(wt * (ex * ex + ey * ey)))
            grads.append(np.stack([-2.0 * wt * ex, -2.0 * wt * ey], axis=1))
        return total, grads

    def __call__(self, z) -> float:
        self.evaluations += 1
        trajs = self.trajectories(z)
        e = exposure_array(trajs, self.sample.ox, self.sample.oy, self.sensors, self.field, self.backend, EXPOSURE_CAP)
        value = float(np.mean(np.exp(-e))) + self._penalty(trajs)[0]
        if not math.isfinite(value):
            raise OptimizationError(f"non-finite objective at T={self.t_final}: z={np.asarray(z).tolist()}")
        return value

    def risk(self, z) -> float:
        trajs = self.trajectories(z)
        e = exposure_array(trajs, self.sample.ox, self.sample.oy, self.sensors, self.field, self.backend)
        return float(np.mean(np.exp(-e)))

    @property
    def analytic(self) -> bool:
        return self.scenario.opt.gradient == "adjoint" and all(isinstance(s, SensorParams) for s in self.sensors)

    def value_and_grad(self, z):
        if not self.analytic:
            f0 = self(z)
            return f0, self.fd_gradient(z, f0)
        self.evaluations += 1
        scheds = self.schedules(z)
        trajs = self.trajectories(z)
        risk, _, sgrad = risk_state_gradient(
            trajs, self.sample.ox, self.sample.oy, self.sensors, self.field, self.backend, EXPOSURE_CAP
        )
        pen, pgrads = self._penalty(trajs)
        parts = []
        for i, (tr, s, v) in enumerate(zip(trajs, scheds, self.vehicles)):
            g = sgrad[i]
            if pgrads is not None:
                g = g.copy()
                g[:, :2] += pgrads[i]
            parts.append(schedule_gradient(tr, s, v.params, g, backend=self.backend))
        value = risk + pen
        if not math.isfinite(value):
            raise OptimizationError(f"non-finite objective at T={self.t_final}: z={np.asarray(z).tolist()}")
        return value, np.concatenate(parts)

    def fd_gradient(self, z, f0=None, central=False):
        """Projected finite differences: steps that would leave the box go the other way."""
        z = np.asarray(z, dtype=float)
        h = self.scenario.opt.gradient_step
        f0 = self(z) if f0 is None else f0
        g = np.empty_like(z)
        for j in range(z.size):
            zp = z.copy()
            if central:
                zm = z.copy()
                zp[j] += h
                zm[j] -= h
                g[j] = (self(zp) - self(zm)) / (2.0 * h)
                continue
            step = h if z[j] + h <= self.upper[j] else -h
            zp[j] += step
            g[j] = (self(zp) - f0) / step
        return g


def boustrophedon_seed(n, t_final, params, phase=1.0, leg_knots=3):
    """Alternating-sign rudder pulses: straight legs joined by half turns."""
    values = np.zeros(n)
    if t_final <= 0 or n < 3:
        return values
    spacing = t_final / (n - 1)
    # a triangular pulse of height a over one knot spacing turns the heading by ~K*a*spacing
    amp = min(math.pi / (abs(params.nomoto_k) * spacing + 1e-12), params.rudder_limit)
    sign = phase
    for j in range(leg_knots, n - 1, leg_knots + 1):
        values[j] = sign * amp
        sign = -sign
    return values


def initial_guesses(scenario, t_final):
    """Deterministic seed plus ``restarts`` random perturbations of it."""
    vehicles = scenario.world_vehicles()
    n = scenario.opt.knots_n
    base = np.concatenate(
        [boustrophedon_seed(n, t_final, v.params, phase=(-1.0) ** i) for i, v in enumerate(vehicles)]
    )
    limits = np.repeat([v.params.rudder_limit for v in vehicles], n)
    rng = np.random.default_rng([scenario.opt.seed, 7])
    guesses = [base]
    for _ in range(scenario.opt.restarts):
        guesses.append(np.clip(base + rng.normal(0.0, 0.3, base.size) * limits, -limits, limits))
    return guesses


def inner_minimize_risk(scenario, t_fixed, init, sample=None, field="scenario", backend=None):
    """Locally minimize the risk estimate at a fixed mission time.

    ``init`` is a list of :class:`ControlSchedule` (one per vehicle) or a stacked
    knot vector. Returns ``(schedules, risk, iterations)``; the risk never exceeds
    that of ``init``.
    """
    if t_fixed <= 0:
        raise ValueError("t_fixed must be positive")
    sample = sample if sample is not None else scenario.opt_sample()
    fld = scenario.field if field == "scenario" else field
    obj = RiskObjective(scenario, t_fixed, sample, fld, backend)
    if isinstance(init, np.ndarray):
        z0 = init.astype(float)
    else:
        z0 = np.concatenate([s.rescaled(t_fixed).rudder_values if s.knot_times.size == obj.n
                             else ControlSchedule.uniform(t_fixed, s(np.linspace(0, s.t_final, obj.n))).rudder_values
                             for s in init])
    z0 = np.clip(z0, obj.lower, obj.upper)
    f0, g0 = obj.value_and_grad(z0)
    opt = scenario.opt
    if not np.any(g0):
        return obj.schedules(z0), obj.risk(z0), 0
    res = minimize(
        obj.value_and_grad,
        z0,
        jac=True,
        method="L-BFGS-B",
        bounds=list(zip(obj.lower, obj.upper)),
        options={"maxiter": opt.max_inner_iters, "gtol": opt.gradient_tolerance, "ftol": 1e-12},
    )
    z = np.clip(res.x, obj.lower, obj.upper)
    risk, risk0 = obj.risk(z), obj.risk(z0)
    if not (res.fun <= f0 and risk <= risk0):  # the domain penalty or the cap can trade against raw risk
        z, risk = z0, risk0
    log.debug("inner T=%.2f risk=%.5f iters=%d evals=%d", t_fixed, risk, res.nit, obj.evaluations)
    return obj.schedules(z), risk, int(res.nit)


def _best_inner(scenario, t, inits, sample, backend):
    best = None
    iters = 0
    for init in inits:
        scheds, risk, it = inner_minimize_risk(scenario, t, init, sample, backend=backend)
        iters += it
        if best is None or risk < best[1]:
            best = (scheds, risk)
    return best[0], best[1], iters


def outer_min_time(scenario, config=None, backend=None) -> PlanResult:
    """Bisect the mission time for the smallest horizon whose minimized risk is <= rho."""
    config = config or scenario.opt
    if config is not scenario.opt:
        scenario = scenario.replace(opt=config)
    start = time.perf_counter()
    rho = config.risk_threshold_rho
    lo, hi = (float(t) for t in config.time_bracket)
    sample = scenario.opt_sample()
    inits = initial_guesses(scenario, hi)
    scheds_hi, risk_hi, iters = _best_inner(scenario, hi, inits, sample, backend)
    history = [(hi, risk_hi, risk_hi <= rho)]
    if risk_hi > rho:
        raise InfeasibleBracket(f"bracket infeasible: min risk {risk_hi:.4f} > {rho} at T_hi={hi}")
    while hi - lo > config.time_tolerance:
        mid = 0.5 * (lo + hi)
        cands = [[s.rescaled(mid) for s in scheds_hi]]
        if config.restarts:
            cands += initial_guesses(scenario, mid)[:1]
        scheds, risk, it = _best_inner(scenario, mid, cands, sample, backend)
        iters += it
        history.append((mid, risk, risk <= rho))
        log.info("outer T=%.2f risk=%.5f %s", mid, risk, "ok" if risk <= rho else "infeasible")
        if risk <= rho:
            hi, scheds_hi, risk_hi = mid, scheds, risk
        else:
            lo = mid
    return PlanResult(
        mission_time=hi,
        schedules=scheds_hi,
        achieved_risk=risk_hi,
        inner_iterations=iters,
        wall_clock=time.perf_counter() - start,
        history=history,
    )


def plan_trajectories(scenario, schedules, t=None, backend=None):
    vehicles = scenario.world_vehicles()
    t = schedules[0].t_final if t is None else t
    dt = scenario.step_for(t)
    return [rollout(v.initial, s if s.t_final == t else s.rescaled(t), dt, v.params, backend=backend)
            for v, s in zip(vehicles, schedules)]


def evaluate_fixed_plan(scenario, schedules, t=None, sample=None, backend=None) -> RiskReport:
    """Risk of a stored plan under the scenario's current ripple setting; no optimization."""
    trajs = plan_trajectories(scenario, schedules, t, backend)
    sample = sample if sample is not None else scenario.opt_sample()
    return residual_risk(trajs, sample, [v.sensor for v in scenario.world_vehicles()], scenario.field, backend)
