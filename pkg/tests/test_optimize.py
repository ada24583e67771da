import dataclasses
import math

import numpy as np
import pytest

from mcmplan.dynamics import ControlSchedule, wrap_angle
from mcmplan.optimize import (
    InfeasibleBracket,
    OptimizationConfig,
    RiskObjective,
    boustrophedon_seed,
    evaluate_fixed_plan,
    initial_guesses,
    inner_minimize_risk,
    outer_min_time,
    plan_trajectories,
)
from mcmplan.sensor import SensorParams
from mcmplan.stubs import ConstantRateSensor, DiskSensor

from conftest import stub_scenario

SP = SensorParams()


@pytest.mark.parametrize("kw", [
    {"risk_threshold_rho": 1.0}, {"risk_threshold_rho": 0.0}, {"knots_n": 1},
    {"time_bracket": (10.0, 5.0)}, {"time_tolerance": 0.0}, {"gradient": "exact"}, {"restarts": -1},
])
def test_config_rejected(kw):
    with pytest.raises(ValueError):
        OptimizationConfig(**kw)


def test_boustrophedon_seed_in_bounds():
    sc = stub_scenario(SP, knots=16, rudder_deg=5.0)
    v = sc.vehicles[0].params
    z = boustrophedon_seed(16, 300.0, v)
    assert np.all(np.abs(z) <= v.rudder_limit)
    assert np.count_nonzero(z) >= 2 and set(np.sign(z[z != 0])) == {-1.0, 1.0}


class TestInner:
    def test_blind_sensor(self):
        sc = stub_scenario(ConstantRateSensor(0.0), knots=4)
        scheds, risk, iters = inner_minimize_risk(sc, 50.0, initial_guesses(sc, 50.0)[0])
        assert risk == 1.0 and iters == 0
        obj = RiskObjective(sc, 50.0, sc.opt_sample())
        _, g = obj.value_and_grad(np.zeros(4))
        assert not np.any(g)

    def test_turns_towards_disk(self):
        # disk of targets to port of the start, out of reach in the horizon
        sensor = DiskSensor(0.5, center=(14.5, 24.0), radius=1.0)
        sc = stub_scenario(sensor, knots=6, samples=512)
        t = 3.0
        straight = [ControlSchedule.uniform(t, np.zeros(6))]
        base = evaluate_fixed_plan(sc, straight).residual_risk
        scheds, risk, _ = inner_minimize_risk(sc, t, straight)
        assert risk < base
        tr = plan_trajectories(sc, scheds)[0]
        assert math.hypot(tr.x[-1] - 14.5, tr.y[-1] - 24.0) > 1.0
        bearing = math.atan2(24.0 - tr.y[-1], 14.5 - tr.x[-1])
        assert abs(wrap_angle(tr.psi[-1] - bearing)) < math.pi / 2
        assert tr.psi[len(tr) // 2] > 0

    def test_never_worse_than_init(self, rng):
        sc = stub_scenario(SP, knots=6, scale=30.0, dt=0.5, samples=256, rudder_deg=5.0)
        lim = sc.vehicles[0].params.rudder_limit
        for _ in range(20):
            z0 = rng.uniform(-lim, lim, 6)
            obj = RiskObjective(sc, 40.0, sc.opt_sample())
            start = obj.risk(z0)
            scheds, risk, _ = inner_minimize_risk(sc, 40.0, z0)
            assert risk <= start
            assert np.all(np.abs(scheds[0].rudder_values) <= lim)

    def test_bad_time(self):
        sc = stub_scenario(SP)
        with pytest.raises(ValueError):
            inner_minimize_risk(sc, 0.0, np.zeros(2))


class TestOuter:
    def test_constant_rate_inversion(self):
        c = 1e-3
        sc = stub_scenario(ConstantRateSensor(c), tol=1.0)
        res = outer_min_time(sc)
        want = math.log(10) / c
        assert want - 1.0 <= res.mission_time - 1e-9 and res.mission_time <= want + 1.0
        assert res.achieved_risk <= 0.1
        assert res.achieved_risk == pytest.approx(math.exp(-c * res.mission_time), rel=1e-12)

    def test_history_monotone_for_stub(self):
        res = outer_min_time(stub_scenario(ConstantRateSensor(1e-3), tol=1.0))
        pts = sorted(res.history)
        risks = [r for _, r, _ in pts]
        assert all(a >= b for a, b in zip(risks, risks[1:]))
        assert all(ok == (r <= 0.1) for _, r, ok in res.history)

    def test_loose_threshold_returns_low_end(self):
        sc = stub_scenario(ConstantRateSensor(1e-3), rho=0.999, bracket=(10.0, 500.0), tol=1.0)
        assert outer_min_time(sc).mission_time <= 10.0 + 1.0

    def test_infeasible(self):
        sc = stub_scenario(ConstantRateSensor(1e-6), bracket=(10.0, 100.0))
        with pytest.raises(InfeasibleBracket, match="bracket infeasible"):
            outer_min_time(sc)

    def test_more_vehicles_not_slower(self):
        one = outer_min_time(stub_scenario(ConstantRateSensor(1e-3), tol=1.0))
        two = outer_min_time(stub_scenario(ConstantRateSensor(1e-3), starts=((10, 15), (20, 15)), tol=1.0))
        assert two.mission_time <= one.mission_time
        assert two.mission_time == pytest.approx(one.mission_time / 2, abs=1.0)

    def test_deterministic(self):
        sc = stub_scenario(SP, knots=4, scale=30.0, dt=0.5, samples=256, bracket=(20.0, 120.0), rudder_deg=5.0)
        a, b = outer_min_time(sc), outer_min_time(sc)
        assert a.mission_time == b.mission_time and a.achieved_risk == b.achieved_risk
        assert a.history == b.history and a.inner_iterations == b.inner_iterations
        assert all(x == y for x, y in zip(a.schedules, b.schedules))
        lim = sc.vehicles[0].params.rudder_limit
        assert all(np.all(np.abs(s.rudder_values) <= lim) for s in a.schedules)

    def test_config_override(self):
        sc = stub_scenario(ConstantRateSensor(1e-3))
        cfg = dataclasses.replace(sc.opt, time_tolerance=1.0)
        assert outer_min_time(sc, cfg).mission_time == pytest.approx(2302.6, abs=1.0)


def test_fixed_plan_reproduces_optimizer_risk():
    sc = stub_scenario(SP, knots=4, scale=30.0, dt=0.5, samples=256, bracket=(20.0, 120.0), rudder_deg=5.0)
    res = outer_min_time(sc)
    rep = evaluate_fixed_plan(sc, res.schedules)
    assert rep.residual_risk == res.achieved_risk
    assert rep.mission_time == res.mission_time
