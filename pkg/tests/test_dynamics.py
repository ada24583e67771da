import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcmplan.dynamics import (
    ControlSchedule,
    VehicleParams,
    VehicleState,
    rk4_step,
    rollout,
    schedule_gradient,
    state_derivative,
    time_grid,
    wrap_angle,
)

VP = VehicleParams()


def r_closed(t, k, tc, p, r0=0.0):
    return k * p + (r0 - k * p) * np.exp(-t / tc)


class TestDerivative:
    def test_straight(self):
        assert state_derivative(VehicleState(0, 0, 0, 0), 0.0, VP) == (2.5, 0.0, 0.0, 0.0)

    def test_substitution(self):
        dx, dy, dpsi, dr = state_derivative(VehicleState(0, 0, math.pi / 2, 0.1), 0.0, VP)
        assert dx == pytest.approx(0.0, abs=1e-15)
        assert (dy, dpsi, dr) == (2.5, 0.1, pytest.approx(-0.2))

    def test_equilibrium(self):
        assert state_derivative(VehicleState(0, 0, 0.3, 5 * 0.2), 0.2, VP)[3] == 0.0

    @given(st.floats(-10, 10), st.floats(-2, 2), st.floats(-1, 1))
    def test_speed_invariant(self, psi, r, p):
        dx, dy, _, _ = state_derivative(VehicleState(0, 0, psi, r), p, VP)
        assert math.hypot(dx, dy) == pytest.approx(VP.speed_v, rel=1e-14)


class TestParams:
    @pytest.mark.parametrize("kw", [{"speed_v": 0.0}, {"nomoto_t": -1.0}, {"rudder_limit": 0.0}])
    def test_rejected(self, kw):
        with pytest.raises(ValueError):
            VehicleParams(**kw)

    def test_default_rudder_limit(self):
        assert VP.rudder_limit == pytest.approx(0.5236, abs=1e-4)

    def test_nonfinite_state(self):
        with pytest.raises(ValueError):
            VehicleState(float("nan"), 0.0)


class TestSchedule:
    def test_interp(self):
        s = ControlSchedule([0, 1, 3], [0.0, 0.2, -0.2])
        assert s(0.5) == pytest.approx(0.1)
        assert s(2.0) == pytest.approx(0.0)
        assert s.t_final == 3.0

    @pytest.mark.parametrize("t,v", [([], []), ([1, 2], [0, 0]), ([0, 2, 1], [0, 0, 0]), ([0, 1], [0])])
    def test_invalid(self, t, v):
        with pytest.raises(ValueError):
            ControlSchedule(t, v)

    def test_rescaled_keeps_values(self):
        s = ControlSchedule.uniform(10.0, [0.1, -0.1, 0.2])
        r = s.rescaled(40.0)
        np.testing.assert_array_equal(r.rudder_values, s.rudder_values)
        assert r.t_final == 40.0

    def test_bounds(self):
        ControlSchedule.uniform(1.0, [0.5, -0.5]).check_bounds(0.5)
        with pytest.raises(ValueError):
            ControlSchedule.uniform(1.0, [0.6]).check_bounds(0.5)


class TestRK4:
    def test_straight_exact(self):
        s = VehicleState(0.0, 0.0)
        sched = ControlSchedule.uniform(10.0, [0.0, 0.0])
        for n in range(1, 21):
            s = rk4_step(s, sched, (n - 1) * 0.25, 0.25, VP)
            assert s.y == 0.0
            assert s.x == pytest.approx(n * 0.25 * 2.5, abs=1e-13)

    def test_turn_rate_closed_form(self, oracle):
        sched = ControlSchedule.uniform(2.5, [0.1, 0.1])
        tr = rollout(VehicleState(0, 0), sched, 0.01, VP)
        assert tr.r[-1] == pytest.approx(oracle["nomoto_r_2_5"], abs=1e-6)
        assert oracle["nomoto_r_2_5"] == pytest.approx(0.49663, abs=1e-5)
        np.testing.assert_allclose(tr.r, r_closed(tr.times, 5.0, 0.5, 0.1), atol=1e-6)

    def test_step_halving_factor(self):
        errs = []
        for dt in (0.1, 0.05):
            tr = rollout(VehicleState(0, 0), ControlSchedule.uniform(2.0, [0.2, 0.2]), dt, VP)
            errs.append(np.max(np.abs(tr.r - r_closed(tr.times, 5.0, 0.5, 0.2))))
        assert errs[0] / errs[1] == pytest.approx(16.0, rel=0.1)

    def test_bad_step(self):
        with pytest.raises(ValueError):
            rk4_step(VehicleState(0, 0), ControlSchedule.uniform(1.0, [0, 0]), 0.0, 0.0, VP)


class TestRollout:
    def test_straight_line(self, backend):
        tr = rollout(VehicleState(14.5, 15.0), ControlSchedule.uniform(8.0, [0.0] * 4), 0.1, VP, backend)
        assert tr.x[-1] == pytest.approx(34.5, abs=1e-10)
        assert tr.y[-1] == 15.0
        assert len(tr) == 81

    def test_partial_last_step(self):
        g = time_grid(1.0, 0.3)
        np.testing.assert_allclose(g, [0.0, 0.3, 0.6, 0.9, 1.0])
        tr = rollout(VehicleState(0, 0), ControlSchedule.uniform(1.0, [0.0, 0.0]), 0.3, VP)
        assert tr.x[-1] == pytest.approx(2.5)

    def test_zero_length(self):
        tr = rollout(VehicleState(1, 2, 0.3), ControlSchedule([0.0], [0.0]), 0.5, VP)
        assert len(tr) == 2 and tr.mission_time == 0.0
        np.testing.assert_array_equal(tr.states[0], tr.states[1])

    def test_empty_schedule(self):
        with pytest.raises(ValueError):
            rollout(VehicleState(0, 0), None, 0.1, VP)

    def test_backends_agree(self, rng):
        sched = ControlSchedule.uniform(60.0, rng.uniform(-0.5, 0.5, 12))
        a = rollout(VehicleState(3, 4, 0.2, 0.01), sched, 0.07, VP, "numpy")
        b = rollout(VehicleState(3, 4, 0.2, 0.01), sched, 0.07, VP, "numba")
        np.testing.assert_allclose(a.states, b.states, rtol=0, atol=1e-10)

    def test_deterministic(self, backend, rng):
        sched = ControlSchedule.uniform(30.0, rng.uniform(-0.5, 0.5, 7))
        a = rollout(VehicleState(0, 0), sched, 0.1, VP, backend)
        b = rollout(VehicleState(0, 0), sched, 0.1, VP, backend)
        assert np.array_equal(a.states, b.states)

    def test_mirror_symmetry(self):
        # negating the rudder mirrors the path about the initial heading axis
        sched = ControlSchedule([0, 5, 10], [0.1, -0.3, 0.2])
        neg = ControlSchedule([0, 5, 10], [-0.1, 0.3, -0.2])
        a = rollout(VehicleState(0, 0), sched, 0.05, VP)
        b = rollout(VehicleState(0, 0), neg, 0.05, VP)
        np.testing.assert_allclose(a.x, b.x, atol=1e-12)
        np.testing.assert_allclose(a.y, -b.y, atol=1e-12)
        np.testing.assert_allclose(a.psi, -b.psi, atol=1e-12)

    def test_reversed_symmetric_schedule(self):
        # a palindromic schedule and its reversal are the same input
        sched = ControlSchedule([0, 5, 10], [0.2, -0.1, 0.2])
        rev = ControlSchedule([0, 5, 10], sched.rudder_values[::-1])
        a = rollout(VehicleState(0, 0), sched, 0.05, VP)
        b = rollout(VehicleState(0, 0), rev, 0.05, VP)
        assert np.array_equal(a.states, b.states)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(-0.52, 0.52), min_size=2, max_size=8), st.floats(-0.5, 0.5))
    def test_step_length_and_turn_bound(self, values, r0):
        tr = rollout(VehicleState(0, 0, 0, r0), ControlSchedule.uniform(20.0, values), 0.1, VP)
        steps = np.hypot(np.diff(tr.x), np.diff(tr.y))
        assert np.all(steps <= VP.speed_v * 0.1 + 1e-9)
        assert np.all(np.abs(tr.r) <= max(abs(r0), VP.nomoto_k * VP.rudder_limit) + 1e-12)
        assert np.all((tr.psi > -math.pi) & (tr.psi <= math.pi))

    def test_time_shift_equivariance(self):
        # running a schedule from an intermediate state continues the original path
        sched = ControlSchedule(np.arange(0.0, 21.0, 1.0), np.sin(np.arange(21.0)) * 0.3)
        full = rollout(VehicleState(0, 0), sched, 0.1, VP)
        i = 50
        tail = ControlSchedule(sched.knot_times[5:] - 5.0, sched.rudder_values[5:])
        part = rollout(full.state(i), tail, 0.1, VP)
        np.testing.assert_allclose(part.states[:, :2], full.states[i:, :2], atol=1e-9)
        np.testing.assert_allclose(part.r, full.r[i:], atol=1e-12)


def test_wrap_angle():
    np.testing.assert_allclose(wrap_angle([math.pi, -math.pi, 3 * math.pi, 0.5]), [math.pi, math.pi, math.pi, 0.5])


def test_schedule_gradient_matches_central_difference(backend, rng):
    # d/d(knots) of sum_k w_k * (x_k, y_k, psi_k) for fixed random weights w
    sched = ControlSchedule.uniform(12.0, rng.uniform(-0.3, 0.3, 5))
    w = rng.normal(size=(121, 3))

    def f(values):
        tr = rollout(VehicleState(0, 0), ControlSchedule.uniform(12.0, values), 0.1, VP, backend)
        return float(np.sum(w * tr.states[:, :3]))

    tr = rollout(VehicleState(0, 0), sched, 0.1, VP, backend)
    g = schedule_gradient(tr, sched, VP, w, backend)
    h = 1e-6
    fd = np.array([(f(sched.rudder_values + h * e) - f(sched.rudder_values - h * e)) / (2 * h) for e in np.eye(5)])
    np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-6)
