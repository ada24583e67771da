import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcmplan.scenario import (
    BUNDLED,
    REQUIRED_KEYS,
    ScenarioError,
    bundled_path,
    format_scenario,
    parse_scenario,
    parse_scenario_text,
)

MINIMAL = """\
domain.x_lo = 5
domain.y_lo = 5
domain.x_hi = 25
domain.y_hi = 25
risk_threshold = 0.1
vehicle.1.x = 14.5
vehicle.1.y = 15.0
"""


def test_bundled_single_vehicle_values():
    s = parse_scenario("survey_1vehicle.scn")
    v = s.vehicles[0]
    sp, vp = v.sensor, v.params
    assert math.degrees(sp.alpha_fov) == pytest.approx(120)
    assert (sp.height_h, sp.sigma, sp.scan_rate_lambda, sp.atten_a, sp.fom) == (20, 9, 20, 5.2, 72)
    assert math.degrees(sp.eps_fov) == pytest.approx(5) and math.degrees(sp.eps_de) == pytest.approx(-6)
    assert (sp.p_alpha, sp.p_eps) == (25, 400)
    assert (vp.speed_v, vp.nomoto_t, vp.nomoto_k) == (2.5, 0.5, 5)
    assert (v.initial.x, v.initial.y) == (14.5, 15.0)
    assert (s.domain.x_lo, s.domain.y_lo, s.domain.x_hi, s.domain.y_hi) == (5, 5, 25, 25)
    assert s.risk_threshold == 0.1
    assert math.degrees(s.ripple.angle) == pytest.approx(135)


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_files_parse(name):
    s = parse_scenario(bundled_path(name))
    assert s.label and len(s.vehicles) == (2 if "2vehicle" in name else 1)


def test_unknown_bundled_name():
    with pytest.raises(ScenarioError):
        bundled_path("nope.scn")


def test_empty_file_names_first_missing_key(tmp_path):
    p = tmp_path / "empty.scn"
    p.write_text("")
    with pytest.raises(ScenarioError) as err:
        parse_scenario(p)
    assert err.value.key == REQUIRED_KEYS[0]
    assert REQUIRED_KEYS[0] in str(err.value)


def test_threshold_out_of_range():
    with pytest.raises(ScenarioError) as err:
        parse_scenario_text(MINIMAL.replace("risk_threshold = 0.1", "risk_threshold = 1.5"))
    assert err.value.key == "risk_threshold" and err.value.line == 5
    assert "line 5, key 'risk_threshold'" in str(err.value)


@pytest.mark.parametrize("extra,key,line", [
    ("bogus = 3", "bogus", 8),
    ("sensor.sigma = -1", "sensor.sigma", 8),
    ("vehicle.1.sensor.sigma = -1", "vehicle.1.sensor.sigma", 8),
    ("vehicle.1.speed = fast", "vehicle.1.speed", 8),
    ("ripple.split = diagonal", "ripple.split", 8),
    ("vehicle.1.x = 3", "vehicle.1.x", 8),
    ("vehicle.3.x = 10", "vehicle.3", None),
])
def test_errors_carry_key_and_line(extra, key, line):
    with pytest.raises(ScenarioError) as err:
        parse_scenario_text(MINIMAL + extra + "\n")
    assert err.value.key == key
    assert err.value.line == line


def test_malformed_line():
    with pytest.raises(ScenarioError) as err:
        parse_scenario_text(MINIMAL + "no equals sign here\n")
    assert err.value.line == 8


def test_degrees_converted():
    s = parse_scenario_text(MINIMAL + "vehicle.1.psi_deg = 90\nvehicle.1.rudder_limit_deg = 10\n")
    assert s.vehicles[0].initial.psi == pytest.approx(math.pi / 2)
    assert s.vehicles[0].params.rudder_limit == pytest.approx(math.radians(10))


def test_per_vehicle_sensor_override():
    s = parse_scenario_text(MINIMAL + "sensor.fom = 80\nvehicle.2.x = 6\nvehicle.2.y = 6\nvehicle.2.sensor.fom = 70\n")
    assert [v.sensor.fom for v in s.vehicles] == [80, 70]


def test_coarse_step_rejected():
    with pytest.raises(ScenarioError) as err:
        parse_scenario_text(MINIMAL + "dt = 2.0\n")
    assert err.value.key == "dt"


def test_length_scale():
    s = parse_scenario_text(MINIMAL + "length_scale = 40\n")
    d = s.world_domain()
    assert (d.x_lo, d.x_hi) == (200, 1000)
    assert s.world_vehicles()[0].initial.x == 580
    assert s.ripple_field().edge_sharpness == pytest.approx(30 / 40)


def test_default_step():
    s = parse_scenario_text(MINIMAL)
    assert s.step_for(100.0) == 0.1
    assert s.step_for(3000.0) == 0.25  # capped at half the steering time constant


@pytest.mark.parametrize("name", BUNDLED)
def test_round_trip_bundled(name):
    s = parse_scenario(bundled_path(name))
    assert parse_scenario_text(format_scenario(s)) == s


@settings(max_examples=60, deadline=None)
@given(
    rho=st.floats(0.001, 0.999),
    psi=st.floats(-179.9, 180.0),
    lim=st.floats(0.1, 40.0),
    fom=st.floats(40.0, 100.0),
    scale=st.floats(0.5, 100.0),
    seed=st.integers(0, 2**31),
    knots=st.integers(2, 64),
    ripples=st.booleans(),
    angle=st.floats(0.0, 180.0),
)
def test_round_trip_lossless(rho, psi, lim, fom, scale, seed, knots, ripples, angle):
    text = MINIMAL.replace("0.1", repr(rho), 1) + (
        f"vehicle.1.psi_deg = {psi!r}\nvehicle.1.rudder_limit_deg = {lim!r}\nsensor.fom = {fom!r}\n"
        f"length_scale = {scale!r}\nseed = {seed}\nopt.knots = {knots}\n"
        f"ripples = {'on' if ripples else 'off'}\nripple.angle_deg = {angle!r}\n"
    )
    s = parse_scenario_text(text)
    assert parse_scenario_text(format_scenario(s)) == s
    assert format_scenario(parse_scenario_text(format_scenario(s))) == format_scenario(s)


def test_samples_use_scenario_seed():
    s = parse_scenario_text(MINIMAL + "seed = 4\n")
    a, b = s.opt_sample(), s.opt_sample()
    assert (a.ox == b.ox).all()
    assert not (a.ox[:10] == s.report_sample(10).ox).all()
    assert not (a.ox == parse_scenario_text(MINIMAL + "seed = 5\n").opt_sample().ox).all()
