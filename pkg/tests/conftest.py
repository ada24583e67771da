import json
import math
from pathlib import Path

import numpy as np
import pytest

from mcmplan._accel import USE_NUMBA
from mcmplan.dynamics import ControlSchedule, VehicleParams, VehicleState
from mcmplan.optimize import OptimizationConfig
from mcmplan.risk import Domain
from mcmplan.scenario import Scenario, VehicleSpec

ORACLE = json.loads((Path(__file__).parent / "oracles" / "values.json").read_text())

BACKENDS = ["numpy", "numba"] if USE_NUMBA else ["numpy"]


@pytest.fixture
def oracle():
    return ORACLE


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


def stub_scenario(sensor, starts=((14.5, 15.0),), *, knots=2, bracket=(100.0, 4000.0), tol=5.0,
                  rho=0.1, samples=64, dt=0.0, scale=1.0, rudder_deg=30.0):
    """Scenario on [5,25]^2 whose vehicles all carry ``sensor``."""
    vehicles = [
        VehicleSpec(VehicleState(x, y), VehicleParams(rudder_limit=math.radians(rudder_deg)), sensor)
        for x, y in starts
    ]
    opt = OptimizationConfig(risk_threshold_rho=rho, knots_n=knots, time_bracket=bracket, time_tolerance=tol)
    return Scenario(domain=Domain(5, 5, 25, 25), vehicles=vehicles, opt=opt, mc_samples_opt=samples,
                    mc_samples_report=samples, dt=dt, length_scale=scale)


def random_schedule(rng, t_final, n, limit):
    return ControlSchedule.uniform(t_final, rng.uniform(-limit, limit, n))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
