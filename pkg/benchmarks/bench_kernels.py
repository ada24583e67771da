"""Time the numba and numpy backends on the desk scenario's hot kernels.

    python benchmarks/bench_kernels.py [--samples 2048] [--repeat 5]

Each backend is warmed up once (numba compiles or loads its cache) and then
timed on exposure, the adjoint state gradient and rollout. Results are also
checked for agreement.
"""
import argparse
import time

import numpy as np

from mcmplan._accel import USE_NUMBA
from mcmplan.dynamics import ControlSchedule, rollout
from mcmplan.kernels import exposure_array, risk_state_gradient
from mcmplan.scenario import parse_scenario


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=2048)
    ap.add_argument("--horizon", type=float, default=200.0, help="mission time in s")
    ap.add_argument("--ripples", choices=("on", "off"), default="on")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    sc = parse_scenario("desk_1vehicle.scn").with_ripples(args.ripples == "on")
    veh = sc.world_vehicles()[0]
    sample = sc.opt_sample(args.samples)
    rudder = np.random.default_rng(0).uniform(-1, 1, sc.opt.knots_n) * veh.params.rudder_limit
    sched = ControlSchedule.uniform(args.horizon, rudder)
    dt = sc.step_for(args.horizon)
    backends = ["numpy", "numba"] if USE_NUMBA else ["numpy"]
    print(f"{args.samples} targets, {int(args.horizon / dt) + 1} steps, ripples {args.ripples}")
    print(f"{'kernel':<12}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) == 2 else ""))

    results = {}
    for name in ("rollout", "exposure", "gradient"):
        row = []
        for b in backends:
            tr = rollout(veh.initial, sched, dt, veh.params, backend=b)
            fns = {
                "rollout": lambda: rollout(veh.initial, sched, dt, veh.params, backend=b),
                "exposure": lambda: exposure_array([tr], sample.ox, sample.oy, [veh.sensor], sc.field, b),
                "gradient": lambda: risk_state_gradient([tr], sample.ox, sample.oy, [veh.sensor], sc.field, b),
            }
            fns[name]()  # warm-up
            secs, out = best_of(fns[name], args.repeat)
            results[(name, b)] = out
            row.append(secs)
        line = f"{name:<12}" + "".join(f"{1e3 * s:>10.2f}ms" for s in row)
        if len(row) == 2:
            line += f"{row[0] / row[1]:>11.1f}x"
        print(line)

    if len(backends) == 2:
        e0, e1 = results[("exposure", "numpy")], results[("exposure", "numba")]
        g0, g1 = results[("gradient", "numpy")][2][0], results[("gradient", "numba")][2][0]
        print(f"max rel. exposure difference {np.max(np.abs(e0 - e1) / np.maximum(np.abs(e0), 1e-300)):.1e}, "
              f"max gradient difference {np.max(np.abs(g0 - g1)):.1e}")


if __name__ == "__main__":
    main()
