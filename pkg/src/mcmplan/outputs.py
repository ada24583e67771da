"""Result files: trajectories, coverage grid, summary row and the stored plan."""
from __future__ import annotations

import json
import math
from decimal import Decimal, localcontext
from pathlib import Path

import numpy as np

from .dynamics import ControlSchedule, Trajectory

PLAN_FORMAT = "mcmplan-plan/1"

# pi to 50 digits; angle columns convert through this so every double has a decimal image
_PI = Decimal("3.1415926535897932384626433832795028841971693993751")


def _to_rad(text: str) -> float:
    with localcontext() as ctx:
        ctx.prec = 50
        return float(Decimal(text) * _PI / 180)


def _deg(rad) -> str:
    """Shortest degrees string that ``_to_rad`` maps back to exactly ``rad``."""
    rad = float(rad)
    text = repr(math.degrees(rad))
    if _to_rad(text) == rad:
        return text
    with localcontext() as ctx:
        ctx.prec = 50
        deg = Decimal(rad) * 180 / _PI
    for digits in range(15, 40):
        text = f"{deg:.{digits}g}"
        if _to_rad(text) == rad:
            return text
    raise ValueError(f"no degree representation for {rad!r}")  # unreachable for finite input


def write_trajectory_csv(traj: Trajectory, path):
    """Columns ``t,x,y,psi_deg,r_degps,p_deg``; values round-trip exactly."""
    with open(path, "w") as fh:
        fh.write("t,x,y,psi_deg,r_degps,p_deg\n")
        for t, (x, y, psi, r), p in zip(traj.times, traj.states, traj.controls):
            fh.write(f"{float(t)!r},{float(x)!r},{float(y)!r},{_deg(psi)},{_deg(r)},{_deg(p)}\n")


def read_trajectory_csv(path) -> Trajectory:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2, dtype=str)
    rad = np.vectorize(_to_rad, otypes=[float])  # same conversion the writer inverted
    times, x, y = (data[:, i].astype(float) for i in range(3))
    states = np.column_stack([x, y, rad(data[:, 3]), rad(data[:, 4])])
    dt = float(times[1] - times[0]) if times.size > 1 else 0.0
    return Trajectory(dt=dt, times=times, states=states, controls=rad(data[:, 5]))


def summary_text(label, report, result, n_vehicles) -> str:
    head = f"{label} " if label else ""
    return (
        f"{head}risk={100.0 * report.residual_risk:.2f}% mission={report.mission_time:.2f}s\n"
        f"vehicles={n_vehicles} samples={report.per_target_detection.size} "
        f"std_error={100.0 * report.std_error:.2f}% "
        + (f"optimizer_risk={100.0 * result.achieved_risk:.2f}% inner_iterations={result.inner_iterations}\n"
           if result is not None else "optimizer_risk=- inner_iterations=-\n")
    )


def timing_text(result, report) -> str:
    compute = f"{result.wall_clock:.2f}s" if result is not None else "/"
    return f"risk={100.0 * report.residual_risk:.2f}% mission={report.mission_time:.2f}s compute={compute}\n"


def plan_to_json(result, scenario_text, label="", ripples=False) -> str:
    doc = {
        "format": PLAN_FORMAT,
        "label": label,
        "ripples": bool(ripples),
        "mission_time": result.mission_time,
        "achieved_risk": result.achieved_risk,
        "inner_iterations": result.inner_iterations,
        "schedules": [
            {"knot_times": s.knot_times.tolist(), "rudder_values": s.rudder_values.tolist()} for s in result.schedules
        ],
        "history": [list(h) for h in result.history],
        "scenario": scenario_text,
    }
    return json.dumps(doc, indent=1) + "\n"


def read_plan(path):
    """Return ``(doc, schedules)`` from a stored plan file."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != PLAN_FORMAT:
        raise ValueError(f"{path}: not a {PLAN_FORMAT} file")
    schedules = [ControlSchedule(s["knot_times"], s["rudder_values"]) for s in doc["schedules"]]
    return doc, schedules


def write_outputs(result, report, grid, out_dir, trajectories, label="", plan_json=None):
    """Write every artifact of a run into ``out_dir`` and return the paths written.

    ``summary.txt`` holds only deterministic values; the wall-clock time goes
    to ``timing.txt`` so that repeated runs produce byte-identical summaries.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for i, traj in enumerate(trajectories, 1):
            p = out / f"trajectory_{i}.csv"
            write_trajectory_csv(traj, p)
            paths.append(p)
        grid.to_csv(out / "coverage.csv")
        grid.to_pgm(out / "coverage.pgm")
        (out / "summary.txt").write_text(summary_text(label, report, result, len(trajectories)))
        (out / "timing.txt").write_text(timing_text(result, report))
        paths += [out / "coverage.csv", out / "coverage.pgm", out / "summary.txt", out / "timing.txt"]
        if plan_json is not None:
            (out / "plan.json").write_text(plan_json)
            paths.append(out / "plan.json")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write output: {exc.strerror}", exc.filename) from None
    return paths


def write_function_grid(grid: dict, heading: float, path):
    """CSV rows ``x,y,soft_rect,triangle_blend,dom_weight`` for one heading."""
    with open(path, "w") as fh:
        fh.write(f"# heading_deg={math.degrees(heading)!r}\n")
        fh.write("x,y,soft_rect,triangle_blend,dom_weight\n")
        for iy, y in enumerate(grid["y"]):
            for ix, x in enumerate(grid["x"]):
                fh.write(
                    f"{x:.6f},{y:.6f},{grid['soft_rect'][iy, ix]:.9g},"
                    f"{grid['triangle_blend'][iy, ix]:.9g},{grid['dom_weight'][iy, ix]:.9g}\n"
                )


def write_ripple_curve(field, path, n=721):
    """CSV rows ``heading_deg,ripple_gain`` over ``(-180, 180]``."""
    from .seabed import ripple_gain

    theta = np.linspace(-math.pi, math.pi, n)[1:]
    gain = ripple_gain(theta, field)
    with open(path, "w") as fh:
        fh.write("heading_deg,ripple_gain\n")
        for t, g in zip(np.degrees(theta), gain):
            fh.write(f"{t:.6f},{g:.9g}\n")
