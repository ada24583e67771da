"""Scenario description and its flat key-value file format.

Example::

    # survey rectangle, in file units (multiplied by length_scale)
    domain.x_lo = 5
    domain.x_hi = 25
    domain.y_lo = 5
    domain.y_hi = 25
    risk_threshold = 0.1
    vehicle.1.x = 14.5
    vehicle.1.y = 15.0

Angles are given in degrees (keys ending in ``_deg``/``_degps``) and stored in
radians. ``sensor.*`` keys set defaults for every vehicle; ``vehicle.N.sensor.*``
overrides them for vehicle ``N``. Unknown keys are rejected.
"""
from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional

from .dynamics import VehicleParams, VehicleState
from .optimize import OptimizationConfig
from .risk import Domain, sample_targets
from .seabed import DOM_FORMS, SPLITS, RippleField
from .sensor import RANGE_METRICS, TL_FORMS, SensorParams


class ScenarioError(ValueError):
    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


@dataclass
class VehicleSpec:
    initial: VehicleState
    params: VehicleParams = field(default_factory=VehicleParams)
    sensor: Any = field(default_factory=SensorParams)


@dataclass
class RippleSettings:
    """Ripple constants in file units; turned into a :class:`RippleField` over the scaled domain."""

    angle: float = 0.75 * math.pi
    edge_sharpness: float = 30.0
    width_sigma: float = 0.1
    split: str = "upper_left"
    dom_form: str = "partition"


@dataclass
class Scenario:
    domain: Domain
    vehicles: list
    opt: OptimizationConfig = field(default_factory=OptimizationConfig)
    ripples: bool = False
    ripple: RippleSettings = field(default_factory=RippleSettings)
    mc_samples_opt: int = 4096
    mc_samples_report: int = 65536
    dt: float = 0.0
    length_scale: float = 1.0
    label: str = ""

    def __post_init__(self):
        if not self.vehicles:
            raise ScenarioError("at least one vehicle is required", key="vehicle.1.x")
        if self.length_scale <= 0:
            raise ScenarioError("must be positive", key="length_scale")
        if self.mc_samples_opt < 1 or self.mc_samples_report < 1:
            raise ScenarioError("sample counts must be >= 1", key="mc_samples_opt")
        if self.dt < 0:
            raise ScenarioError("must be >= 0", key="dt")
        for i, v in enumerate(self.vehicles, 1):
            if not self.domain.contains(v.initial.x, v.initial.y):
                raise ScenarioError("initial position outside the domain", key=f"vehicle.{i}.x")
        if self.dt > STABLE_STEP_RATIO * self._yaw_time():
            raise ScenarioError(
                f"{self.dt!r} s is too coarse for a {self._yaw_time()!r} s steering time constant "
                f"(RK4 needs dt <= {STABLE_STEP_RATIO:g} * nomoto_t)", key="dt")

    def _yaw_time(self) -> float:
        return min(v.params.nomoto_t for v in self.vehicles)

    @property
    def seed(self) -> int:
        return self.opt.seed

    @property
    def risk_threshold(self) -> float:
        return self.opt.risk_threshold_rho

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)

    def with_ripples(self, on: bool) -> "Scenario":
        return self.replace(ripples=bool(on))

    def world_domain(self) -> Domain:
        return self.domain.scaled(self.length_scale) if self.length_scale != 1.0 else self.domain

    def world_vehicles(self):
        s = self.length_scale
        if s == 1.0:
            return list(self.vehicles)
        return [
            dataclasses.replace(v, initial=dataclasses.replace(v.initial, x=v.initial.x * s, y=v.initial.y * s))
            for v in self.vehicles
        ]

    def ripple_field(self) -> RippleField:
        d = self.world_domain()
        rp = self.ripple
        return RippleField(
            domain_lo=d.lo,
            domain_hi=d.hi,
            ripple_angle=rp.angle,
            edge_sharpness=rp.edge_sharpness / self.length_scale,
            ripple_width_sigma=rp.width_sigma,
            split=rp.split,
            dom_form=rp.dom_form,
        )

    @property
    def field(self) -> Optional[RippleField]:
        return self.ripple_field() if self.ripples else None

    def step_for(self, t_final: float) -> float:
        """Integration step: fixed ``dt`` if set, else ``t_final / 1000`` capped at half the steering time constant."""
        if self.dt > 0:
            return self.dt
        if t_final <= 0:
            return 1.0
        return min(t_final / 1000.0, 0.5 * self._yaw_time())

    def opt_sample(self, count=None):
        return sample_targets(self.world_domain(), count or self.mc_samples_opt, [self.seed, 0])

    def report_sample(self, count=None):
        return sample_targets(self.world_domain(), count or self.mc_samples_report, [self.seed, 1])


# --- file format ---------------------------------------------------------

_ON = {"on", "true", "yes", "1"}
_OFF = {"off", "false", "no", "0"}

# key -> (attribute, kind); kind: float, int, bool, deg, degps, or a tuple of choices
_SENSOR_KEYS = {
    "scan_rate": ("scan_rate_lambda", "float"),
    "fom": ("fom", "float"),
    "sigma": ("sigma", "float"),
    "atten_db_per_km": ("atten_a", "float"),
    "alpha_fov_deg": ("alpha_fov", "deg"),
    "p_alpha": ("p_alpha", "float"),
    "eps_fov_deg": ("eps_fov", "deg"),
    "eps_de_deg": ("eps_de", "deg"),
    "p_eps": ("p_eps", "float"),
    "height": ("height_h", "float"),
    "range_metric": ("range_metric", RANGE_METRICS),
    "tl_form": ("tl_form", TL_FORMS),
}
_VEHICLE_KEYS = {
    "speed": ("speed_v", "float"),
    "nomoto_k": ("nomoto_k", "float"),
    "nomoto_t": ("nomoto_t", "float"),
    "rudder_limit_deg": ("rudder_limit", "deg"),
}
_STATE_KEYS = {
    "x": ("x", "float"),
    "y": ("y", "float"),
    "psi_deg": ("psi", "deg"),
    "r_degps": ("r", "degps"),
}
_RIPPLE_KEYS = {
    "angle_deg": ("angle", "deg"),
    "edge_sharpness": ("edge_sharpness", "float"),
    "width_sigma_rad": ("width_sigma", "float"),
    "split": ("split", SPLITS),
    "dom_form": ("dom_form", DOM_FORMS),
}
_OPT_KEYS = {
    "knots": ("knots_n", "int"),
    "max_inner_iters": ("max_inner_iters", "int"),
    "gradient_step_deg": ("gradient_step", "deg"),
    "t_lo": ("t_lo", "float"),
    "t_hi": ("t_hi", "float"),
    "time_tolerance": ("time_tolerance", "float"),
    "restarts": ("restarts", "int"),
    "gradient": ("gradient", ("adjoint", "fd")),
    "gradient_tolerance": ("gradient_tolerance", "float"),
    "confine_to_domain": ("confine_to_domain", "bool"),
    "confine_weight": ("confine_weight", "float"),
}
_TOP_KEYS = {
    "label": ("label", "str"),
    "seed": ("seed", "int"),
    "length_scale": ("length_scale", "float"),
    "risk_threshold": ("risk_threshold", "float"),
    "mc_samples_opt": ("mc_samples_opt", "int"),
    "mc_samples_report": ("mc_samples_report", "int"),
    "dt": ("dt", "float"),
    "ripples": ("ripples", "bool"),
    "domain.x_lo": ("x_lo", "float"),
    "domain.y_lo": ("y_lo", "float"),
    "domain.x_hi": ("x_hi", "float"),
    "domain.y_hi": ("y_hi", "float"),
}
# RK4 on the yaw-rate lag is unstable beyond dt ~ 2.785 * nomoto_t; stay well inside
STABLE_STEP_RATIO = 2.0

REQUIRED_KEYS = ("domain.x_lo", "domain.y_lo", "domain.x_hi", "domain.y_hi", "risk_threshold", "vehicle.1.x", "vehicle.1.y")

_VEHICLE_RE = re.compile(r"^vehicle\.(\d+)\.(.+)$")


def _convert(raw, kind, key, line):
    try:
        if kind == "float":
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError
            return value
        if kind == "int":
            return int(raw)
        if kind == "deg":
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError
            return math.radians(value)
        if kind == "degps":
            return math.radians(float(raw))
        if kind == "bool":
            low = raw.lower()
            if low in _ON:
                return True
            if low in _OFF:
                return False
            raise ValueError
        if kind == "str":
            return raw
        if raw not in kind:
            raise ScenarioError(f"must be one of {', '.join(kind)}; got {raw!r}", key, line)
        return raw
    except ScenarioError:
        raise
    except ValueError:
        raise ScenarioError(f"cannot parse {raw!r} as {kind}", key, line) from None


def _lookup(key):
    """Return ``(group, vehicle_index, spec)`` for a known key or ``None``."""
    if key in _TOP_KEYS:
        return "top", None, _TOP_KEYS[key]
    head, _, tail = key.partition(".")
    if head == "ripple" and tail in _RIPPLE_KEYS:
        return "ripple", None, _RIPPLE_KEYS[tail]
    if head == "opt" and tail in _OPT_KEYS:
        return "opt", None, _OPT_KEYS[tail]
    if head == "sensor" and tail in _SENSOR_KEYS:
        return "sensor", None, _SENSOR_KEYS[tail]
    m = _VEHICLE_RE.match(key)
    if m:
        idx, sub = int(m.group(1)), m.group(2)
        if sub.startswith("sensor.") and sub[7:] in _SENSOR_KEYS:
            return "vsensor", idx, _SENSOR_KEYS[sub[7:]]
        if sub in _VEHICLE_KEYS:
            return "vparams", idx, _VEHICLE_KEYS[sub]
        if sub in _STATE_KEYS:
            return "vstate", idx, _STATE_KEYS[sub]
    return None


def parse_scenario_text(text: str, source="<string>") -> Scenario:
    entries = {}
    lines = {}
    for lineno, raw_line in enumerate(text.splitlines(), 1):
        content = raw_line.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise ScenarioError(f"expected 'key = value' in {source}", line=lineno)
        key, _, value = (part.strip() for part in content.partition("="))
        if not key or not value:
            raise ScenarioError("empty key or value", key or None, lineno)
        spec = _lookup(key)
        if spec is None:
            raise ScenarioError("unknown key", key, lineno)
        if key in entries:
            raise ScenarioError(f"duplicate key (first on line {lines[key]})", key, lineno)
        entries[key] = (spec, _convert(value, spec[2][1], key, lineno))
        lines[key] = lineno

    for key in REQUIRED_KEYS:
        if key not in entries:
            raise ScenarioError("missing required key", key)

    top, ripple, opt, sensor = {}, {}, {}, {}
    vstate, vparams, vsensor = {}, {}, {}
    for key, ((group, idx, (attr, _)), value) in entries.items():
        if group == "top":
            top[attr] = value
        elif group == "ripple":
            ripple[attr] = value
        elif group == "opt":
            opt[attr] = value
        elif group == "sensor":
            sensor[attr] = value
        else:
            {"vstate": vstate, "vparams": vparams, "vsensor": vsensor}[group].setdefault(idx, {})[attr] = value

    indices = sorted(set(vstate) | set(vparams) | set(vsensor))
    if indices != list(range(1, len(indices) + 1)):
        raise ScenarioError(f"vehicle blocks must be numbered 1..N, got {indices}", key=f"vehicle.{indices[-1]}")
    for i in indices:
        for coord in ("x", "y"):
            if coord not in vstate.get(i, {}):
                raise ScenarioError("missing required key", f"vehicle.{i}.{coord}")

    def build(cls, kwargs, key):
        try:
            return cls(**kwargs)
        except ScenarioError:
            raise
        except ValueError as exc:
            bad = _blame(key, str(exc))
            if bad not in lines and ".sensor." in bad:  # value came from the shared sensor block
                shared = "sensor." + bad.split(".sensor.", 1)[1]
                bad = shared if shared in lines else bad
            raise ScenarioError(str(exc), bad, lines.get(bad)) from None

    rho = top.pop("risk_threshold")
    if not 0.0 < rho < 1.0:
        raise ScenarioError(f"must be in (0, 1), got {rho!r}", "risk_threshold", lines["risk_threshold"])
    seed = top.pop("seed", 0)
    bracket = (opt.pop("t_lo", 100.0), opt.pop("t_hi", 4000.0))
    optcfg = build(OptimizationConfig, dict(opt, risk_threshold_rho=rho, seed=seed, time_bracket=bracket), "opt.")
    domain = build(Domain, {k: top.pop(k) for k in ("x_lo", "y_lo", "x_hi", "y_hi")}, "domain.")
    vehicles = []
    for i in indices:
        state = build(VehicleState, vstate[i], f"vehicle.{i}.")
        params = build(VehicleParams, vparams.get(i, {}), f"vehicle.{i}.")
        sens = build(SensorParams, dict(sensor, **vsensor.get(i, {})), f"vehicle.{i}.sensor.")
        vehicles.append(VehicleSpec(state, params, sens))
    try:
        return Scenario(domain=domain, vehicles=vehicles, opt=optcfg, ripple=RippleSettings(**ripple), **top)
    except ScenarioError as exc:
        if exc.line is None and exc.key in lines:
            raise ScenarioError(str(exc).split(": ", 1)[-1], exc.key, lines[exc.key]) from None
        raise


_ATTR_TO_KEY = {}
for _table, _prefix in ((_SENSOR_KEYS, "sensor."), (_VEHICLE_KEYS, ""), (_STATE_KEYS, ""), (_OPT_KEYS, "opt."), (_RIPPLE_KEYS, "ripple.")):
    for _k, (_a, _) in _table.items():
        _ATTR_TO_KEY.setdefault(_prefix + _a, _prefix + _k)


def _blame(prefix, message):
    """Best-effort key name for a dataclass validation message."""
    attr = message.split()[0]
    if prefix.startswith("vehicle.") and prefix.endswith("sensor."):
        key = _ATTR_TO_KEY.get("sensor." + attr)
        return prefix + key[len("sensor."):] if key else prefix.rstrip(".")
    if prefix.startswith("vehicle."):
        key = _ATTR_TO_KEY.get(attr)
        return prefix + key if key else prefix.rstrip(".")
    if prefix == "opt.":
        if attr == "risk_threshold":
            return "risk_threshold"
        return _ATTR_TO_KEY.get("opt." + attr, "opt")
    return prefix.rstrip(".")


BUNDLED = ("survey_1vehicle.scn", "survey_2vehicle.scn", "desk_1vehicle.scn", "desk_2vehicle.scn")


def bundled_path(name: str) -> Path:
    """Filesystem path of a scenario shipped with the package."""
    if name not in BUNDLED:
        raise ScenarioError(f"no bundled scenario {name!r}; choose from {', '.join(BUNDLED)}")
    return Path(str(resources.files("mcmplan") / "data" / name))


def parse_scenario(path) -> Scenario:
    """Parse a scenario file; a bare bundled name (``survey_1vehicle.scn``) also works."""
    path = Path(path)
    if not path.exists() and str(path) in BUNDLED:
        path = bundled_path(str(path))
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc.strerror}") from None
    return parse_scenario_text(text, source=str(path))


def _deg_text(rad: float) -> str:
    """Shortest decimal degrees string that converts back to exactly ``rad``."""
    deg = math.degrees(rad)
    for cand in (deg, math.nextafter(deg, math.inf), math.nextafter(deg, -math.inf)):
        text = repr(cand)
        if math.radians(float(text)) == rad:
            return text
    probe = deg
    for _ in range(64):
        probe = math.nextafter(probe, math.inf if math.radians(probe) < rad else -math.inf)
        if math.radians(probe) == rad:
            return repr(probe)
    raise ValueError(f"no exact degree representation for {rad!r}")


def _fmt(value, kind):
    if kind == "deg" or kind == "degps":
        return _deg_text(value)
    if kind == "bool":
        return "on" if value else "off"
    if kind == "float":
        return repr(float(value))
    return str(value)


def format_scenario(s: Scenario) -> str:
    """Serialize so that ``parse_scenario_text(format_scenario(s)) == s``."""
    out = []
    add = out.append
    if s.label:
        add(f"label = {s.label}")
    add(f"seed = {s.seed}")
    add(f"length_scale = {s.length_scale!r}")
    for k in ("x_lo", "y_lo", "x_hi", "y_hi"):
        add(f"domain.{k} = {getattr(s.domain, k)!r}")
    add(f"risk_threshold = {s.risk_threshold!r}")
    add(f"mc_samples_opt = {s.mc_samples_opt}")
    add(f"mc_samples_report = {s.mc_samples_report}")
    add(f"dt = {s.dt!r}")
    add(f"ripples = {_fmt(s.ripples, 'bool')}")
    for key, (attr, kind) in _RIPPLE_KEYS.items():
        add(f"ripple.{key} = {_fmt(getattr(s.ripple, attr), kind)}")
    o = s.opt
    add(f"opt.t_lo = {float(o.time_bracket[0])!r}")
    add(f"opt.t_hi = {float(o.time_bracket[1])!r}")
    for key, (attr, kind) in _OPT_KEYS.items():
        if attr in ("t_lo", "t_hi"):
            continue
        add(f"opt.{key} = {_fmt(getattr(o, attr), kind)}")
    for i, v in enumerate(s.vehicles, 1):
        if not isinstance(v.sensor, SensorParams):
            raise ScenarioError("only sonar-model sensors can be written to a scenario file", key=f"vehicle.{i}.sensor")
        for key, (attr, kind) in _STATE_KEYS.items():
            add(f"vehicle.{i}.{key} = {_fmt(getattr(v.initial, attr), kind)}")
        for key, (attr, kind) in _VEHICLE_KEYS.items():
            add(f"vehicle.{i}.{key} = {_fmt(getattr(v.params, attr), kind)}")
        for key, (attr, kind) in _SENSOR_KEYS.items():
            add(f"vehicle.{i}.sensor.{key} = {_fmt(getattr(v.sensor, attr), kind)}")
    return "\n".join(out) + "\n"
