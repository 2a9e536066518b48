"""Run configuration: JSON file with sections plant, design, sim and output.

Every key is optional and defaults to the published example. Unknown keys
are rejected so that a misspelt physical constant cannot pass silently.

Example::

    {
      "plant": {"M": 0.2, "K": 0.01, "L": 0.5, "R": 10, "g": 9.8, "E": 8,
                "use_paper_rounding": true},
      "design": {"poles": [-5, -10, -20],
                 "observer_poles": [-15, -30, -60],
                 "q_diag": [9, 0, 0], "r": 1},
      "sim": {"dt": 1e-4, "t_final": 50, "v_ref": 0,
              "x0": [0.01, 0, 0], "xhat0": [0, 0, 0]},
      "output": {"path": "trace.csv"}
    }

Poles may be numbers, strings such as ``"-2+3j"`` or ``[re, im]`` pairs.
"""

import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional

from .design import DEFAULT_OBSERVER_POLES, DEFAULT_POLES
from .errors import ConfigError
from .plant import PlantParams
from .sim import validate_timing

SCHEMA = {
    "plant": {"M", "K", "L", "R", "g", "E", "use_paper_rounding",
              "operating_point"},
    "design": {"poles", "observer_poles", "q_diag", "r"},
    "sim": {"dt", "t_final", "v_ref", "x0", "xhat0"},
    "output": {"path"},
}


@dataclass(frozen=True)
class RunConfig:
    plant: dict = field(default_factory=lambda: {
        "M": 0.2, "K": 0.01, "L": 0.5, "R": 10.0, "g": 9.8, "E": 8.0})
    use_paper_rounding: bool = False
    # linearization point override, absolute (x1, x2, x3)
    operating_point: Optional[tuple] = None
    poles: tuple = DEFAULT_POLES
    observer_poles: tuple = DEFAULT_OBSERVER_POLES
    q_diag: tuple = (9.0, 0.0, 0.0)
    r_weight: float = 1.0
    dt: float = 1e-4
    t_final: float = 50.0
    v_ref: float = 0.0
    x0: Optional[tuple] = None
    xhat0: Optional[tuple] = None
    output_path: Optional[str] = None

    @property
    def params(self):
        return PlantParams(**self.plant)


def _number(value, where, problems):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        problems.append(f"{where}: expected a number, got {value!r}")
        return None
    if not math.isfinite(value):
        problems.append(f"{where}: must be finite")
        return None
    return float(value)


def _vector(value, where, problems, length=3):
    if not isinstance(value, list) or len(value) != length:
        problems.append(f"{where}: expected a list of {length} numbers")
        return None
    out = [_number(v, f"{where}[{i}]", problems) for i, v in enumerate(value)]
    return None if any(v is None for v in out) else tuple(out)


def _pole(value, where, problems):
    try:
        if isinstance(value, str):
            c = complex(value.replace(" ", ""))
        elif isinstance(value, list) and len(value) == 2:
            c = complex(float(value[0]), float(value[1]))
        elif isinstance(value, (int, float)) and not isinstance(value, bool):
            c = complex(value)
        else:
            raise ValueError
    except (TypeError, ValueError):
        problems.append(f"{where}: cannot read {value!r} as a pole")
        return None
    if not (math.isfinite(c.real) and math.isfinite(c.imag)):
        problems.append(f"{where}: must be finite")
        return None
    return c if c.imag else c.real


def _poles(value, where, problems):
    if not isinstance(value, list) or len(value) != 3:
        problems.append(f"{where}: expected a list of 3 poles")
        return None
    out = [_pole(v, f"{where}[{i}]", problems) for i, v in enumerate(value)]
    if any(v is None for v in out):
        return None
    for i, v in enumerate(out):
        if complex(v).real >= 0:
            problems.append(f"{where}[{i}]: pole {v} is not in the open left half plane")
    # conjugate closure
    rest = [complex(v) for v in out]
    while rest:
        c = rest.pop()
        if abs(c.imag) > 0:
            match = [j for j, d in enumerate(rest) if abs(d - c.conjugate()) <= 1e-9 * max(1, abs(c))]
            if not match:
                problems.append(f"{where}: {c} has no conjugate partner")
                continue
            rest.pop(match[0])
    return tuple(out)


def parse_config(data, overrides=None):
    """Build and validate a :class:`RunConfig` from a decoded JSON object.

    ``overrides`` maps flat keys (``dt``, ``t_final``, ``x0``,
    ``output_path``) to values that replace the file's settings.

    Raises
    ------
    ConfigError
        Listing every problem found, not just the first.
    """
    problems = []
    if not isinstance(data, dict):
        raise ConfigError("top level must be an object")
    for section, body in data.items():
        if section not in SCHEMA:
            problems.append(f"unknown section {section!r}")
            continue
        if not isinstance(body, dict):
            problems.append(f"{section}: must be an object")
            continue
        for key in body:
            if key not in SCHEMA[section]:
                problems.append(f"unknown key {section}.{key}")

    def get(section, key):
        body = data.get(section)
        return body.get(key) if isinstance(body, dict) else None

    base = RunConfig()
    kw = {}

    plant = dict(base.plant)
    for key in ("M", "K", "L", "R", "g", "E"):
        raw = get("plant", key)
        if raw is not None:
            v = _number(raw, f"plant.{key}", problems)
            if v is not None:
                plant[key] = v
    for key in ("M", "K", "L", "R", "g"):
        if plant[key] <= 0:
            problems.append(f"plant.{key}: must be > 0, got {plant[key]}")
    if plant["E"] < 0:
        problems.append(f"plant.E: must be >= 0, got {plant['E']}")
    elif plant["E"] == 0:
        problems.append("plant.E = 0 gives a degenerate equilibrium (ball at the magnet)")
    kw["plant"] = plant

    raw = get("plant", "use_paper_rounding")
    if raw is not None:
        if isinstance(raw, bool):
            kw["use_paper_rounding"] = raw
        else:
            problems.append("plant.use_paper_rounding: expected true or false")
    raw = get("plant", "operating_point")
    if raw is not None:
        op = _vector(raw, "plant.operating_point", problems)
        if op is not None and op[0] <= 0:
            problems.append("plant.operating_point: x1 must be > 0 (degenerate equilibrium)")
        kw["operating_point"] = op

    for key, name in (("poles", "poles"), ("observer_poles", "observer_poles")):
        raw = get("design", key)
        if raw is not None:
            kw[name] = _poles(raw, f"design.{key}", problems)
    raw = get("design", "q_diag")
    if raw is not None:
        q = _vector(raw, "design.q_diag", problems)
        if q is not None and min(q) < 0:
            problems.append("design.q_diag: entries must be >= 0")
        kw["q_diag"] = q
    raw = get("design", "r")
    if raw is not None:
        r = _number(raw, "design.r", problems)
        if r is not None and r <= 0:
            problems.append("design.r: must be > 0")
        kw["r_weight"] = r

    for key in ("dt", "t_final", "v_ref"):
        raw = get("sim", key)
        if raw is not None:
            kw[key] = _number(raw, f"sim.{key}", problems)
    for key in ("x0", "xhat0"):
        raw = get("sim", key)
        if raw is not None:
            kw[key] = _vector(raw, f"sim.{key}", problems)
    raw = get("output", "path")
    if raw is not None:
        if isinstance(raw, str) and raw:
            kw["output_path"] = raw
        else:
            problems.append("output.path: expected a non-empty string")

    for key, value in (overrides or {}).items():
        if value is not None:
            kw[key] = value

    dt = kw.get("dt", base.dt)
    t_final = kw.get("t_final", base.t_final)
    if dt is not None and t_final is not None:
        problems.extend(validate_timing(dt, t_final))

    if problems:
        raise ConfigError(problems)
    return replace(base, **kw)


def load_config(path, overrides=None):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return parse_config(data, overrides)
