"""TOML run configuration.

Every key is optional; omitted keys take the reference-scenario defaults
(see ``README.md`` for the full grammar). Angles are radians given either as
numbers or as strings like ``"pi/6"``, ``"3*pi/4"`` or ``"-pi"``.
"""

from __future__ import annotations

import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .channel import AngleSet, ArrayAxes, Scene
from .geometry import SPEED_OF_LIGHT, GeometryError, Position3, ScenarioGeometry
from .harness import ExperimentConfig, default_trajectory

SUBCOMMANDS = ("noiseless", "snr-sweep", "elements-sweep", "compare-baseline")

DEFAULT_ANGLES = {
    "phi_br": ["pi/6", "pi/3", "pi/4"],
    "theta_br": ["pi/6", "pi/3", "pi/4"],
    "theta_rm": ["pi/6", "pi/3", "pi/4"],
    "theta_bm": "pi/3",
}

SCENE_DEFAULTS = {
    "bs": [0.0, 0.0, 10.0],
    "ris": [[30.0, 20.0, 20.0], [20.0, 40.0, 20.0], [40.0, 40.0, 20.0]],
    "ms": [60.0, 20.0],
    "ms_height": 0.0,
    "carrier_freq_hz": 2e9,
    "bs_spacing_wavelengths": 0.25,
    "ris_spacing_wavelengths": 0.25,
    "mu": 2.0,
    "n_bs": 20,
    "n_ris": [100, 100, 100],
    "pilot": [1.0, 0.0],
    "direct_link": True,
    "angle_mode": "explicit",
}

COMPARISON_DEFAULTS = {
    **SCENE_DEFAULTS,
    "ris": [[-300.0, 0.0, 20.0], [300.0, 300.0, 20.0], [300.0, -300.0, 20.0]],
    "ms": [150.0, -100.0],
    "bs_spacing_wavelengths": 1 / 150,
    "ris_spacing_wavelengths": 1 / 150,
    "n_ris": [10, 10, 10],
    "direct_link": False,
}

EXPERIMENT_DEFAULTS = {
    "trials": 500,
    "seed": 0,
    "snr_db": [0.0, 6.0, 12.0, 18.0, 24.0],
    "n_ris_grid": [25, 50, 100, 200],
    "elements_snr_db": 12.0,
    "sweep_points_per_element": 16,
    "repeats": 1,
    "workers": 1,
    "baseline_mode": False,
    "baseline_sweep": True,
}

_SCENE_KEYS = set(SCENE_DEFAULTS) | {"bs_spacing_m", "ris_spacing_m", "angles", "axes"}
_AXES_KEYS = {"bs", "ris"}
_TOP_KEYS = {"experiment", "scene", "comparison_scene", "trajectory"}
_PI_EXPR = re.compile(r"^\s*(-)?\s*(\d+(?:\.\d*)?)?\s*\*?\s*pi\s*(?:/\s*(\d+(?:\.\d*)?))?\s*$")


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid configuration:\n  " + "\n  ".join(problems))


@dataclass(frozen=True)
class RunConfig:
    experiment: ExperimentConfig
    comparison: ExperimentConfig
    trajectory: tuple[Position3, ...]
    subcommand: str | None = None
    out_dir: Path = field(default_factory=lambda: Path("."))


class _Reader:
    """Typed access to a config table that records problems under key paths."""

    def __init__(self, problems: list[str]):
        self.problems = problems

    def fail(self, key, msg):
        self.problems.append(f"{key}: {msg}")

    def check_keys(self, table, allowed, prefix):
        for k in table:
            if k not in allowed:
                self.fail(f"{prefix}{k}", "unknown key")

    def number(self, value, key):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(key, f"expected a number, got {type(value).__name__}")
            return None
        if not math.isfinite(value):
            self.fail(key, "must be finite")
            return None
        return float(value)

    def integer(self, value, key, minimum=None):
        if isinstance(value, bool) or not isinstance(value, int):
            self.fail(key, f"expected an integer, got {type(value).__name__}")
            return None
        if minimum is not None and value < minimum:
            self.fail(key, f"must be >= {minimum}")
            return None
        return value

    def boolean(self, value, key):
        if not isinstance(value, bool):
            self.fail(key, f"expected true/false, got {type(value).__name__}")
            return None
        return value

    def angle(self, value, key):
        if isinstance(value, str):
            m = _PI_EXPR.match(value)
            if not m:
                self.fail(key, f"cannot parse angle {value!r}")
                return None
            sign, mul, div = m.groups()
            a = (float(mul) if mul else 1.0) * math.pi / (float(div) if div else 1.0)
            a = -a if sign else a
        else:
            a = self.number(value, key)
            if a is None:
                return None
        if not 0 <= a <= math.pi + 1e-12:
            self.fail(key, "angle must lie in [0, pi]")
            return None
        return min(a, math.pi)

    def vector(self, value, key, lengths=(3,)):
        if not isinstance(value, list) or len(value) not in lengths:
            self.fail(key, f"expected a list of {' or '.join(map(str, lengths))} numbers")
            return None
        out = [self.number(v, f"{key}[{i}]") for i, v in enumerate(value)]
        return None if any(v is None for v in out) else out

    def triple(self, value, key, item):
        if not isinstance(value, list) or len(value) != 3:
            self.fail(key, "expected a list of three entries")
            return None
        out = [item(v, f"{key}[{i}]") for i, v in enumerate(value)]
        return None if any(v is None for v in out) else out


def _table(raw, key, r: _Reader):
    value = raw.get(key, {})
    if not isinstance(value, dict):
        r.fail(key, "expected a table")
        return {}
    return value


def _collinear_xy(points) -> bool:
    (x0, y0), (x1, y1), (x2, y2) = ((p[0], p[1]) for p in points)
    scale = max(abs(x1 - x0), abs(y1 - y0), abs(x2 - x0), abs(y2 - y0), 1.0)
    return abs((x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)) <= 1e-9 * scale * scale


def _scene(table: dict, defaults: dict, prefix: str, r: _Reader):
    r.check_keys(table, _SCENE_KEYS, f"{prefix}.")
    cfg = {**defaults, **{k: v for k, v in table.items() if k in SCENE_DEFAULTS}}
    key = lambda k: f"{prefix}.{k}"  # noqa: E731

    bs = r.vector(cfg["bs"], key("bs"))
    ris = r.triple(cfg["ris"], key("ris"), lambda v, k: r.vector(v, k))
    ms = r.vector(cfg["ms"], key("ms"), lengths=(2,))
    ms_height = r.number(cfg["ms_height"], key("ms_height"))
    freq = r.number(cfg["carrier_freq_hz"], key("carrier_freq_hz"))
    mu = r.number(cfg["mu"], key("mu"))
    n_bs = r.integer(cfg["n_bs"], key("n_bs"), minimum=1)
    n_ris_raw = cfg["n_ris"]
    if isinstance(n_ris_raw, int) and not isinstance(n_ris_raw, bool):
        n_ris_raw = [n_ris_raw] * 3
    n_ris = r.triple(n_ris_raw, key("n_ris"), lambda v, k: r.integer(v, k, minimum=1))
    pilot = r.vector(cfg["pilot"], key("pilot"), lengths=(2,))
    direct = r.boolean(cfg["direct_link"], key("direct_link"))
    mode = cfg["angle_mode"]
    if mode not in ("explicit", "derived"):
        r.fail(key("angle_mode"), "must be 'explicit' or 'derived'")

    if freq is not None and freq <= 0:
        r.fail(key("carrier_freq_hz"), "must be positive")
        freq = None
    if mu is not None and mu <= 0:
        r.fail(key("mu"), "must be positive")
    if pilot is not None and pilot == [0.0, 0.0]:
        r.fail(key("pilot"), "must be non-zero")
    if ris is not None and len({tuple(p) for p in ris}) < 3:
        r.fail(key("ris"), "RIS positions must be pairwise distinct")
    elif ris is not None and _collinear_xy(ris):
        r.fail(key("ris"), "RIS horizontal projections are collinear; trilateration is singular")

    spacings = {}
    for which in ("bs", "ris"):
        m_key, w_key = f"{which}_spacing_m", f"{which}_spacing_wavelengths"
        if m_key in table and w_key in table:
            r.fail(key(m_key), f"give only one of {m_key} / {w_key}")
            continue
        if m_key in table:
            val = r.number(table[m_key], key(m_key))
        else:
            w = r.number(cfg[w_key], key(w_key))
            val = None if (w is None or freq is None) else w * SPEED_OF_LIGHT / freq
        if val is not None and val <= 0:
            r.fail(key(m_key if m_key in table else w_key), "must be positive")
            val = None
        spacings[which] = val

    ang_table = _table(table, "angles", r) if "angles" in table else {}
    r.check_keys(ang_table, set(DEFAULT_ANGLES), f"{prefix}.angles.")
    ang_cfg = {**DEFAULT_ANGLES, **ang_table}
    angles = {
        k: r.triple(ang_cfg[k], key(f"angles.{k}"), r.angle)
        for k in ("phi_br", "theta_br", "theta_rm")
    }
    theta_bm = r.angle(ang_cfg["theta_bm"], key("angles.theta_bm"))

    axes_table = _table(table, "axes", r) if "axes" in table else {}
    r.check_keys(axes_table, _AXES_KEYS, f"{prefix}.axes.")
    bs_axis = r.vector(axes_table.get("bs", [1.0, 0.0, 0.0]), key("axes.bs"))
    ris_axes = r.triple(axes_table.get("ris", [[1.0, 0.0, 0.0]] * 3), key("axes.ris"),
                        lambda v, k: r.vector(v, k))
    for k, vec in [("axes.bs", bs_axis)] + [
        (f"axes.ris[{i}]", v) for i, v in enumerate(ris_axes or [])
    ]:
        if vec is not None and not any(vec):
            r.fail(key(k), "axis must be non-zero")

    if r.problems:
        return None
    try:
        geometry = ScenarioGeometry(
            bs=Position3.of(bs),
            ris=tuple(Position3.of(p) for p in ris),
            ms_true=Position3(ms[0], ms[1], ms_height),
            carrier_freq=freq,
            bs_spacing=spacings["bs"],
            ris_spacing=spacings["ris"],
            mu=mu,
        )
        return Scene(
            geometry=geometry,
            n_bs=n_bs,
            n_ris=tuple(n_ris),
            angles=AngleSet(
                phi_br=tuple(angles["phi_br"]),
                theta_br=tuple(angles["theta_br"]),
                theta_rm=tuple(angles["theta_rm"]),
                theta_bm=theta_bm,
            ),
            pilot=complex(pilot[0], pilot[1]),
            direct_link=direct,
            angle_mode=mode,
            axes=ArrayAxes(bs=tuple(bs_axis), ris=tuple(tuple(a) for a in ris_axes)),
        )
    except (GeometryError, ValueError) as exc:
        r.fail(prefix, str(exc))
        return None


def _experiment_fields(table: dict, r: _Reader):
    r.check_keys(table, set(EXPERIMENT_DEFAULTS), "experiment.")
    cfg = {**EXPERIMENT_DEFAULTS, **table}
    out = {
        "trials": r.integer(cfg["trials"], "experiment.trials", minimum=1),
        "master_seed": r.integer(cfg["seed"], "experiment.seed"),
        "sweep_points_per_element": r.integer(
            cfg["sweep_points_per_element"], "experiment.sweep_points_per_element", minimum=1
        ),
        "repeats": r.integer(cfg["repeats"], "experiment.repeats", minimum=1),
        "workers": r.integer(cfg["workers"], "experiment.workers", minimum=1),
        "baseline_mode": r.boolean(cfg["baseline_mode"], "experiment.baseline_mode"),
        "baseline_sweep": r.boolean(cfg["baseline_sweep"], "experiment.baseline_sweep"),
        "elements_snr_db": r.number(cfg["elements_snr_db"], "experiment.elements_snr_db"),
    }
    for name, item in (("snr_db", r.number), ("n_ris_grid", None)):
        value = cfg[name]
        key = f"experiment.{name}"
        if not isinstance(value, list) or not value:
            r.fail(key, "expected a non-empty list")
            out[name] = None
            continue
        if item is None:
            vals = [r.integer(v, f"{key}[{i}]", minimum=1) for i, v in enumerate(value)]
        else:
            vals = [item(v, f"{key}[{i}]") for i, v in enumerate(value)]
        out[name] = None if any(v is None for v in vals) else tuple(vals)
    out["snr_grid"] = out.pop("snr_db")
    return out


def _trajectory(table: dict, r: _Reader, height: float):
    r.check_keys(table, {"points"}, "trajectory.")
    if "points" not in table:
        return tuple(Position3(p.x, p.y, height) for p in default_trajectory())
    pts = table["points"]
    if not isinstance(pts, list) or not pts:
        r.fail("trajectory.points", "expected a non-empty list of [x, y] pairs")
        return ()
    out = []
    for i, p in enumerate(pts):
        v = r.vector(p, f"trajectory.points[{i}]", lengths=(2,))
        if v is not None:
            out.append(Position3(v[0], v[1], height))
    return tuple(out)


def parse_config(text: str) -> RunConfig:
    """Parse and fully validate a TOML configuration string.

    Raises :class:`ConfigError` listing every problem found, each prefixed
    with the dotted key path it concerns.
    """
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"<syntax>: {exc}"]) from None
    problems: list[str] = []
    r = _Reader(problems)
    r.check_keys(raw, _TOP_KEYS, "")
    exp = _experiment_fields(_table(raw, "experiment", r), r)
    scene = _scene(_table(raw, "scene", r), SCENE_DEFAULTS, "scene", r)
    comp = _scene(_table(raw, "comparison_scene", r), COMPARISON_DEFAULTS, "comparison_scene", r)
    height = scene.geometry.ms_true.z if scene is not None else 0.0
    traj = _trajectory(_table(raw, "trajectory", r), r, height)
    if problems:
        raise ConfigError(problems)
    try:
        return RunConfig(
            experiment=ExperimentConfig(scene=scene, **exp),
            comparison=ExperimentConfig(scene=comp, **exp),
            trajectory=traj,
        )
    except ValueError as exc:
        raise ConfigError([f"experiment: {exc}"]) from None


def load_config(path: str | Path) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))
