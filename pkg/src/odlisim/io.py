"""File formats: trajectory logs, run configs, and analysis table emission.

Trajectory logs are comma-delimited text with a header row, a units row,
and one row per sample; a JSON sidecar (<path>.meta.json) carries the
scenario, the trigger time, and rollout flags.  Floats are written with
shortest round-trip formatting, so save/load is lossless and byte-stable
for identical inputs.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from .core import KinematicLimits, RoadSpec, VehicleSpec
from .engine import TrajectoryLog
from .policies import PolicySpec
from .reach import DrivableArea, Prevalence, PredictionConfig, Timeline
from .responses import SequenceGraph
from .scenario import ScenarioSpec, ScenarioTiming


class ParseError(ValueError):
    """Structured file-format error: carries the offending row when known."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        super().__init__(message if row is None else f"row {row}: {message}")


_REQUIRED_COLS = ("t", "sv_x", "sv_y", "sv_vx", "sv_vy",
                  "pov_x", "pov_y", "pov_vx", "pov_vy",
                  "accel_pct", "brake_pct", "steer_deg")
_OPTIONAL_COLS = ("sv_ax", "sv_ay", "pov_ax", "pov_ay")
_ALL_COLS = ("t", "sv_x", "sv_y", "sv_vx", "sv_vy", "sv_ax", "sv_ay",
             "pov_x", "pov_y", "pov_vx", "pov_vy", "pov_ax", "pov_ay",
             "accel_pct", "brake_pct", "steer_deg")
_UNITS = {"t": "s", "x": "m", "y": "m", "vx": "m/s", "vy": "m/s",
          "ax": "m/s2", "ay": "m/s2", "accel_pct": "%", "brake_pct": "%",
          "steer_deg": "deg"}


def _fmt(v: float) -> str:
    return repr(float(v))


def _unit_of(col: str) -> str:
    key = col.split("_", 1)[1] if col.startswith(("sv_", "pov_")) else col
    return _UNITS.get(key, _UNITS.get(col, "-"))


def save_trajectory_log(log: TrajectoryLog, path: str | Path) -> None:
    path = Path(path)
    lines = [",".join(_ALL_COLS), ",".join(_unit_of(c) for c in _ALL_COLS)]
    cols = []
    for c in _ALL_COLS:
        if c == "t":
            cols.append(log.t)
        elif c.startswith("sv_"):
            cols.append(log.sv[c[3:]])
        elif c.startswith("pov_"):
            cols.append(log.pov[c[4:]])
        else:
            cols.append(log.controls[c])
    for i in range(len(log)):
        lines.append(",".join(_fmt(col[i]) for col in cols))
    path.write_text("\n".join(lines) + "\n")

    meta = {
        "dt": log.dt,
        "t_trigger": log.timing.t_trigger,
        "t_critical": log.timing.t_critical,
        "scenario": scenario_to_dict(log.scenario),
        "policy": dataclasses.asdict(log.policy) if log.policy else None,
        "collided": log.collided,
        "t_collision": log.t_collision,
        "complete": log.complete,
    }
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def sidecar_path(path: str | Path) -> Path:
    return Path(str(path) + ".meta.json")


def load_trajectory_log(path: str | Path) -> TrajectoryLog:
    path = Path(path)
    meta_path = sidecar_path(path)
    if not meta_path.exists():
        raise ParseError(f"missing metadata sidecar {meta_path}")
    meta = json.loads(meta_path.read_text())
    scenario = scenario_from_dict(meta["scenario"])
    timing = ScenarioTiming(meta["t_trigger"], meta["t_critical"])

    lines = path.read_text().splitlines()
    if len(lines) < 3:
        raise ParseError("log file needs a header, a units row, and data")
    header = lines[0].split(",")
    for col in _REQUIRED_COLS:
        if col not in header:
            raise ParseError(f"missing required column {col!r}")
    idx = {c: header.index(c) for c in header}

    n = len(lines) - 2
    data = {c: np.full(n, np.nan) for c in set(header) | set(_OPTIONAL_COLS)}
    for r, line in enumerate(lines[2:]):
        parts = line.split(",")
        if len(parts) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(parts)}", row=r + 3)
        for c, i in idx.items():
            try:
                data[c][r] = float(parts[i])
            except ValueError as exc:
                raise ParseError(f"bad value in column {c!r}: {parts[i]!r}",
                                 row=r + 3) from exc

    t = data["t"]
    steps = np.diff(t)
    bad = np.nonzero(steps <= 0)[0]
    if len(bad):
        raise ParseError("non-monotone timestamps", row=int(bad[0]) + 3)
    dt = float(meta["dt"])
    off = np.nonzero(~np.isclose(steps, dt, rtol=0, atol=1e-9))[0]
    if len(off):
        raise ParseError(f"sample spacing differs from dt={dt}", row=int(off[0]) + 3)

    return TrajectoryLog(
        dt=dt, t=t,
        sv={k: data[f"sv_{k}"] for k in ("x", "y", "vx", "vy", "ax", "ay")},
        pov={k: data[f"pov_{k}"] for k in ("x", "y", "vx", "vy", "ax", "ay")},
        controls={k: data[k] for k in ("accel_pct", "brake_pct", "steer_deg")},
        scenario=scenario, timing=timing,
        policy=PolicySpec(**meta["policy"]) if meta.get("policy") else None,
        collided=bool(meta.get("collided", False)),
        t_collision=meta.get("t_collision"),
        complete=bool(meta.get("complete", True)))


def scenario_to_dict(spec: ScenarioSpec) -> dict:
    d = dataclasses.asdict(spec)
    d["ctrl_fracs"] = list(spec.ctrl_fracs)
    return d


def scenario_from_dict(d: dict) -> ScenarioSpec:
    d = dict(d)
    d["road"] = RoadSpec(**d["road"])
    d["sv_spec"] = VehicleSpec(**d["sv_spec"])
    d["pov_spec"] = VehicleSpec(**d["pov_spec"])
    d["ctrl_fracs"] = tuple(d.get("ctrl_fracs", (0.35, 0.65)))
    return ScenarioSpec(**d)


def prediction_to_dict(config: PredictionConfig) -> dict:
    return dataclasses.asdict(config)


def prediction_from_dict(d: dict) -> PredictionConfig:
    d = dict(d)
    d["sv_limits"] = KinematicLimits(**d["sv_limits"])
    d["pov_limits"] = KinematicLimits(**d["pov_limits"])
    return PredictionConfig(**d)


def default_run_config(incursion_level: float = 0.0) -> dict:
    """Reference config carrying every tunable constant as a named default."""
    from .scenario import make_scenario

    scenario = make_scenario(incursion_level)
    policies = [
        {"kind": "no-response", "count": 2},
        {"kind": "brake-only", "count": 3, "reaction_delay": 1.6, "brake_level": "hard"},
        {"kind": "brake-then-steer-center", "count": 5, "reaction_delay": 1.5,
         "brake_level": "soft", "reversal_delay": 1.3, "steer_target": 15.0},
        {"kind": "steer-center-only", "count": 4, "reaction_delay": 2.0,
         "steer_target": 20.0},
        {"kind": "steer-shoulder-only", "count": 4, "reaction_delay": 1.2,
         "steer_target": 10.0},
        {"kind": "shoulder-then-reversal", "count": 2, "reaction_delay": 1.2,
         "reversal_delay": 1.3, "steer_target": 10.0, "reversal_target": 15.0},
    ]
    return {
        "seed": 0,
        "output_dir": "out",
        "scenario": dict(scenario_to_dict(scenario), t_trigger=1.0),
        "policies": policies,
        "prediction": prediction_to_dict(PredictionConfig()),
        "analysis": {
            "dt": 0.01,
            "eval_step": 0.1,
            "bootstrap_samples": 1000,
            "delay_jitter": 0.2,
            "window_reaction_floor": 0.4,
            "accel_release_pct": 3.0,
            "brake_onset_pct": 15.0,
            "steer_onset_deg": 5.0,
        },
    }


def save_run_config(config: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config, indent=2, sort_keys=True) + "\n")


def load_run_config(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ParseError(f"config file not found: {path}")
    return json.loads(path.read_text())


def config_scenario(config: dict) -> tuple[ScenarioSpec, ScenarioTiming]:
    d = dict(config["scenario"])
    t_trigger = d.pop("t_trigger", 1.0)
    spec = scenario_from_dict(d)
    return spec, ScenarioTiming(t_trigger, t_trigger + spec.time_gap_trigger)


def config_policies(config: dict) -> list[tuple[PolicySpec, int]]:
    out = []
    for entry in config.get("policies", []):
        d = dict(entry)
        count = int(d.pop("count", 1))
        out.append((PolicySpec(**d), count))
    return out


def config_prediction(config: dict) -> PredictionConfig:
    return prediction_from_dict(config["prediction"])


def write_table(path: str | Path, header: list[str], units: list[str],
                 rows: list[list]) -> None:
    lines = [",".join(header), ",".join(units)]
    for row in rows:
        lines.append(",".join(_fmt(v) if isinstance(v, float) else str(v)
                              for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def emit_prevalence(prev: Prevalence, path: str | Path) -> None:
    rows = [[float(prev.rel_t[i]), float(prev.fraction[i]), float(prev.ci_lo[i]),
             float(prev.ci_hi[i]), int(prev.n_extrapolated[i])]
            for i in range(len(prev.rel_t))]
    write_table(path, ["rel_t", "fraction", "ci_lo", "ci_hi", "n_extrapolated"],
                 ["s", "-", "-", "-", "count"], rows)


def emit_timeline(timeline: Timeline, path: str | Path) -> None:
    rows = [[float(timeline.t[i]), float(timeline.rel_t[i]),
             int(timeline.exists[i]), timeline.mode[i]]
            for i in range(len(timeline.t))]
    write_table(path, ["t", "rel_t", "exists", "mode"], ["s", "s", "0/1", "-"], rows)


def _node_name(node) -> str:
    if isinstance(node, tuple):
        return "|".join(node)
    return str(node)


def emit_sequence_graph(graph: SequenceGraph, path: str | Path) -> None:
    """Node/edge table; initial-ring counts appear as rows with kind=initial."""
    rows = []
    for node in sorted(graph.initial):
        rows.append(["initial", "-", _node_name(node), graph.initial[node]])
    for (a, b) in sorted(graph.edges, key=lambda e: (_node_name(e[0]), _node_name(e[1]))):
        kind = "outcome" if isinstance(b, str) else "transition"
        rows.append([kind, _node_name(a), _node_name(b), graph.edges[(a, b)]])
    write_table(path, ["kind", "from", "to", "count"], ["-", "-", "-", "count"], rows)


def emit_reach_snapshot(area: DrivableArea, path: str | Path,
                        svg_path: str | Path | None = None,
                        sv_rect=None, pov_rect=None) -> None:
    """Grid snapshot of SV (pruned) and POV layers, one row per occupied cell."""
    rows = []
    for name, layers in (("sv", area.layers), ("pov", area.pov_layers)):
        for layer in layers:
            w = layer.window
            ii, jj = np.nonzero(layer.mask)
            for i, j in zip(ii, jj):
                ix, iy = int(i) + w.ox, int(j) + w.oy
                rows.append([name, float(layer.tau), ix, iy,
                             ix * w.dx, (ix + 1) * w.dx,
                             iy * w.dy, (iy + 1) * w.dy])
    write_table(path, ["vehicle", "tau", "ix", "iy", "x_lo", "x_hi", "y_lo", "y_hi"],
                 ["-", "s", "-", "-", "m", "m", "m", "m"], rows)
    if svg_path is not None:
        Path(svg_path).write_text(render_snapshot_svg(area, sv_rect, pov_rect))


def render_snapshot_svg(area: DrivableArea, sv_rect=None, pov_rect=None,
                        layer_stride: int = 5, scale: float = 4.0) -> str:
    """Compact SVG: layers colored by future time, vehicles as dark boxes."""
    xs, ys = [], []
    for layers in (area.layers, area.pov_layers):
        for layer in layers:
            hull = layer.position_hull()
            if hull:
                xs.extend(hull[0])
                ys.extend(hull[1])
    for rect in (sv_rect, pov_rect):
        if rect is not None:
            xs.extend([rect.x_lo, rect.x_hi])
            ys.extend([rect.y_lo, rect.y_hi])
    if not xs:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    x0, x1 = min(xs) - 2, max(xs) + 2
    y0, y1 = min(ys) - 2, max(ys) + 2
    width = (x1 - x0) * scale
    height = (y1 - y0) * scale

    def rect_svg(rx_lo, rx_hi, ry_lo, ry_hi, color, opacity):
        # Screen y grows downward; flip the lateral axis.
        px = (rx_lo - x0) * scale
        py = (y1 - ry_hi) * scale
        return (f'<rect x="{px:.2f}" y="{py:.2f}" '
                f'width="{(rx_hi - rx_lo) * scale:.2f}" '
                f'height="{(ry_hi - ry_lo) * scale:.2f}" '
                f'fill="{color}" fill-opacity="{opacity:.2f}"/>')

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
             f'height="{height:.0f}" viewBox="0 0 {width:.2f} {height:.2f}">',
             '<rect width="100%" height="100%" fill="white"/>']
    for name, layers, color in (("pov", area.pov_layers, "#cc2222"),
                                ("sv", area.layers, "#2244cc")):
        n = len(layers)
        for k in range(0, n, layer_stride):
            layer = layers[k]
            if layer.empty:
                continue
            opacity = 0.15 + 0.5 * (1.0 - k / max(n - 1, 1))
            w = layer.window
            ii, jj = np.nonzero(layer.mask)
            for i, j in zip(ii, jj):
                ix, iy = int(i) + w.ox, int(j) + w.oy
                parts.append(rect_svg(ix * w.dx, (ix + 1) * w.dx,
                                      iy * w.dy, (iy + 1) * w.dy, color, opacity))
    for rect, color in ((sv_rect, "#111133"), (pov_rect, "#331111")):
        if rect is not None:
            parts.append(rect_svg(rect.x_lo, rect.x_hi, rect.y_lo, rect.y_hi, color, 1.0))
    parts.append("</svg>")
    return "\n".join(parts)


def emit_run_metrics(rows: list[dict], path: str | Path) -> None:
    """Per-run response metrics table for a simulated cohort."""
    header = ["run", "policy", "outcome", "sideswipe", "t_p",
              "rt_accel_release", "rt_brake_onset", "rt_steer_shoulder",
              "rt_steer_center", "initial_reaction", "evasive_response"]
    units = ["-", "-", "-", "0/1", "s", "s", "s", "s", "s", "s", "s"]
    table = []
    for row in rows:
        table.append([row[h] if row[h] is not None else "nan" for h in header])
    write_table(path, header, units, table)


def load_table(path: str | Path) -> tuple[list[str], list[str], list[list[str]]]:
    """Read back a header + units + rows table emitted by this module."""
    lines = Path(path).read_text().splitlines()
    if len(lines) < 2:
        raise ParseError("table needs a header and a units row")
    return lines[0].split(","), lines[1].split(","), [l.split(",") for l in lines[2:]]
