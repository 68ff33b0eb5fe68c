"""Command-line surface tying the pipeline together.

Every command takes a run-config path plus overrides, is deterministic
given config + seed, and exits 0 on success or 1 with a machine-readable
JSON error on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io, oracle, reach, responses
from .core import footprint
from .engine import classify_outcome, rollout, run_cohort
from .policies import POLICY_KINDS, PolicySpec


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="odlisim")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="run config JSON")
        p.add_argument("--il", type=float, default=None, help="incursion level override")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--dt", type=float, default=None, help="simulation step override")
        p.add_argument("--grid-dx", type=float, default=None)
        p.add_argument("--horizon", type=float, default=None)
        p.add_argument("--road-pruning", choices=["corridor", "off"], default=None)
        p.add_argument("--out", default=None, help="output file or directory")

    scenario = sub.add_parser("scenario").add_subparsers(dest="subcommand", required=True)
    gen = scenario.add_parser("gen", help="write a reference config with named defaults")
    add_common(gen, config_required=False)

    sim = sub.add_parser("simulate", help="roll out the configured policy cohort")
    add_common(sim)
    sim.add_argument("--policy", choices=POLICY_KINDS, default=None,
                     help="replace the cohort with a single run of this policy")

    analyze = sub.add_parser("analyze").add_subparsers(dest="subcommand", required=True)
    resp = analyze.add_parser("responses", help="per-run response metrics table")
    add_common(resp)
    resp.add_argument("--logs", required=True, help="directory of trajectory logs")
    seq = analyze.add_parser("sequence", help="cohort control-state sequence graph")
    add_common(seq)
    seq.add_argument("--logs", required=True)

    reach_p = sub.add_parser("reach").add_subparsers(dest="subcommand", required=True)
    comp = reach_p.add_parser("compute", help="drivable-area snapshot at one time")
    add_common(comp)
    comp.add_argument("--log", required=True)
    comp.add_argument("--t", type=float, required=True, help="anchor time, s")
    timeline = reach_p.add_parser("timeline", help="drivable-area existence series")
    add_common(timeline)
    timeline.add_argument("--log", required=True)
    timeline.add_argument("--eval-step", type=float, default=None)
    agg = reach_p.add_parser("aggregate", help="cohort drivable-area prevalence")
    add_common(agg)
    agg.add_argument("--logs", required=True)
    agg.add_argument("--eval-step", type=float, default=None)

    orc = sub.add_parser("oracle").add_subparsers(dest="subcommand", required=True)
    verify = orc.add_parser("verify", help="sampling-based soundness certificate")
    add_common(verify)
    verify.add_argument("--n", type=int, default=2000, help="random trajectories per check")
    verify.add_argument("--anchors", type=int, default=5, help="anchor times per run")

    return parser


def _apply_overrides(config: dict, args) -> dict:
    if args.il is not None:
        from .scenario import make_scenario

        base = io.scenario_to_dict(make_scenario(args.il))
        sc = dict(config["scenario"])
        sc.update(incursion_level=args.il,
                  end_heading_mode=base["end_heading_mode"],
                  post_tc_behavior=base["post_tc_behavior"])
        config = dict(config, scenario=sc)
    if args.seed is not None:
        config = dict(config, seed=args.seed)
    if args.dt is not None:
        config = dict(config, analysis=dict(config["analysis"], dt=args.dt))
    pred = dict(config["prediction"])
    if args.grid_dx is not None:
        pred["grid_dx"] = args.grid_dx
    if args.horizon is not None:
        pred["horizon"] = args.horizon
    if args.road_pruning is not None:
        pred["road_pruning"] = args.road_pruning
    return dict(config, prediction=pred)


def _load(args) -> dict:
    return _apply_overrides(io.load_run_config(args.config), args)


def _out_dir(config: dict, args) -> Path:
    out = Path(args.out) if args.out else Path(config.get("output_dir", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_logs(directory: str) -> list:
    paths = sorted(Path(directory).glob("run_*.csv"))
    if not paths:
        raise io.ParseError(f"no run_*.csv logs under {directory}")
    return [io.load_trajectory_log(p) for p in paths]


def _cmd_scenario_gen(args) -> int:
    config = io.default_run_config(args.il if args.il is not None else 0.0)
    config = _apply_overrides(config, args)
    out = Path(args.out) if args.out else Path("run_config.json")
    io.save_run_config(config, out)
    print(f"wrote {out}")
    return 0


def _cmd_simulate(args) -> int:
    config = _load(args)
    scenario, timing = io.config_scenario(config)
    dt = float(config["analysis"]["dt"])
    out = _out_dir(config, args)
    if args.policy:
        cohort = [(PolicySpec(kind=args.policy), 1)]
    else:
        cohort = io.config_policies(config)
    logs = run_cohort(scenario, cohort, dt=dt, seed=int(config.get("seed", 0)),
                      delay_jitter=float(config["analysis"].get("delay_jitter", 0.0)),
                      timing=timing)
    rows = []
    for i, log in enumerate(logs):
        io.save_trajectory_log(log, out / f"run_{i:03d}.csv")
        outcome = classify_outcome(log)
        rows.append([i, log.policy.kind, outcome.kind, int(outcome.sideswipe),
                     outcome.t_p, outcome.lateral_clearance])
    io.write_table(out / "outcomes.csv",
                    ["run", "policy", "outcome", "sideswipe", "t_p", "lateral_clearance"],
                    ["-", "-", "-", "0/1", "s", "m"], rows)
    print(f"wrote {len(logs)} logs to {out}")
    return 0


def _cmd_analyze_responses(args) -> int:
    config = _load(args)
    out = _out_dir(config, args)
    an = config["analysis"]
    rows = []
    for i, log in enumerate(_load_logs(args.logs)):
        summary = responses.analyze_run(
            log, reaction_floor=float(an.get("window_reaction_floor", 0.4)),
            accel_release_pct=float(an.get("accel_release_pct", 3.0)),
            brake_onset_pct=float(an.get("brake_onset_pct", 15.0)),
            steer_onset_deg=float(an.get("steer_onset_deg", 5.0)))
        times = summary["times"]
        rows.append({
            "run": i,
            "policy": log.policy.kind if log.policy else "-",
            "outcome": summary["outcome"].kind,
            "sideswipe": int(summary["outcome"].sideswipe),
            "t_p": summary["outcome"].t_p,
            "rt_accel_release": times.per_kind["accel-release"],
            "rt_brake_onset": times.per_kind["brake-onset"],
            "rt_steer_shoulder": times.per_kind["steer-shoulder"],
            "rt_steer_center": times.per_kind["steer-center"],
            "initial_reaction": times.initial_reaction,
            "evasive_response": times.evasive_response,
        })
    path = out / "response_metrics.csv"
    io.emit_run_metrics(rows, path)
    print(f"wrote {path}")
    return 0


def _cmd_analyze_sequence(args) -> int:
    config = _load(args)
    out = _out_dir(config, args)
    runs = []
    for log in _load_logs(args.logs):
        window = responses.window_for(log)
        runs.append((log, window, classify_outcome(log).kind))
    graph = responses.build_sequence_graph(runs)
    imbalance = graph.flow_imbalance()
    if imbalance:
        raise RuntimeError(f"sequence graph flow imbalance: {imbalance}")
    path = out / "sequence_graph.csv"
    io.emit_sequence_graph(graph, path)
    print(f"wrote {path} ({graph.n_runs} runs, {sum(graph.edges.values())} edges)")
    return 0


def _cmd_reach_compute(args) -> int:
    config = _load(args)
    out = _out_dir(config, args)
    log = io.load_trajectory_log(args.log)
    pred = io.config_prediction(config)
    i = log.index_at(args.t)
    road = log.scenario.road
    mode = reach.pov_prediction_mode(log.pov["y"][:i + 1], road.lane_width,
                                     pred.incursion_detect_threshold)
    area = reach.compute_drivable_area(log.sv_state(i), log.pov_state(i), pred,
                                       road, log.scenario.sv_spec,
                                       log.scenario.pov_spec, mode=mode)
    sv_rect = footprint(log.sv_state(i), log.scenario.sv_spec)
    pov_rect = footprint(log.pov_state(i), log.scenario.pov_spec)
    path = out / f"reach_t{args.t:.2f}.csv"
    io.emit_reach_snapshot(area, path, svg_path=out / f"reach_t{args.t:.2f}.svg",
                           sv_rect=sv_rect, pov_rect=pov_rect)
    print(f"wrote {path} (mode={mode}, exists={area.exists})")
    return 0


def _cmd_reach_timeline(args) -> int:
    config = _load(args)
    out = _out_dir(config, args)
    log = io.load_trajectory_log(args.log)
    pred = io.config_prediction(config)
    step = args.eval_step or float(config["analysis"].get("eval_step", 0.1))
    timeline = reach.drivable_timeline(log, pred, eval_step=step)
    path = out / "timeline.csv"
    io.emit_timeline(timeline, path)
    print(f"wrote {path} ({int(timeline.exists.sum())}/{len(timeline.exists)} steps drivable)")
    return 0


def _cmd_reach_aggregate(args) -> int:
    config = _load(args)
    out = _out_dir(config, args)
    pred = io.config_prediction(config)
    step = args.eval_step or float(config["analysis"].get("eval_step", 0.1))
    timelines = [reach.drivable_timeline(log, pred, eval_step=step)
                 for log in _load_logs(args.logs)]
    prev = reach.aggregate_prevalence(
        timelines, n_boot=int(config["analysis"].get("bootstrap_samples", 1000)),
        seed=int(config.get("seed", 0)))
    path = out / "prevalence.csv"
    io.emit_prevalence(prev, path)
    print(f"wrote {path}")
    return 0


def _cmd_oracle_verify(args) -> int:
    config = _load(args)
    out = _out_dir(config, args)
    scenario, timing = io.config_scenario(config)
    pred = io.config_prediction(config)
    log = rollout(scenario, PolicySpec(kind="no-response"),
                  dt=float(config["analysis"]["dt"]), timing=timing)
    window = responses.window_for(log)
    anchors = np.linspace(window.t_begin, window.t_end, args.anchors)
    seed = int(config.get("seed", 0))

    worst = 1.0
    report = []
    for t_anchor in anchors:
        i = log.index_at(float(t_anchor))
        for name, state, limits in (("sv", log.sv_state(i), pred.sv_limits),
                                    ("pov", log.pov_state(i), pred.pov_limits)):
            rset = reach.compute_reachable_set(state, limits, pred)
            cloud = oracle.sample_trajectories(state, limits, horizon=pred.horizon,
                                               dt=pred.tau_step, n=args.n, seed=seed)
            check = oracle.containment_check(cloud, rset)
            worst = min(worst, check.fraction)
            report.append({"t": float(t_anchor), "vehicle": name,
                           "fraction": check.fraction,
                           "n_checked": check.n_checked,
                           "first_violation": check.first_violation})
    path = out / "oracle_report.json"
    path.write_text(json.dumps(report, indent=2) + "\n")
    print(f"containment {worst:.6f} over {len(report)} checks -> {path}")
    return 0 if worst == 1.0 else 1


_HANDLERS = {
    ("scenario", "gen"): _cmd_scenario_gen,
    ("simulate", None): _cmd_simulate,
    ("analyze", "responses"): _cmd_analyze_responses,
    ("analyze", "sequence"): _cmd_analyze_sequence,
    ("reach", "compute"): _cmd_reach_compute,
    ("reach", "timeline"): _cmd_reach_timeline,
    ("reach", "aggregate"): _cmd_reach_aggregate,
    ("oracle", "verify"): _cmd_oracle_verify,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    handler = _HANDLERS[(args.command, getattr(args, "subcommand", None))]
    try:
        return handler(args)
    except Exception as exc:  # noqa: BLE001 - single reporting point for the CLI
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
