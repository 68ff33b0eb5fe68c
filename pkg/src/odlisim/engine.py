"""Closed-loop rollout of one scenario with one SV policy.

The engine alternates policy evaluation and the jerk-limited stepper for
the SV while the POV follows its scripted path, halts at the first
footprint overlap or at the horizon, and classifies the outcome at the
time of closest longitudinal proximity t_p.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import policies
from .core import (KinematicLimits, SV_LIMITS, VehicleState, axis_limits, axis_step,
                   footprint, rectangles_overlap)
from .scenario import (ScenarioSpec, ScenarioTiming, build_incursion_path,
                       default_timing, pov_state_at, pov_x_at_trigger,
                       sv_initial_state)

OUTCOMES = ("collision", "pass-via-center", "pass-via-shoulder")


class IncompleteLogError(RuntimeError):
    """The log does not span the proximity event, so t_p is undefined."""


@dataclass
class TrajectoryLog:
    """Uniformly sampled two-vehicle trajectory with raw SV control inputs.

    Channel arrays all share one length; `sv_state(i)` / `pov_state(i)`
    reassemble frozen states.  Arrays are never mutated after construction.
    """

    dt: float
    t: np.ndarray
    sv: dict = field(repr=False)       # keys x, y, vx, vy, ax, ay
    pov: dict = field(repr=False)      # keys x, y, vx, vy, ax, ay
    controls: dict = field(repr=False)  # keys accel_pct, brake_pct, steer_deg
    scenario: ScenarioSpec
    timing: ScenarioTiming
    policy: policies.PolicySpec | None = None
    collided: bool = False
    t_collision: float | None = None
    complete: bool = True   # False when the horizon ended before proximity

    def __post_init__(self):
        n = len(self.t)
        if n < 2:
            raise ValueError("log needs at least two samples")
        steps = np.diff(self.t)
        if not np.all(steps > 0):
            raise ValueError("timestamps must be strictly increasing")
        if not np.allclose(steps, self.dt, rtol=0, atol=1e-9):
            raise ValueError("timestamps must be uniformly spaced at dt")
        for chans, keys in ((self.sv, _STATE_KEYS), (self.pov, _STATE_KEYS),
                            (self.controls, _CONTROL_KEYS)):
            for k in keys:
                if k not in chans or len(chans[k]) != n:
                    raise ValueError(f"channel {k!r} missing or wrong length")

    def __len__(self) -> int:
        return len(self.t)

    def index_at(self, t: float) -> int:
        """Index of the sample nearest to t (t must be within the log)."""
        if t < self.t[0] - self.dt / 2 or t > self.t[-1] + self.dt / 2:
            raise IncompleteLogError(f"t={t} outside log [{self.t[0]}, {self.t[-1]}]")
        return int(round((t - self.t[0]) / self.dt))

    def sv_state(self, i: int) -> VehicleState:
        s = self.sv
        return VehicleState(t=float(self.t[i]), x=float(s["x"][i]), y=float(s["y"][i]),
                            vx=float(s["vx"][i]), vy=float(s["vy"][i]),
                            ax=float(s["ax"][i]), ay=float(s["ay"][i]), heading_sign=1)

    def pov_state(self, i: int) -> VehicleState:
        s = self.pov
        return VehicleState(t=float(self.t[i]), x=float(s["x"][i]), y=float(s["y"][i]),
                            vx=float(s["vx"][i]), vy=float(s["vy"][i]),
                            ax=float(s["ax"][i]), ay=float(s["ay"][i]), heading_sign=-1)


_STATE_KEYS = ("x", "y", "vx", "vy", "ax", "ay")
_CONTROL_KEYS = ("accel_pct", "brake_pct", "steer_deg")


def rollout(scenario: ScenarioSpec, policy: policies.PolicySpec,
            dt: float = 0.01, horizon: float | None = None,
            timing: ScenarioTiming | None = None,
            sv_limits: KinematicLimits = SV_LIMITS) -> TrajectoryLog:
    """Simulate one conflict and return the trajectory log.

    Stops at the first footprint overlap (collision) or at the horizon,
    which defaults to 3 s past the critical point so the pass-by and the
    post-proximity tail are always covered.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if timing is None:
        timing = default_timing(scenario)
    if horizon is None:
        horizon = timing.t_critical + 3.0

    path = build_incursion_path(scenario, timing)
    x_pov_trig = pov_x_at_trigger(scenario, timing)
    sv = sv_initial_state(scenario)
    lim_x = axis_limits(sv_limits, sv.heading_sign, "x")
    lim_y = axis_limits(sv_limits, sv.heading_sign, "y")

    n_steps = int(round(horizon / dt))
    rows_t, rows_sv, rows_pov, rows_ctl = [], [], [], []
    collided = False
    t_collision = None

    for k in range(n_steps + 1):
        t = k * dt
        pov = pov_state_at(t, scenario, timing, x_pov_trig, path)
        ctl = policies.policy_control(t, sv, pov, timing, policy,
                                      a_brk_max=sv_limits.a_brk_max)
        rows_t.append(t)
        rows_sv.append((sv.x, sv.y, sv.vx, sv.vy, sv.ax, sv.ay))
        rows_pov.append((pov.x, pov.y, pov.vx, pov.vy, pov.ax, pov.ay))
        rows_ctl.append((ctl.accel_pct, ctl.brake_pct, ctl.steer_deg))

        if rectangles_overlap(footprint(sv, scenario.sv_spec),
                              footprint(pov, scenario.pov_spec)):
            collided = True
            t_collision = t
            break
        if k == n_steps:
            break

        # Jerk command tracks the pedal/steer acceleration targets; the
        # stepper clamps it into the admissible box.
        ax_t, ay_t = policies.target_accels(ctl, sv_limits.a_fwd_max,
                                            sv_limits.a_brk_max)
        x, vx, ax = axis_step(sv.x, sv.vx, sv.ax, (ax_t - sv.ax) / dt, lim_x, dt)
        y, vy, ay = axis_step(sv.y, sv.vy, sv.ay, (ay_t - sv.ay) / dt, lim_y, dt)
        sv = VehicleState(t=t + dt, x=float(x), y=float(y), vx=float(vx),
                          vy=float(vy), ax=float(ax), ay=float(ay),
                          heading_sign=1)

    t_arr = np.asarray(rows_t)
    sv_arr = np.asarray(rows_sv)
    pov_arr = np.asarray(rows_pov)
    ctl_arr = np.asarray(rows_ctl)
    log = TrajectoryLog(
        dt=dt, t=t_arr,
        sv={k: sv_arr[:, i] for i, k in enumerate(_STATE_KEYS)},
        pov={k: pov_arr[:, i] for i, k in enumerate(_STATE_KEYS)},
        controls={k: ctl_arr[:, i] for i, k in enumerate(_CONTROL_KEYS)},
        scenario=scenario, timing=timing, policy=policy,
        collided=collided, t_collision=t_collision)
    try:
        time_of_closest_proximity(log)
    except IncompleteLogError:
        log.complete = False
    return log


def _gap_series(log: TrajectoryLog) -> np.ndarray:
    sc = log.scenario
    sv_front = (log.sv["x"] - sc.sv_spec.ref_offset) + sc.sv_spec.length / 2
    pov_front = (log.pov["x"] + sc.pov_spec.ref_offset) - sc.pov_spec.length / 2
    return pov_front - sv_front


def time_of_closest_proximity(log: TrajectoryLog) -> float:
    """First sample time with longitudinal gap <= 0 (t_p).

    A collision always ends the log at longitudinal contact, so the
    collision time is t_p whenever it comes first.
    """
    gap = _gap_series(log)
    hits = np.nonzero(gap <= 0.0)[0]
    t_gap = float(log.t[hits[0]]) if len(hits) else None
    if log.collided and log.t_collision is not None:
        if t_gap is None or log.t_collision <= t_gap:
            return float(log.t_collision)
        return t_gap
    if t_gap is None:
        raise IncompleteLogError("longitudinal gap never reaches zero within the log")
    return t_gap


@dataclass(frozen=True)
class Outcome:
    kind: str                  # collision, pass-via-center, pass-via-shoulder
    t_p: float                 # s, time of closest longitudinal proximity
    lateral_clearance: float   # m, |y_sv - y_pov| at t_p
    sideswipe: bool = False    # body overlap occurred at some t != t_p

    def __post_init__(self):
        if self.kind not in OUTCOMES:
            raise ValueError(f"unknown outcome kind {self.kind!r}")


def classify_outcome(log: TrajectoryLog) -> Outcome:
    """Outcome at t_p: collision by lateral width overlap, else pass side.

    The width rule inspects only t_p; a body overlap at any other time is
    reported through the sideswipe diagnostic instead of changing the
    classification.
    """
    t_p = time_of_closest_proximity(log)
    i_p = log.index_at(t_p)
    sc = log.scenario
    dy = float(log.sv["y"][i_p] - log.pov["y"][i_p])
    width_sum = (sc.sv_spec.width + sc.pov_spec.width) / 2

    collision_at_tp = abs(dy) < width_sum
    early_overlap = (log.collided and log.t_collision is not None
                     and log.t_collision <= t_p)
    sideswipe = (log.collided and log.t_collision is not None
                 and log.t_collision > t_p)

    if collision_at_tp or early_overlap:
        return Outcome("collision", t_p, abs(dy), sideswipe=False)
    kind = "pass-via-center" if dy > 0 else "pass-via-shoulder"
    return Outcome(kind, t_p, abs(dy), sideswipe=sideswipe)


def run_cohort(scenario: ScenarioSpec, cohort: list[tuple[policies.PolicySpec, int]],
               dt: float = 0.01, seed: int = 0, delay_jitter: float = 0.0,
               timing: ScenarioTiming | None = None) -> list[TrajectoryLog]:
    """Independent rollouts for (policy, count) groups.

    Replicates within a group get deterministic, seed-derived jitter on the
    reaction delay so synthetic cohorts are not degenerate.  Rollouts are
    pure and order-independent; this runner just executes them in sequence.
    """
    logs = []
    streams = np.random.SeedSequence(seed).spawn(sum(c for _, c in cohort))
    i = 0
    for policy, count in cohort:
        for _ in range(count):
            p = policy
            if delay_jitter > 0:
                rng = np.random.default_rng(streams[i])
                offset = float(rng.uniform(-delay_jitter, delay_jitter))
                p = policies.PolicySpec(
                    kind=policy.kind,
                    reaction_delay=max(0.0, policy.reaction_delay + offset),
                    brake_level=policy.brake_level, steer_rate=policy.steer_rate,
                    steer_target=policy.steer_target,
                    reversal_delay=policy.reversal_delay,
                    reversal_target=policy.reversal_target)
            logs.append(rollout(scenario, p, dt=dt, timing=timing))
            i += 1
    return logs
