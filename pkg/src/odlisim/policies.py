"""Scripted SV controllers producing the qualitative evasive patterns.

Each policy is a deterministic piecewise schedule over pedal percentages
and steering angle.  Pedal changes are steps (a pedal can be stamped much
faster than the 10 ms simulation step), so their threshold crossings land
exactly on the scheduled times.  Steering engages by jumping to the onset
threshold and ramping to the target at steer_rate; a later reversal ramps
from the current angle, so its crossing time follows from the ramp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import ControlInput, VehicleState
from .scenario import ScenarioTiming

POLICY_KINDS = (
    "no-response",
    "brake-only",
    "brake-then-steer-center",
    "steer-center-only",
    "steer-shoulder-only",
    "shoulder-then-reversal",
)

CRUISE_ACCEL_PCT = 6.0   # pedal position holding speed; accelerator dead zone ends here
ACCEL_RELEASE_PCT = 3.0  # response threshold: pedal pressed less than this
BRAKE_ONSET_PCT = 15.0   # response threshold: pedal pressed more than this
STEER_ONSET_DEG = 5.0    # response threshold: wheel turned this much or more

BRAKE_ANCHOR_DECEL = 1.0   # m/s^2 at the 15 % brake threshold
STEER_GAIN = 0.2           # m/s^2 per degree (20 deg ~ 4 m/s^2 at nominal speed)
SOFT_BRAKE_DECEL = 3.0     # m/s^2, within the 1-4 soft band
HARD_BRAKE_DECEL = 6.0     # m/s^2, above the 4 hard threshold


@dataclass(frozen=True)
class PolicySpec:
    kind: str = "no-response"
    reaction_delay: float = 1.5   # s after t_T: accelerator release + first evasive action
    brake_level: str = "hard"     # soft (1-4 m/s^2) or hard (> 4 m/s^2)
    steer_rate: float = 250.0     # deg/s ramp toward the target angle
    steer_target: float = 15.0    # deg, magnitude of the primary steering action
    reversal_delay: float = 1.3   # s from the first evasive action to the follow-up one
    reversal_target: float = 15.0  # deg, toward road center, for shoulder-then-reversal

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.reaction_delay < 0 or self.reversal_delay < 0:
            raise ValueError("policy delays must be >= 0")
        if self.brake_level not in ("soft", "hard"):
            raise ValueError(f"unknown brake_level {self.brake_level!r}")
        if self.steer_rate <= 0:
            raise ValueError("steer_rate must be positive")


def accel_pct_to_ax(pct: float, a_fwd_max: float) -> float:
    """Accelerator map: dead zone up to the cruise level, then linear to the cap.

    At and below 3 % the pedal commands ~0 m/s^2; releasing the pedal means
    coasting with no engine braking.
    """
    if pct <= CRUISE_ACCEL_PCT:
        return 0.0
    return a_fwd_max * (pct - CRUISE_ACCEL_PCT) / (100.0 - CRUISE_ACCEL_PCT)


def brake_pct_to_decel(pct: float, a_brk_max: float) -> float:
    """Brake map: piecewise linear through (0, 0), (15 %, 1 m/s^2), (100 %, cap)."""
    if pct <= 0:
        return 0.0
    if pct <= BRAKE_ONSET_PCT:
        return BRAKE_ANCHOR_DECEL * pct / BRAKE_ONSET_PCT
    return BRAKE_ANCHOR_DECEL + (a_brk_max - BRAKE_ANCHOR_DECEL) * (
        pct - BRAKE_ONSET_PCT) / (100.0 - BRAKE_ONSET_PCT)


def decel_to_brake_pct(decel: float, a_brk_max: float) -> float:
    """Inverse of brake_pct_to_decel, used to pick schedule pedal positions."""
    if decel <= 0:
        return 0.0
    if decel <= BRAKE_ANCHOR_DECEL:
        return BRAKE_ONSET_PCT * decel / BRAKE_ANCHOR_DECEL
    return BRAKE_ONSET_PCT + (100.0 - BRAKE_ONSET_PCT) * (
        decel - BRAKE_ANCHOR_DECEL) / (a_brk_max - BRAKE_ANCHOR_DECEL)


def steer_to_ay(steer_deg: float) -> float:
    """Fixed-gain steering map; positive steer accelerates toward +y (road center)."""
    return STEER_GAIN * steer_deg


def _brake_pct(policy: PolicySpec, a_brk_max: float) -> float:
    decel = SOFT_BRAKE_DECEL if policy.brake_level == "soft" else HARD_BRAKE_DECEL
    return decel_to_brake_pct(decel, a_brk_max)


def _engage(t: float, onset: float, target: float, rate: float) -> float:
    """Steering engagement: jump to the onset threshold, ramp to the target."""
    if t < onset:
        return 0.0
    sign = math.copysign(1.0, target)
    mag = min(abs(target), STEER_ONSET_DEG + rate * (t - onset))
    return sign * mag


def _steer_angle(t: float, policy: PolicySpec, timing: ScenarioTiming) -> float:
    t_first = timing.t_trigger + policy.reaction_delay
    kind = policy.kind
    if kind == "steer-center-only":
        return _engage(t, t_first, abs(policy.steer_target), policy.steer_rate)
    if kind == "steer-shoulder-only":
        return _engage(t, t_first, -abs(policy.steer_target), policy.steer_rate)
    if kind == "brake-then-steer-center":
        return _engage(t, t_first + policy.reversal_delay, abs(policy.steer_target),
                       policy.steer_rate)
    if kind == "shoulder-then-reversal":
        t_rev = t_first + policy.reversal_delay
        if t < t_rev:
            return _engage(t, t_first, -abs(policy.steer_target), policy.steer_rate)
        start = _engage(t_rev, t_first, -abs(policy.steer_target), policy.steer_rate)
        return min(abs(policy.reversal_target),
                   start + policy.steer_rate * (t - t_rev))
    return 0.0


def policy_control(t: float, sv: VehicleState, pov: VehicleState,
                   timing: ScenarioTiming, policy: PolicySpec,
                   a_brk_max: float = 8.0) -> ControlInput:
    """Control inputs for the SV at time t under a scripted policy.

    The returned jerk commands are indicative only; the simulation engine
    recomputes tracking jerk from the pedal/steer maps each step.
    """
    t_first = timing.t_trigger + policy.reaction_delay
    kind = policy.kind

    if kind == "no-response" or t < t_first:
        return ControlInput(accel_pct=CRUISE_ACCEL_PCT)

    accel = 0.0
    brake = 0.0
    if kind in ("brake-only", "brake-then-steer-center"):
        brake = _brake_pct(policy, a_brk_max)
    steer = _steer_angle(t, policy, timing)
    return ControlInput(accel_pct=accel, brake_pct=brake, steer_deg=steer)


def target_accels(controls: ControlInput, a_fwd_max: float,
                  a_brk_max: float) -> tuple[float, float]:
    """(ax, ay) targets implied by pedal percentages and steering angle."""
    ax = accel_pct_to_ax(controls.accel_pct, a_fwd_max) - brake_pct_to_decel(
        controls.brake_pct, a_brk_max)
    return ax, steer_to_ay(controls.steer_deg)


def intended_crossings(policy: PolicySpec, timing: ScenarioTiming) -> dict[str, list[float]]:
    """Threshold-crossing times the schedule intends, by response kind.

    Used by round-trip tests: detection on a rollout of this policy must
    find exactly these crossings (to one sample step).
    """
    t_first = timing.t_trigger + policy.reaction_delay
    kind = policy.kind
    out: dict[str, list[float]] = {
        "accel-release": [], "brake-onset": [], "steer-shoulder": [], "steer-center": []}
    if kind == "no-response":
        return out
    out["accel-release"].append(t_first)
    if kind in ("brake-only", "brake-then-steer-center"):
        out["brake-onset"].append(t_first)
    if kind == "steer-center-only":
        out["steer-center"].append(t_first)
    elif kind == "steer-shoulder-only":
        out["steer-shoulder"].append(t_first)
    elif kind == "brake-then-steer-center":
        out["steer-center"].append(t_first + policy.reversal_delay)
    elif kind == "shoulder-then-reversal":
        out["steer-shoulder"].append(t_first)
        t_rev = t_first + policy.reversal_delay
        start = _engage(t_rev, t_first, -abs(policy.steer_target), policy.steer_rate)
        if abs(policy.reversal_target) >= STEER_ONSET_DEG:
            out["steer-center"].append(t_rev + (STEER_ONSET_DEG - start) / policy.steer_rate)
    return out
