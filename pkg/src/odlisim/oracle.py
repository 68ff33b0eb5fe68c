"""Brute-force verification of the reachable-set propagation.

Monte Carlo rollouts of jerk-bounded control sequences use the exact same
discrete stepper as the propagation, so a sound implementation must
contain every sampled state bit-for-bit.  A separate continuous-time
bang-bang integrator quantifies how far the discrete extremes sit from
the true 1D reachable interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import AxisLimits, KinematicLimits, VehicleState, axis_limits, axis_step
from .reach import ReachableSet


@dataclass
class SampleCloud:
    """Per-step state clouds of jerk-sampled trajectories.

    states[i, k] holds (x, y, vx, vy, ax, ay) of trajectory i after k steps;
    the first four trajectories are the constant corner-jerk (bang-bang)
    ones, the rest draw per-step jerks uniformly from the admissible box.
    """

    t0: float
    dt: float
    states: np.ndarray  # float [n_traj, n_steps + 1, 6]
    heading_sign: int

    @property
    def n_traj(self) -> int:
        return self.states.shape[0]

    @property
    def n_steps(self) -> int:
        return self.states.shape[1] - 1


def constant_jerk_trajectory(initial: VehicleState, jerk: tuple[float, float],
                             limits: KinematicLimits, horizon: float,
                             dt: float) -> np.ndarray:
    """States [n_steps + 1, 6] under a constant jerk command."""
    n_steps = int(round(horizon / dt))
    lim_x = axis_limits(limits, initial.heading_sign, "x")
    lim_y = axis_limits(limits, initial.heading_sign, "y")
    out = np.empty((n_steps + 1, 6))
    x, y, vx, vy, ax, ay = (initial.x, initial.y, initial.vx, initial.vy,
                            initial.ax, initial.ay)
    out[0] = (x, y, vx, vy, ax, ay)
    for k in range(1, n_steps + 1):
        x, vx, ax = axis_step(x, vx, ax, jerk[0], lim_x, dt)
        y, vy, ay = axis_step(y, vy, ay, jerk[1], lim_y, dt)
        out[k] = (x, y, vx, vy, ax, ay)
    return out


def sample_trajectories(initial: VehicleState, limits: KinematicLimits,
                        horizon: float = 4.0, dt: float = 0.1,
                        n: int = 1000, seed: int = 0) -> SampleCloud:
    """n random jerk-sequence rollouts plus the four constant corner ones.

    Each random trajectory draws its jerks from a seed-derived substream,
    so results are reproducible for a given (seed, n) regardless of
    evaluation order.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    n_steps = int(round(horizon / dt))
    lim_x = axis_limits(limits, initial.heading_sign, "x")
    lim_y = axis_limits(limits, initial.heading_sign, "y")

    corners = [(lim_x.j_lo, lim_y.j_lo), (lim_x.j_lo, lim_y.j_hi),
               (lim_x.j_hi, lim_y.j_lo), (lim_x.j_hi, lim_y.j_hi)]
    n_total = n + len(corners)
    jerks = np.empty((n_total, n_steps, 2))
    for i, (jx, jy) in enumerate(corners):
        jerks[i, :, 0] = jx
        jerks[i, :, 1] = jy
    streams = np.random.SeedSequence(seed).spawn(n)
    for i, ss in enumerate(streams):
        rng = np.random.default_rng(ss)
        jerks[len(corners) + i, :, 0] = rng.uniform(lim_x.j_lo, lim_x.j_hi, n_steps)
        jerks[len(corners) + i, :, 1] = rng.uniform(lim_y.j_lo, lim_y.j_hi, n_steps)

    states = np.empty((n_total, n_steps + 1, 6))
    x = np.full(n_total, initial.x)
    y = np.full(n_total, initial.y)
    vx = np.full(n_total, initial.vx)
    vy = np.full(n_total, initial.vy)
    ax = np.full(n_total, initial.ax)
    ay = np.full(n_total, initial.ay)
    states[:, 0] = np.stack([x, y, vx, vy, ax, ay], axis=1)
    for k in range(n_steps):
        x, vx, ax = axis_step(x, vx, ax, jerks[:, k, 0], lim_x, dt)
        y, vy, ay = axis_step(y, vy, ay, jerks[:, k, 1], lim_y, dt)
        states[:, k + 1] = np.stack([x, y, vx, vy, ax, ay], axis=1)
    return SampleCloud(t0=initial.t, dt=dt, states=states,
                       heading_sign=initial.heading_sign)


def _smallest_positive_root(a2: float, a1: float, a0: float,
                            tol: float = 1e-12) -> float | None:
    """Smallest root > tol of a2 s^2 + a1 s + a0 = 0."""
    if abs(a2) < 1e-15:
        if abs(a1) < 1e-15:
            return None
        r = -a0 / a1
        return r if r > tol else None
    disc = a1 * a1 - 4.0 * a2 * a0
    if disc < 0:
        return None
    sq = math.sqrt(disc)
    roots = sorted(((-a1 - sq) / (2 * a2), (-a1 + sq) / (2 * a2)))
    for r in roots:
        if r > tol:
            return r
    return None


def _push_extreme(p0: float, v0: float, a0: float, j: float,
                  a_lo: float, a_hi: float, v_lo: float, v_hi: float,
                  tau: float) -> tuple[float, float]:
    """Continuous-time (p, v) at tau under constant jerk with clamped a and v.

    Event-driven exact integration: within a segment the acceleration is
    linear, velocity quadratic, position cubic; segments break at
    acceleration saturation, velocity cap hits, and cap releases.
    """
    t = 0.0
    p, v, a = p0, min(max(v0, v_lo), v_hi), min(max(a0, a_lo), a_hi)
    pinned: str | None = None
    for _ in range(40):
        # Pin to a velocity cap when sitting on it and being pushed outward
        # (zero acceleration counts only if the jerk keeps it outward);
        # release as soon as the acceleration points back inward.
        if pinned is None:
            if v >= v_hi - 1e-12 and (a > 0 or (a >= -1e-15 and j >= 0)):
                v, pinned = v_hi, "hi"
            elif v <= v_lo + 1e-12 and (a < 0 or (a <= 1e-15 and j <= 0)):
                v, pinned = v_lo, "lo"
        elif pinned == "hi" and (a < -1e-15 or (abs(a) <= 1e-15 and j < 0)):
            pinned = None
        elif pinned == "lo" and (a > 1e-15 or (abs(a) <= 1e-15 and j > 0)):
            pinned = None
        if t >= tau - 1e-15:
            break

        at_hi_cap = a >= a_hi - 1e-15 and j > 0
        at_lo_cap = a <= a_lo + 1e-15 and j < 0
        j_eff = 0.0 if (at_hi_cap or at_lo_cap) else j

        candidates = [tau - t]
        if j_eff > 0:
            candidates.append((a_hi - a) / j_eff)
        elif j_eff < 0:
            candidates.append((a_lo - a) / j_eff)
        if pinned is None:
            for cap in (v_hi, v_lo):
                r = _smallest_positive_root(j_eff / 2.0, a, v - cap)
                if r is not None:
                    candidates.append(r)
        elif j_eff != 0.0:
            r = -a / j_eff  # cap release when acceleration crosses zero
            if r > 1e-15:
                candidates.append(r)
        dt = min(c for c in candidates if c > 1e-15)
        dt = min(dt, tau - t)

        if pinned is None:
            p += v * dt + a * dt * dt / 2.0 + j_eff * dt**3 / 6.0
            v += a * dt + j_eff * dt * dt / 2.0
            v = min(max(v, v_lo), v_hi)
        else:
            p += v * dt
        a = min(max(a + j_eff * dt, a_lo), a_hi)
        t += dt
    return p, v


def analytic_1d_bounds(p0: float, v0: float, a0: float, lim: AxisLimits,
                       tau: float) -> tuple[tuple[float, float], tuple[float, float]]:
    """Exact continuous-time extremal ([p_lo, p_hi], [v_lo, v_hi]) at tau.

    The upper trajectory holds the maximum jerk until acceleration
    saturates, then rides the acceleration cap with the velocity clamped;
    the lower bound is the mirror image.  For this monotone triple
    integrator these two trajectories bound every admissible one.
    """
    if tau < 0:
        raise ValueError("tau must be >= 0")
    p_hi, v_hi = _push_extreme(p0, v0, a0, lim.j_hi, lim.a_lo, lim.a_hi,
                               lim.v_lo, lim.v_hi, tau)
    p_neg, v_neg = _push_extreme(-p0, -v0, -a0, -lim.j_lo, -lim.a_hi, -lim.a_lo,
                                 -lim.v_hi, -lim.v_lo, tau)
    return (-p_neg, p_hi), (-v_neg, v_hi)


@dataclass
class ContainmentReport:
    fraction: float
    n_checked: int
    n_violations: int
    first_violation: dict | None  # step/trajectory/reason of the first miss

    @property
    def sound(self) -> bool:
        return self.n_violations == 0


def containment_check(cloud: SampleCloud, rset: ReachableSet) -> ContainmentReport:
    """Fraction of sampled states inside the occupied cells and their hulls.

    Position must land in an occupied cell and velocity/acceleration inside
    that cell's intervals (closed bounds, no tolerance).  1.0 certifies
    soundness of the propagation for these samples.
    """
    if abs(cloud.dt - rset.tau_step) > 1e-12:
        raise ValueError(f"clock mismatch: cloud dt {cloud.dt} vs tau_step {rset.tau_step}")
    if abs(cloud.t0 - rset.t) > 1e-9:
        raise ValueError(f"anchor mismatch: cloud t0 {cloud.t0} vs set t {rset.t}")
    n_layers = min(cloud.n_steps + 1, len(rset.layers))

    n_checked = 0
    n_bad = 0
    first: dict | None = None
    for k in range(n_layers):
        layer = rset.layers[k]
        s = cloud.states[:, k]
        n_checked += len(s)
        if layer.empty:
            n_bad += len(s)
            if first is None:
                first = {"step": k, "trajectory": 0, "reason": "empty layer"}
            continue
        w = layer.window
        ii = np.floor(s[:, 0] / w.dx).astype(int) - w.ox
        jj = np.floor(s[:, 1] / w.dy).astype(int) - w.oy
        in_win = (ii >= 0) & (ii < w.nx) & (jj >= 0) & (jj < w.ny)
        occupied = np.zeros(len(s), dtype=bool)
        occupied[in_win] = layer.mask[ii[in_win], jj[in_win]]

        xh, yh = layer.x_hull, layer.y_hull
        ok = (occupied
              & (s[:, 2] >= xh.v_lo) & (s[:, 2] <= xh.v_hi)
              & (s[:, 3] >= yh.v_lo) & (s[:, 3] <= yh.v_hi)
              & (s[:, 4] >= xh.a_lo) & (s[:, 4] <= xh.a_hi)
              & (s[:, 5] >= yh.a_lo) & (s[:, 5] <= yh.a_hi))
        bad = np.nonzero(~ok)[0]
        n_bad += len(bad)
        if len(bad) and first is None:
            i = int(bad[0])
            reason = "cell unoccupied" if not occupied[i] else "outside hull intervals"
            first = {"step": k, "trajectory": i, "reason": reason,
                     "state": [float(v) for v in s[i]]}
    return ContainmentReport(fraction=1.0 - n_bad / max(n_checked, 1),
                             n_checked=n_checked, n_violations=n_bad,
                             first_violation=first)
