import numpy as np
import pytest

from odlisim.engine import TrajectoryLog
from odlisim.scenario import ScenarioTiming, make_scenario


def make_log(dt=0.01, duration=8.0, t_trigger=1.0, incursion_level=0.0,
             sv=None, pov=None, controls=None, collided=False, t_collision=None):
    """Synthetic trajectory log with constant channels unless overridden.

    ``sv`` / ``pov`` / ``controls`` map channel names to scalars, arrays, or
    callables of the time array.
    """
    scenario = make_scenario(incursion_level)
    timing = ScenarioTiming(t_trigger, t_trigger + scenario.time_gap_trigger)
    n = int(round(duration / dt)) + 1
    t = np.arange(n) * dt

    def channels(defaults, overrides):
        out = {}
        overrides = overrides or {}
        for key, default in defaults.items():
            v = overrides.get(key, default)
            if callable(v):
                out[key] = np.asarray(v(t), dtype=float)
            elif np.isscalar(v):
                out[key] = np.full(n, float(v))
            else:
                out[key] = np.asarray(v, dtype=float)
        return out

    w = scenario.road.lane_width
    sv_defaults = {"x": lambda tt: 17.88 * tt, "y": -w / 2, "vx": 17.88,
                   "vy": 0.0, "ax": 0.0, "ay": 0.0}
    pov_defaults = {"x": lambda tt: 300.0 - 17.88 * tt, "y": w / 2,
                    "vx": -17.88, "vy": 0.0, "ax": 0.0, "ay": 0.0}
    ctl_defaults = {"accel_pct": 6.0, "brake_pct": 0.0, "steer_deg": 0.0}
    return TrajectoryLog(dt=dt, t=t,
                         sv=channels(sv_defaults, sv),
                         pov=channels(pov_defaults, pov),
                         controls=channels(ctl_defaults, controls),
                         scenario=scenario, timing=timing,
                         collided=collided, t_collision=t_collision)


@pytest.fixture
def synthetic_log():
    return make_log()
