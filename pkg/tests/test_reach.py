import numpy as np
import pytest

from conftest import make_log
from odlisim.core import (POV_LIMITS, SV_LIMITS, KinematicLimits, RoadSpec,
                          VehicleSpec, VehicleState)
from odlisim.engine import rollout
from odlisim.policies import PolicySpec
from odlisim.reach import (GridWindow, Layer, PredictionConfig, aggregate_prevalence,
                           compute_drivable_area, compute_reachable_set,
                           drivable_timeline, make_initial_layer, pov_occupancy,
                           pov_prediction_mode, propagate_step)
from odlisim.scenario import make_scenario

CFG = PredictionConfig()


def sv_state(**kw):
    base = dict(t=0.0, x=0.0, y=-1.825, vx=17.88, vy=0.0, ax=0.0, ay=0.0,
                heading_sign=1)
    base.update(kw)
    return VehicleState(**base)


def pov_state(**kw):
    base = dict(t=0.0, x=100.0, y=1.825, vx=-17.88, vy=0.0, ax=0.0, ay=0.0,
                heading_sign=-1)
    base.update(kw)
    return VehicleState(**base)


def single_cell_layer(ix=0, iy=0, dx=0.5, dy=0.25, nx=41, ny=41, heading=1,
                      hull_v=(0.0, 0.0), hull_a=(0.0, 0.0)):
    from odlisim.reach import AxisInterval

    window = GridWindow(dx, dy, ix - nx // 2, iy - ny // 2, nx, ny)
    mask = np.zeros((nx, ny), dtype=bool)
    mask[nx // 2, ny // 2] = True
    return Layer(tau=0.0, window=window, mask=mask,
                 x_hull=AxisInterval(ix * dx, (ix + 1) * dx, *hull_v, *hull_a),
                 y_hull=AxisInterval(iy * dy, (iy + 1) * dy, 0.0, 0.0, 0.0, 0.0),
                 heading_sign=heading)


def test_propagate_singleton_advance():
    state = VehicleState(t=0, x=0.2, y=0.1, vx=20.0, vy=0.0, ax=0.0, ay=0.0)
    window = GridWindow(0.5, 0.25, -10, -10, 80, 40)
    layer = make_initial_layer(state, window)
    nxt = propagate_step(layer, SV_LIMITS, 0.1)
    assert nxt.x_hull.p_lo == pytest.approx(0.2 + 2.0)
    assert nxt.x_hull.p_hi == pytest.approx(0.2 + 2.0)
    assert (nxt.x_hull.a_lo, nxt.x_hull.a_hi) == (pytest.approx(-3.0), pytest.approx(1.0))
    assert (nxt.x_hull.v_lo, nxt.x_hull.v_hi) == (20.0, 20.0)


def test_propagate_zero_limits_fixed_point():
    zero = KinematicLimits(v_max=0, a_fwd_max=0, a_brk_max=0, a_lat_left_max=0,
                           a_lat_right_max=0, j_fwd_max=0, j_bwd_max=0,
                           j_lat_max=0, v_lat_max=0)
    state = VehicleState(t=0, x=1.3, y=0.4, vx=0.0, vy=0.0, ax=0.0, ay=0.0)
    window = GridWindow(0.5, 0.25, -10, -10, 40, 40)
    layer = make_initial_layer(state, window)
    nxt = propagate_step(layer, zero, 0.1)
    assert nxt.world_cells() == layer.world_cells()
    assert nxt.x_hull.p_lo == layer.x_hull.p_lo


def test_propagate_pov_lateral_floor():
    state = pov_state()
    window = GridWindow(0.5, 0.25, 150, -20, 100, 100)
    layer = make_initial_layer(state, window)
    nxt = propagate_step(layer, POV_LIMITS, 0.1)
    assert nxt.y_hull.a_lo == 0.0  # cannot accelerate further toward the shoulder
    assert nxt.y_hull.a_hi == pytest.approx(3.0)  # 0 + 0.1 * 30 toward its left


def test_propagate_empty_absorbs():
    layer = single_cell_layer()
    layer.mask[:] = False
    layer = propagate_step(layer, SV_LIMITS, 0.1)
    assert layer.empty
    assert propagate_step(layer, SV_LIMITS, 0.1).empty


def test_occupancy_dilation_defaults():
    layer = single_cell_layer(ix=10, iy=4)
    spec = VehicleSpec(ref_offset=0.0)
    occ, ox, oy = pov_occupancy(layer, spec, spec)
    ii, jj = np.nonzero(occ)
    ix = ii + ox
    iy = jj + oy
    assert ix.min() == 10 - 9 and ix.max() == 10 + 9  # ceil(4.4 / 0.5) = 9
    assert iy.min() == 4 - 8 and iy.max() == 4 + 8    # ceil(1.8 / 0.25) = 8


def test_occupancy_ref_offset_shift():
    layer = single_cell_layer(ix=0, iy=0)
    occ, ox, oy = pov_occupancy(layer, VehicleSpec(ref_offset=0.2), VehicleSpec())
    ii = np.nonzero(occ)[0] + ox
    assert ii.min() == -9 and ii.max() == 10  # band shifted +0.2 m


def test_occupancy_empty_layer():
    layer = single_cell_layer()
    layer.mask[:] = False
    occ, _, _ = pov_occupancy(layer, VehicleSpec(), VehicleSpec())
    assert not occ.any()


def test_occupancy_commutes_with_union():
    a = single_cell_layer(ix=0, iy=0, nx=101, ny=101)
    b = single_cell_layer(ix=30, iy=12, nx=101, ny=101)
    union = single_cell_layer(ix=0, iy=0, nx=101, ny=101)
    w = union.window
    union.mask[30 - w.ox, 12 - w.oy] = True  # add the second world cell
    spec = VehicleSpec(ref_offset=0.0)

    def cells(occ, ox, oy):
        ii, jj = np.nonzero(occ)
        return {(int(i) + ox, int(j) + oy) for i, j in zip(ii, jj)}

    got = cells(*pov_occupancy(union, spec, spec))
    want = cells(*pov_occupancy(a, spec, spec)) | cells(*pov_occupancy(b, spec, spec))
    assert got == want


def test_prediction_mode_examples():
    assert pov_prediction_mode([1.825], 3.65) == "normative"
    assert pov_prediction_mode([1.825 - 0.3], 3.65, threshold=0.15) == "kinematic-envelope"
    # latch: any past exceedance keeps envelope mode
    history = [1.825, 1.4, 1.825]
    assert pov_prediction_mode(history, 3.65) == "kinematic-envelope"
    with pytest.raises(ValueError):
        pov_prediction_mode([], 3.65)


def test_drivable_area_pov_far_away():
    road = RoadSpec()
    far_pov = pov_state(x=500.0)  # beyond any 4 s interaction
    area = compute_drivable_area(sv_state(), far_pov, CFG, road,
                                 VehicleSpec(), VehicleSpec(ref_offset=0.2),
                                 mode="kinematic-envelope")
    assert area.exists
    cfg_off = PredictionConfig(road_pruning="off")
    area_off = compute_drivable_area(sv_state(), far_pov, cfg_off, road,
                                     VehicleSpec(), VehicleSpec(ref_offset=0.2),
                                     mode="kinematic-envelope")
    unpruned = compute_reachable_set(sv_state(), SV_LIMITS, cfg_off)
    for pruned, raw in zip(area_off.layers, unpruned.layers):
        assert pruned.world_cells() == raw.world_cells()


def test_nested_horizons():
    cfg4 = PredictionConfig(horizon=4.0)
    cfg2 = PredictionConfig(horizon=2.0)
    area4 = compute_drivable_area(sv_state(), pov_state(), cfg4, RoadSpec(),
                                  VehicleSpec(), VehicleSpec(ref_offset=0.2))
    area2 = compute_drivable_area(sv_state(), pov_state(), cfg2, RoadSpec(),
                                  VehicleSpec(), VehicleSpec(ref_offset=0.2))
    for k, layer2 in enumerate(area2.layers):
        assert layer2.world_cells() == area4.layers[k].world_cells()


def test_empty_layer_absorption_in_drivable_area():
    # POV heading straight at the SV from close range: the area collapses.
    close = pov_state(x=25.0, y=-1.825, vy=0.0)
    area = compute_drivable_area(sv_state(), close, CFG, RoadSpec(),
                                 VehicleSpec(), VehicleSpec(ref_offset=0.2),
                                 mode="kinematic-envelope")
    empties = [layer.empty for layer in area.layers]
    if any(empties):
        first = empties.index(True)
        assert all(empties[first:])
        assert not area.exists


def test_monotone_pov_limits_shrink_drivable_area():
    widened = KinematicLimits(a_lat_left_max=4.0, a_lat_right_max=2.0)
    mid = pov_state(x=60.0, y=0.3, vy=-0.8)
    base = compute_drivable_area(sv_state(), mid, CFG, RoadSpec(),
                                 VehicleSpec(), VehicleSpec(ref_offset=0.2),
                                 mode="kinematic-envelope")
    cfg_wide = PredictionConfig(pov_limits=widened)
    wide = compute_drivable_area(sv_state(), mid, cfg_wide, RoadSpec(),
                                 VehicleSpec(), VehicleSpec(ref_offset=0.2),
                                 mode="kinematic-envelope")
    for lw, lb in zip(wide.layers, base.layers):
        assert lw.world_cells() <= lb.world_cells()


def test_grid_refinement_shrinks_overapproximation():
    # Holds for the raw reachable sets: the continuous hull is resolution
    # independent, so a finer raster can only move cell edges inward.  The
    # pruned drivable area has no such guarantee (a surviving channel can
    # flip from dead to alive when occupancy tightens).
    fine_cfg = PredictionConfig(grid_dx=0.25, grid_dy=0.125)
    for state, limits in ((sv_state(), SV_LIMITS),
                          (pov_state(y=0.3, vy=-0.8), POV_LIMITS)):
        coarse = compute_reachable_set(state, limits, CFG)
        fine = compute_reachable_set(state, limits, fine_cfg)
        for lf, lc in zip(fine.layers, coarse.layers):
            hf, hc = lf.position_hull(), lc.position_hull()
            assert hf is not None and hc is not None
            assert hf[0][0] >= hc[0][0] - CFG.grid_dx
            assert hf[0][1] <= hc[0][1] + CFG.grid_dx
            assert hf[1][0] >= hc[1][0] - CFG.grid_dy
            assert hf[1][1] <= hc[1][1] + CFG.grid_dy


def test_normative_mode_protects_own_lane_only():
    area = compute_drivable_area(sv_state(), pov_state(x=100.0), CFG, RoadSpec(),
                                 VehicleSpec(), VehicleSpec(ref_offset=0.2),
                                 mode="normative")
    assert area.exists
    # POV layers stay confined to its lane band
    for layer in area.pov_layers:
        if layer.empty:
            continue
        hull = layer.position_hull()
        assert hull[1][0] >= 0.9 - CFG.grid_dy - 1e-9
        assert hull[1][1] <= 3.65 - 0.9 + CFG.grid_dy + 1e-9


def test_drivable_layers_subset_of_reachable():
    mid = pov_state(x=60.0, y=0.3, vy=-0.8)
    area = compute_drivable_area(sv_state(), mid, CFG, RoadSpec(),
                                 VehicleSpec(), VehicleSpec(ref_offset=0.2),
                                 mode="kinematic-envelope")
    raw = compute_reachable_set(sv_state(), SV_LIMITS, CFG)
    for pruned, full in zip(area.layers, raw.layers):
        assert pruned.world_cells() <= full.world_cells()


def test_pov_layers_bounded_by_current_drift():
    """With zero right-lateral acceleration, the POV's layers never extend
    toward -y beyond its current lateral velocity integrated forward."""
    st = pov_state(y=0.5, vy=-0.9)
    rset = compute_reachable_set(st, POV_LIMITS, CFG)
    for k, layer in enumerate(rset.layers):
        tau = k * CFG.tau_step
        assert layer.y_hull.p_lo >= st.y + st.vy * tau - 1e-9
        hull = layer.position_hull()
        assert hull[1][0] >= st.y + st.vy * tau - CFG.grid_dy - 1e-9


def test_timeline_no_incursion_all_true():
    log = make_log(duration=8.0, pov={"x": lambda t: 400.0 - 17.88 * t})
    tl = drivable_timeline(log, CFG, eval_step=0.5, window=(1.4, 5.0))
    assert tl.exists.all()
    assert all(m == "normative" for m in tl.mode)


def test_timeline_medium_no_response():
    log = rollout(make_scenario(0.0), PolicySpec(kind="no-response"))
    tl = drivable_timeline(log, CFG, eval_step=0.25)
    assert tl.exists[0]
    lost = np.nonzero(~tl.exists)[0]
    assert len(lost) > 0
    assert not tl.exists[lost[0]:].any()  # never regained


def test_prevalence_degenerate_cases():
    all_true = [np.ones(10, dtype=bool) for _ in range(6)]
    prev = aggregate_prevalence(all_true, n_boot=200, seed=1)
    assert np.allclose(prev.fraction, 1.0)
    assert np.allclose(prev.ci_lo, 1.0) and np.allclose(prev.ci_hi, 1.0)

    single = aggregate_prevalence([np.zeros(5, dtype=bool)], n_boot=100, seed=2)
    assert np.allclose(single.fraction, 0.0)
    assert np.allclose(single.ci_lo, single.ci_hi)


def test_prevalence_half_split():
    cohort = [np.ones(4, dtype=bool), np.ones(4, dtype=bool),
              np.zeros(4, dtype=bool), np.zeros(4, dtype=bool)]
    prev = aggregate_prevalence(cohort, n_boot=500, seed=3)
    assert np.allclose(prev.fraction, 0.5)
    assert (prev.ci_lo <= 0.5).all() and (prev.ci_hi >= 0.5).all()


def test_prevalence_terminal_padding():
    short = np.array([True, True], dtype=bool)
    long = np.zeros(5, dtype=bool)
    prev = aggregate_prevalence([short, long], n_boot=100, seed=4)
    assert prev.fraction[3] == 0.5  # short run carries terminal True
    assert prev.n_extrapolated[3] == 1
    assert prev.n_extrapolated[0] == 0


def test_prevalence_empty_cohort_rejected():
    with pytest.raises(ValueError):
        aggregate_prevalence([])


def test_prevalence_deterministic_under_seed():
    rng = np.random.default_rng(9)
    cohort = [rng.random(8) > 0.4 for _ in range(12)]
    a = aggregate_prevalence(cohort, n_boot=300, seed=7)
    b = aggregate_prevalence(cohort, n_boot=300, seed=7)
    assert np.array_equal(a.ci_lo, b.ci_lo) and np.array_equal(a.ci_hi, b.ci_hi)
