import math

import numpy as np
import pytest

from conftest import tiny_scenario
from mimo_isac import metrics
from mimo_isac.errors import ConfigError, SizeError, ThresholdsInfeasibleError
from mimo_isac.metrics import CovarianceSet
from mimo_isac.pareto import (
    SchemeMode,
    Thresholds,
    Weights,
    bisection_iterations,
    bisection_solve,
    compile_feasibility,
    effective,
    grid_oracle,
    pareto_sweep,
    r_upper_bound,
    scenario_for_mode,
    solver_params,
    target_power_floor,
)
from mimo_isac.scenario import ArrayGeometry, RicianParams, Scenario, SignalConfig, TargetSet, UserSet, sample_rician_channels
from mimo_isac.sdpcore import Kind, check_violations, solve_feasibility

W1 = Weights(0.5, (0.5,), (1.0,))
T1 = Thresholds(0.5, (0.5,))


def small_scenario(seed=0, n_tx=4, k=2, m=2, c=2):
    geom = ArrayGeometry(n_tx, n_tx)
    h = sample_rician_channels(geom, c, RicianParams(1.0, seed=seed))
    targets = TargetSet([-40.0, 10.0, 50.0][:k], [1.0] * k)
    return Scenario(geom, UserSet(h, [0.1] * c), targets, SignalConfig(16, 1.0, m, 1.0))


def test_weights_validation():
    Weights(0.3, (0.35, 0.35), (0.5, 0.5))
    with pytest.raises(ConfigError):
        Weights(0.3, (0.3, 0.3), (0.5, 0.5))
    with pytest.raises(ConfigError):
        Weights(0.5, (0.5,), (0.6, 0.6))
    with pytest.raises(ConfigError):
        Weights(1.0, (1e-9,), (1.0,))
    w = Weights.uniform(0.4, 3, 2)
    assert w.user_weights == pytest.approx((0.2, 0.2, 0.2)) and w.target_weights == (0.5, 0.5)


def test_zero_floors_feasible_at_isotropic_start():
    scn = small_scenario()
    w, t = Weights.uniform(0.5, 2, 2), Thresholds(0.0, (0.0, 0.0))
    sys = compile_feasibility(scn, w, t, 0.0)
    iso = CovarianceSet.isotropic(scn.n_blocks, 4, 1.0)
    res, _ = check_violations(iso, sys)
    lower = [i for i, c in enumerate(sys.constraints) if c.label.startswith(("target", "user"))]
    assert res[lower].max() <= 1e-12
    rep = solve_feasibility(sys, iso, solver_params(scn))
    assert rep.feasible


def test_constraint_counts():
    scn = small_scenario()
    sys = compile_feasibility(scn, Weights.uniform(0.5, 2, 2), Thresholds(1.0, (1.0, 1.0)), 0.5)
    labels = sys.labels()
    assert sum(lab.startswith("target") for lab in labels) == 2
    zf = {lab for lab in labels if lab.startswith("zf")}
    assert len(zf) == 4  # (0,1), (1,0) x real/imag, each a two-sided box
    assert sum(lab.startswith("zf") for lab in labels) == 8
    assert sum(lab.startswith("user") for lab in labels) == 2
    assert labels.count("power") == 1


def test_target_floor_example():
    geom = ArrayGeometry(2, 2)
    scn = Scenario(geom, UserSet(np.ones((1, 2)), [1.0]), TargetSet([0.0], [1.0]), SignalConfig(8, 1.0, 1, 1.0))
    assert target_power_floor(math.log2(33), 1.0, scn) == pytest.approx(2.0, rel=1e-12)
    assert target_power_floor(2000.0, 1.0, scn) == math.inf


def test_target_row_matches_floor():
    scn = tiny_scenario()
    sys = compile_feasibility(scn, W1, T1, 1.0)
    row = next(c for c in sys.constraints if c.label == "target[0]")
    bits = 1.0 * (0.5 + 0.5 * 1.0)
    assert row.kind is Kind.AT_LEAST
    assert row.bound * 2 == pytest.approx(target_power_floor(bits, 1.0, scn))


def test_user_row_encodes_sinr_floor(rng):
    scn = small_scenario()
    w, t = Weights.uniform(0.5, 2, 2), Thresholds(1.0, (2.0, 3.0))
    r = 0.7
    sys = compile_feasibility(scn, w, t, r)
    for _ in range(5):
        g = rng.standard_normal((4, 4, 4)) + 1j * rng.standard_normal((4, 4, 4))
        c = CovarianceSet(g @ np.swapaxes(g, -1, -2).conj() / 10)
        sinr = metrics.comm_sinrs(c, scn.users)
        vals = sys.values(c)
        for i in range(2):
            idx = sys.labels().index(f"user[{i}]")
            target = t.sinr_floors[i] + w.user_weights[i] * r
            assert (vals[idx] >= sys.constraints[idx].bound) == (sinr[i] >= target)


def test_r_upper_bound_example():
    geom = ArrayGeometry(2, 2)
    h = np.array([[1.0, 1.0]])
    scn = Scenario(geom, UserSet(h, [1.0]), TargetSet([0.0], [1.0]), SignalConfig(8, 1.0, 1, 1.0))
    assert r_upper_bound(scn, W1) == pytest.approx(1.0 + 0.5 * math.log2(33), rel=1e-12)
    w_small = Weights(1e-9, (1 - 1e-9,), (1.0,))
    assert r_upper_bound(scn, w_small) == pytest.approx(2.0 * (1 - 1e-9), rel=1e-6)


def test_iteration_count_arithmetic():
    assert bisection_iterations(2.522, 0.01) == 8
    assert bisection_iterations(1.0 + 0.5 * math.log2(33), 0.01) == 9
    assert bisection_iterations(0.005, 0.01) == 0


def test_bisection_iteration_count_and_history():
    scn = tiny_scenario()
    res = bisection_solve(scn, W1, T1, eps=0.01)
    assert res.iterations == math.ceil(math.log2(res.r_max / 0.01)) == len(res.history)
    # monotone verdicts: nothing feasible above an infeasible probe
    feas = [r for r, v in res.history if v == "feasible"]
    bad = [r for r, v in res.history if v != "feasible"]
    assert not feas or not bad or max(feas) < min(bad)


def test_bisection_matches_grid_oracle():
    scn = tiny_scenario()
    res = bisection_solve(scn, W1, T1, eps=0.01)
    ref = grid_oracle(scn, W1, T1)
    assert abs(res.r_star - ref.r_star) <= max(2 * 0.01, 0.05)
    # the oracle's own pair really achieves its utility
    bf = metrics.BeamformerSet(ref.comm, ref.radar)
    assert bf.within_power(1.0)
    sinr = metrics.comm_sinrs(bf, scn.users)[0]
    assert (sinr - 0.5) / 0.5 >= ref.r_star - 1e-9


def test_grid_oracle_size_guard():
    with pytest.raises(SizeError):
        grid_oracle(small_scenario(), Weights.uniform(0.5, 2, 2), Thresholds(1.0, (1.0, 1.0)))


def test_unreachable_floors_raise():
    scn = tiny_scenario()
    with pytest.raises(ThresholdsInfeasibleError):
        bisection_solve(scn, W1, Thresholds(0.5, (1e12,)))
    with pytest.raises(ThresholdsInfeasibleError):
        bisection_solve(scn, W1, Thresholds(500.0, (0.5,)))


def test_mode_mismatch():
    scn = small_scenario()
    with pytest.raises(ConfigError):
        compile_feasibility(scn, Weights.uniform(0.5, 2, 2), Thresholds(1.0, (1.0, 1.0)), 0.0, SchemeMode.MI_CONSTRAINED)
    s0 = scenario_for_mode(scn, SchemeMode.MI_CONSTRAINED)
    assert s0.signal.n_radar_streams == 0
    sys = compile_feasibility(s0, Weights.uniform(0.5, 2, 2), Thresholds(1.0, (1.0, 1.0)), 0.0, "mi_constrained")
    assert not any(lab.startswith("zf") for lab in sys.labels())


def test_mode_degenerations():
    scn = small_scenario()
    w, t = Weights.uniform(0.5, 2, 2), Thresholds(2.0, (3.0, 3.0))
    e = effective(scn, w, t, SchemeMode.SENSING_CENTRIC)
    assert (e.alpha, e.mi_floor) == (1.0, 0.0) and np.all(e.omega == 0) and np.all(e.sinr_floors == 3.0)
    e = effective(scn, w, t, SchemeMode.RADAR_ONLY)
    assert not e.users and np.all(e.sinr_floors == 0)
    e = effective(scn, w, t, SchemeMode.COMM_CENTRIC)
    assert e.alpha == 0.0 and np.allclose(e.omega, 0.5) and np.all(e.sinr_floors == 0) and e.mi_floor == 2.0
    e = effective(scn, w, t, SchemeMode.COMM_ONLY)
    assert not e.targets and not e.zf
    e = effective(scn, w, t, SchemeMode.ZF_VIOLATED)
    assert e.targets and not e.zf


def test_solution_meets_final_system():
    scn = small_scenario(seed=3)
    w, t = Weights.uniform(0.5, 2, 2), Thresholds(1.0, (1.0, 1.0))
    res = bisection_solve(scn, w, t, eps=0.05)
    sys = compile_feasibility(scn, w, t, res.r_star)
    res_v, eigs = check_violations(res.point, sys)
    tau = solver_params(scn).tau_feas
    assert res_v.max() <= tau and eigs.min() >= -tau
    assert np.trace(res.point.total()).real <= scn.signal.total_power * (1 + 1e-12)
    a = res.achieved
    assert a["i_up_bits"] >= t.mi_floor and np.all(a["sinrs"] >= np.array(t.sinr_floors) - 1e-6)


def test_never_exceeds_r_max():
    for seed in range(50):
        geom = ArrayGeometry(2, 2)
        rng = np.random.default_rng(seed)
        h = rng.standard_normal((1, 2)) + 1j * rng.standard_normal((1, 2))
        scn = Scenario(geom, UserSet(h, [rng.uniform(0.2, 2)]), TargetSet([rng.uniform(-60, 60)], [1.0]),
                       SignalConfig(8, rng.uniform(0.5, 2.0), 1, 1.0))
        res = bisection_solve(scn, W1, Thresholds(0.0, (0.0,)), eps=0.05)
        assert 0.0 <= res.r_star <= res.r_max


def test_scheme_ordering():
    scn = small_scenario(seed=1)
    t = Thresholds(1.0, (1.0, 1.0))
    w = Weights.uniform(0.5, 2, 2)
    gen = bisection_solve(scn, w, t, eps=0.05).achieved["i_up_bits"]
    sc = bisection_solve(scn, w, t, SchemeMode.SENSING_CENTRIC, eps=0.05).achieved["i_up_bits"]
    zf = bisection_solve(scn, w, t, SchemeMode.ZF_VIOLATED, eps=0.05).achieved["i_up_bits"]
    assert sc >= gen - 0.1
    assert zf >= gen - 0.1


def test_pareto_sweep_shape_and_floors():
    scn = small_scenario(seed=2)
    t = Thresholds(1.0, (1.0, 1.0))
    pts = pareto_sweep(scn, t, [0.2, 0.5, 0.8], eps=0.05)
    assert [p.alpha for p in pts] == [0.2, 0.5, 0.8]
    for p in pts:
        assert p.status == "ok"
        assert p.i_up_bits >= t.mi_floor - 1e-6
        assert np.all(p.sinrs >= np.array(t.sinr_floors) - 1e-6)
    assert set(pts[0].row()) == {"alpha", "i_up_bits", "exact_mi_bits", "avg_rate", "r_star", "status"}


def test_pareto_sweep_records_failures():
    pts = pareto_sweep(tiny_scenario(), Thresholds(0.5, (1e12,)), [0.3, 0.7])
    assert len(pts) == 2 and all(p.status == "thresholds_infeasible" for p in pts)
    assert all(math.isnan(p.i_up_bits) for p in pts)
