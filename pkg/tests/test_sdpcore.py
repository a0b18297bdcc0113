import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import tiny_scenario
from mimo_isac.errors import NumericError
from mimo_isac.metrics import CovarianceSet
from mimo_isac.pareto import Thresholds, Weights, compile_feasibility, grid_oracle
from mimo_isac.sdpcore import (
    ConstraintSystem,
    Kind,
    SolverParams,
    Status,
    check_violations,
    max_violation,
    project_psd,
    solve_feasibility,
)


def test_project_psd_examples():
    assert np.allclose(project_psd(np.diag([1.0, -2.0])), np.diag([1.0, 0.0]))
    assert np.allclose(project_psd([[0.0, 1.0], [1.0, 0.0]]), 0.5 * np.ones((2, 2)))


def test_project_psd_idempotent(rng):
    g = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    p = g @ g.conj().T
    assert np.allclose(project_psd(p), p, atol=1e-10)


def test_project_psd_stack(rng):
    g = rng.standard_normal((3, 4, 4)) + 1j * rng.standard_normal((3, 4, 4))
    h = g + np.swapaxes(g, -1, -2).conj()
    out = project_psd(h)
    for k in range(3):
        assert np.allclose(out[k], project_psd(h[k]))


def test_project_psd_rejects_non_finite():
    with pytest.raises(NumericError):
        project_psd(np.array([[np.nan, 0.0], [0.0, 1.0]]))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_project_psd_is_psd(seed):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    h = g + g.conj().T
    assert np.linalg.eigvalsh(project_psd(h))[0] >= -1e-10 * np.linalg.norm(h)


def test_project_psd_beats_random_psd_probes(rng):
    # brute-force near-optimality on 2x2 inputs
    for _ in range(5):
        g = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        h = g + g.conj().T
        best = np.linalg.norm(h - project_psd(h))
        z = rng.standard_normal((10_000, 2, 2)) + 1j * rng.standard_normal((10_000, 2, 2))
        probes = z @ np.swapaxes(z, -1, -2).conj() * rng.uniform(0, 2, (10_000, 1, 1))
        dist = np.linalg.norm(h[None] - probes, axis=(1, 2))
        assert best <= dist.min() + 1e-12


def _single_trace_system(bound, kind, n=2):
    sys = ConstraintSystem(1, n)
    sys.add(np.eye(n), bound, kind, "trace")
    return sys


def test_single_halfspace_feasible_fast():
    sys = _single_trace_system(1.0, Kind.AT_MOST)
    init = CovarianceSet(2 * np.eye(2)[None] / 2)  # 2 I / N with N = 2
    rep = solve_feasibility(sys, init, SolverParams(tau_feas=1e-9))
    assert rep.status is Status.FEASIBLE
    assert rep.iterations <= 5
    assert np.trace(rep.point.blocks[0]).real <= 1 + 1e-9


def test_contradictory_pair_infeasible():
    sys = _single_trace_system(1.0, Kind.AT_MOST)
    sys.add(np.eye(2)[None], 2.0, Kind.AT_LEAST, "too much")
    rep = solve_feasibility(sys)
    assert rep.status is Status.INFEASIBLE
    assert rep.max_violation > 0


def test_contradiction_without_budget_certificate():
    # the plateau rule, not the trace certificate, must catch this one
    sys = ConstraintSystem(1, 2)
    e = np.diag([1.0, 0.0])
    sys.add(e, 1.0, Kind.AT_MOST, "a")
    sys.add(e, 2.0, Kind.AT_LEAST, "b")
    rep = solve_feasibility(sys)
    assert rep.status is Status.INFEASIBLE
    assert 0.4 < rep.max_violation < 1.1


def test_equality_constraint():
    sys = ConstraintSystem(2, 3)
    sys.add(np.broadcast_to(np.eye(3), (2, 3, 3)), 1.5, Kind.EQUAL, "sum")
    rep = solve_feasibility(sys, params=SolverParams(tau_feas=1e-9))
    assert rep.feasible
    assert abs(np.trace(rep.point.total()).real - 1.5) <= 1e-9


def test_stalled_when_iterations_run_out():
    scn = tiny_scenario()
    sys = compile_feasibility(scn, Weights(0.5, (0.5,), (1.0,)), Thresholds(0.5, (0.5,)), 2.99)
    rep = solve_feasibility(sys, params=SolverParams(max_iter=3, tau_feas=1e-12))
    assert rep.status is Status.STALLED
    assert rep.iterations == 3


def test_check_violations_examples():
    sys = _single_trace_system(2.0, Kind.AT_LEAST)
    res, eigs = check_violations(CovarianceSet(np.zeros((1, 2, 2))), sys)
    assert np.allclose(res, [2.0])
    assert np.allclose(eigs, [0.0])


def test_report_consistent_with_check(rng):
    scn = tiny_scenario()
    sys = compile_feasibility(scn, Weights(0.5, (0.5,), (1.0,)), Thresholds(0.5, (0.5,)), 1.0)
    rep = solve_feasibility(sys)
    assert rep.feasible
    res, eigs = check_violations(rep.point, sys)
    assert np.all(res <= 1e-6)
    assert eigs.min() >= -1e-6
    assert abs(max_violation(rep.point, sys) - rep.max_violation) <= 1e-12


def test_best_violation_monotone_and_deterministic():
    scn = tiny_scenario()
    sys = compile_feasibility(scn, Weights(0.5, (0.5,), (1.0,)), Thresholds(0.5, (0.5,)), 3.2)
    a = solve_feasibility(sys)
    b = solve_feasibility(sys)
    assert np.all(np.diff(a.best_history) <= 0)
    assert a.status is b.status and a.iterations == b.iterations
    assert np.array_equal(a.point.blocks, b.point.blocks)


def test_rejects_non_hermitian_and_bad_shapes():
    sys = ConstraintSystem(1, 2)
    with pytest.raises(ValueError):
        sys.add(np.array([[0.0, 1.0], [0.0, 0.0]]), 1.0, Kind.AT_MOST)
    with pytest.raises(ValueError):
        sys.add(np.eye(3), 1.0, Kind.AT_MOST)
    with pytest.raises(ValueError):
        solve_feasibility(_single_trace_system(1.0, Kind.AT_MOST), CovarianceSet(np.eye(3)))


def test_agrees_with_grid_oracle():
    scn = tiny_scenario()
    w, t = Weights(0.5, (0.5,), (1.0,)), Thresholds(0.5, (0.5,))
    r_grid = grid_oracle(scn, w, t).r_star
    # probes kept away from the boundary, where the grid resolution decides
    probes = np.concatenate([np.linspace(0.0, r_grid - 0.1, 10), np.linspace(r_grid + 0.1, 2 * r_grid, 10)])
    for r in probes:
        rep = solve_feasibility(compile_feasibility(scn, w, t, r))
        assert rep.feasible == (r <= r_grid), (r, rep.status)
