"""Fast invariant suites run by ``mimo-isac selftest``."""

from __future__ import annotations

import time
from typing import Callable

import numpy as np

from . import metrics
from .metrics import CovarianceSet
from .pareto import Thresholds, Weights, bisection_solve, grid_oracle
from .rankone import extract_rank_one, verify_preservation
from .scenario import ArrayGeometry, RicianParams, Scenario, SignalConfig, TargetSet, UserSet, sample_rician_channels
from .sdpcore import project_psd


def _random_cov(rng, n_blocks, n, power):
    g = rng.standard_normal((n_blocks, n, n)) + 1j * rng.standard_normal((n_blocks, n, n))
    blocks = g @ np.swapaxes(g, -1, -2).conj()
    return CovarianceSet(blocks * power / np.trace(blocks.sum(0)).real)


def hadamard_bound(trials: int = 200) -> str:
    rng = np.random.default_rng(1)
    geom = ArrayGeometry(8, 8)
    sig = SignalConfig(64, 1.0, 1, 1.0)
    worst = -np.inf
    for t in range(trials):
        k = 1 + t % 3
        targets = TargetSet(np.sort(rng.choice(np.arange(-80, 81, 5), k, replace=False)).tolist(), [1.0] * k)
        c = _random_cov(rng, 2, 8, 1.0)
        gap = metrics.exact_sensing_mi(c, targets, sig, geom) - metrics.mi_upper_bound(c, targets, sig, geom)
        worst = max(worst, gap)
    assert worst <= 1e-9, f"exact MI exceeds the bound by {worst:.3e}"
    return f"max(exact - bound) = {worst:.2e}"


def oracle_equivalence(trials: int = 20) -> str:
    rng = np.random.default_rng(2)
    geom = ArrayGeometry(4, 2)
    sig = SignalConfig(8, 1.0, 0, 1.0)
    worst = 0.0
    for t in range(trials):
        k = 1 + t % 2
        targets = TargetSet([-30.0, 25.0][:k], rng.uniform(0.5, 2.0, k).tolist())
        x = rng.standard_normal((4, 8)) + 1j * rng.standard_normal((4, 8))
        exact = metrics.exact_sensing_mi(x @ x.conj().T / 8, targets, sig, geom)
        ref = metrics.sensing_mi_oracle(x, targets, sig, geom)
        worst = max(worst, abs(exact - ref) / max(abs(ref), 1e-300))
    assert worst <= 1e-8, f"relative mismatch {worst:.3e}"
    return f"max relative mismatch = {worst:.2e}"


def psd_projection() -> str:
    rng = np.random.default_rng(3)
    for _ in range(50):
        a = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
        a = a + a.conj().T
        p = project_psd(a)
        assert np.linalg.eigvalsh(p)[0] >= -1e-10 * np.linalg.norm(a)
        assert np.allclose(project_psd(p), p, atol=1e-10)
    return "50 projections PSD and idempotent"


def bisection_vs_grid() -> str:
    geom = ArrayGeometry(2, 2)
    h = np.array([[1.0, np.exp(1j * np.pi / 3)]])
    scn = Scenario(geom, UserSet(h, [1.0]), TargetSet([30.0], [1.0]), SignalConfig(8, 1.0, 1, 1.0))
    w, t = Weights(0.5, (0.5,), (1.0,)), Thresholds(0.5, (0.5,))
    res = bisection_solve(scn, w, t, eps=0.01)
    ref = grid_oracle(scn, w, t).r_star
    assert abs(res.r_star - ref) <= 0.05, f"r* {res.r_star:.4f} vs grid {ref:.4f}"
    return f"r* = {res.r_star:.4f}, grid optimum = {ref:.4f}"


def rank_one() -> str:
    geom = ArrayGeometry(4, 4)
    h = sample_rician_channels(geom, 2, RicianParams(1.0, seed=5))
    scn = Scenario(geom, UserSet(h, [0.1, 0.1]), TargetSet([-10.0, 40.0], [1.0, 1.0]), SignalConfig(16, 1.0, 2, 1.0))
    res = bisection_solve(scn, Weights.uniform(0.5, 2, 2), Thresholds(1.0, (1.0, 1.0)), eps=0.05)
    rep = extract_rank_one(res.point, scn.users, scn.signal.total_power)
    chk = verify_preservation(res.point, rep, scn)
    assert chk.ok, "; ".join(chk.failures)
    return f"{rep.n_radar} radar vectors, covariance residual {rep.cov_sum_residual:.1e}"


SUITES: dict[str, Callable[[], str]] = {
    "hadamard_bound": hadamard_bound,
    "oracle_equivalence": oracle_equivalence,
    "psd_projection": psd_projection,
    "bisection_vs_grid": bisection_vs_grid,
    "rank_one_preservation": rank_one,
}


def run_all() -> list[dict]:
    out = []
    for name, fn in SUITES.items():
        t0 = time.perf_counter()
        try:
            detail, ok = fn(), True
        except AssertionError as exc:
            detail, ok = str(exc), False
        out.append({"suite": name, "ok": ok, "detail": detail, "seconds": time.perf_counter() - t0})
    return out
