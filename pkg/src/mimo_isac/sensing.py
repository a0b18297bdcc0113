"""Echo simulation and Capon angle estimation for a solved transmit design."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DomainError
from .metrics import BeamformerSet
from .scenario import STREAM_ECHO, STREAM_SYMBOLS, ArrayGeometry, Scenario, TargetSet, rx_steering, substream, tx_steering

DEFAULT_STEP = 0.1
LOADING = 1e-3


def default_grid(step: float = DEFAULT_STEP) -> np.ndarray:
    """Angles strictly inside (-90, 90) on a ``step``-degree lattice through 0."""
    n = int(np.floor((90.0 - 1e-9) / step))
    return np.arange(-n, n + 1) * step


@dataclass(frozen=True, eq=False)
class EchoScenario:
    target_amplitudes: np.ndarray
    radar_noise: float
    seed: int = 0

    def __post_init__(self):
        beta = np.atleast_1d(np.asarray(self.target_amplitudes, dtype=complex))
        if self.radar_noise < 0:
            raise ValueError("radar_noise must be non-negative")
        object.__setattr__(self, "target_amplitudes", beta)


@dataclass(frozen=True, eq=False)
class CaponResult:
    grid: np.ndarray
    spectrum: np.ndarray
    peaks: np.ndarray
    degenerate: bool = False


def _cn(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def synthesize_transmit(b: BeamformerSet, block_length: int, seed: int) -> np.ndarray:
    """X = W S with i.i.d. unit-variance complex Gaussian symbols, shape (N_t, L)."""
    w = b.all_vectors  # (streams, N_t)
    if block_length < w.shape[0]:
        raise ValueError(f"block length {block_length} is shorter than the {w.shape[0]} streams")
    s = _cn(substream(seed, STREAM_SYMBOLS), (w.shape[0], block_length))
    return w.T @ s


def simulate_echo(x: np.ndarray, targets: TargetSet, echo: EchoScenario, geom: ArrayGeometry) -> np.ndarray:
    """Y = sum_k beta_k b(theta_k) a(theta_k)^H X + Z, shape (N_r, L)."""
    x = np.asarray(x, dtype=complex)
    if x.shape[0] != geom.n_tx:
        raise ValueError(f"transmit matrix has {x.shape[0]} rows, array has {geom.n_tx}")
    if len(echo.target_amplitudes) != len(targets):
        raise ValueError("one amplitude per target is required")
    a = tx_steering(geom, list(targets.angles))
    b = rx_steering(geom, list(targets.angles))
    g = (b * echo.target_amplitudes) @ a.conj().T
    y = g @ x
    if echo.radar_noise > 0:
        y = y + np.sqrt(echo.radar_noise) * _cn(substream(echo.seed, STREAM_ECHO), y.shape)
    return y


def capon_spectrum(y: np.ndarray, geom: ArrayGeometry, grid: Sequence[float] | None = None) -> CaponResult:
    """Capon spectrum 1 / (b^H R^-1 b) with diagonal loading."""
    y = np.asarray(y, dtype=complex)
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    n_rx, n_snap = y.shape
    r = y @ y.conj().T / n_snap
    load = LOADING * np.trace(r).real / n_rx
    if load <= 0:
        load = LOADING  # all-zero data; keeps the inverse defined
    r = r + load * np.eye(n_rx)
    b = rx_steering(geom, grid)
    rinv_b = np.linalg.solve(r, b)
    spec = 1.0 / np.maximum(np.einsum("ng,ng->g", b.conj(), rinv_b).real, 1e-300)
    return CaponResult(grid, spec, np.array([]))


def estimate_angles(res: CaponResult, k: int) -> CaponResult:
    """Keep the K largest local maxima (sorted by angle).

    Fewer than K maxima: the global peak is repeated and ``degenerate`` set.
    """
    spec, grid = np.asarray(res.spectrum, dtype=float), np.asarray(res.grid, dtype=float)
    if spec.size == 0:
        raise DomainError("empty spectrum")
    if spec.size >= 3:
        inner = np.flatnonzero((spec[1:-1] > spec[:-2]) & (spec[1:-1] > spec[2:])) + 1
    else:
        inner = np.array([], dtype=int)
    # larger value first, then smaller angle
    order = inner[np.lexsort((grid[inner], -spec[inner]))]
    chosen = list(order[:k])
    degenerate = len(chosen) < k
    if degenerate:
        top = int(np.lexsort((grid, -spec))[0])
        chosen += [top] * (k - len(chosen))
    peaks = np.sort(grid[chosen])
    return CaponResult(grid, spec, peaks, degenerate)


def angle_errors(estimates: Sequence[float], truth: Sequence[float]) -> np.ndarray:
    """Errors after matching estimates to targets (minimum total squared error)."""
    est, tru = np.asarray(estimates, dtype=float), np.asarray(truth, dtype=float)
    cost = (est[:, None] - tru[None, :]) ** 2
    rows, cols = linear_sum_assignment(cost)
    return est[rows] - tru[cols]


def run_trial(scn: Scenario, bf: BeamformerSet, radar_noise: float, seed: int, grid=None) -> CaponResult:
    """One transmit block, echo and Capon estimate with unit target amplitudes."""
    x = synthesize_transmit(bf, scn.signal.block_length, seed)
    echo = EchoScenario(np.ones(scn.n_targets), radar_noise, seed)
    y = simulate_echo(x, scn.targets, echo, scn.geometry)
    return estimate_angles(capon_spectrum(y, scn.geometry, grid), scn.n_targets)


def rmse_mc(
    scn: Scenario,
    solved: BeamformerSet,
    snr_grid_db: Sequence[float],
    trials: int,
    base_seed: int = 0,
    grid=None,
) -> list[tuple[float, float]]:
    """(snr_db, rmse_deg) rows; radar noise sigma_r^2 = P_T / 10^(SNR/10)."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rows = []
    for snr_db in snr_grid_db:
        noise = scn.signal.total_power / 10.0 ** (float(snr_db) / 10.0)
        sq = []
        for trial in range(trials):
            est = run_trial(scn, solved, noise, base_seed + trial, grid)
            sq.append(angle_errors(est.peaks, scn.targets.angles) ** 2)
        rows.append((float(snr_db), float(np.sqrt(np.mean(sq)))))
    return rows
