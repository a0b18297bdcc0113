"""Max-min weighted utility over the ISAC performance region.

For a fixed utility level ``r`` the weighted problem becomes a convex
feasibility problem over the stream covariances; the bisection in
:func:`bisection_solve` walks ``r`` up to the Pareto boundary.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import metrics
from .errors import ConfigError, SizeError, SolverStalledError, ThresholdsInfeasibleError
from .metrics import CovarianceSet
from .scenario import Scenario, tx_steering
from .sdpcore import ConstraintSystem, FeasibilityReport, Kind, SolverParams, Status, solve_feasibility

log = logging.getLogger(__name__)


class SchemeMode(str, enum.Enum):
    GENERAL = "general"
    SENSING_CENTRIC = "sensing_centric"
    COMM_CENTRIC = "comm_centric"
    RADAR_ONLY = "radar_only"
    COMM_ONLY = "comm_only"
    MI_CONSTRAINED = "mi_constrained"
    ZF_VIOLATED = "zf_violated"


@dataclass(frozen=True)
class Weights:
    alpha: float
    user_weights: tuple[float, ...]
    target_weights: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "user_weights", tuple(float(w) for w in self.user_weights))
        object.__setattr__(self, "target_weights", tuple(float(w) for w in self.target_weights))
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if any(not w > 0 for w in self.user_weights + self.target_weights):
            raise ConfigError("user and target weights must be strictly positive")
        if not math.isclose(self.alpha + sum(self.user_weights), 1.0, abs_tol=1e-9):
            raise ConfigError("alpha + sum(user_weights) must equal 1")
        if not math.isclose(sum(self.target_weights), 1.0, abs_tol=1e-9):
            raise ConfigError("target weights must sum to 1")

    @classmethod
    def uniform(cls, alpha: float, n_users: int, n_targets: int) -> "Weights":
        """Equal user weights (1 - alpha)/C and equal target weights 1/K."""
        return cls(alpha, ((1.0 - alpha) / n_users,) * n_users, (1.0 / n_targets,) * n_targets)


@dataclass(frozen=True)
class Thresholds:
    mi_floor: float
    sinr_floors: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "sinr_floors", tuple(float(g) for g in self.sinr_floors))
        if self.mi_floor < 0 or any(g < 0 for g in self.sinr_floors):
            raise ConfigError("thresholds must be non-negative")


@dataclass(frozen=True)
class Effective:
    """Weights and floors after the mode degenerations are applied."""

    alpha: float
    omega: np.ndarray
    xi: np.ndarray
    mi_floor: float
    sinr_floors: np.ndarray
    users: bool
    targets: bool
    zf: bool


def effective(scn: Scenario, w: Weights, t: Thresholds, mode: SchemeMode) -> Effective:
    mode = SchemeMode(mode)
    n_users, n_targets = scn.n_users, scn.n_targets
    if len(w.user_weights) != n_users or len(t.sinr_floors) != n_users:
        raise ConfigError(f"weights/thresholds sized for a different user count than C={n_users}")
    if len(w.target_weights) != n_targets:
        raise ConfigError(f"target weights sized for a different target count than K={n_targets}")
    alpha, omega = w.alpha, np.array(w.user_weights)
    xi = np.array(w.target_weights)
    lam, gam = t.mi_floor, np.array(t.sinr_floors)
    users = targets = zf = True
    if mode in (SchemeMode.SENSING_CENTRIC, SchemeMode.RADAR_ONLY):
        lam, alpha, omega = 0.0, 1.0, np.zeros(n_users)
        if mode is SchemeMode.RADAR_ONLY:
            gam, users = np.zeros(n_users), False
    elif mode in (SchemeMode.COMM_CENTRIC, SchemeMode.MI_CONSTRAINED):
        gam, omega, alpha = np.zeros(n_users), np.full(n_users, 1.0 / n_users), 0.0
        if mode is SchemeMode.MI_CONSTRAINED:
            if scn.signal.n_radar_streams != 0:
                raise ConfigError("mi_constrained uses communication streams only; set n_radar_streams = 0")
            zf = False
    elif mode is SchemeMode.COMM_ONLY:
        targets = zf = False
    elif mode is SchemeMode.ZF_VIOLATED:
        zf = False
    return Effective(alpha, omega, xi, lam, gam, users, targets, zf)


def default_kappa(scn: Scenario) -> float:
    return 1e-6 * scn.signal.total_power


def target_power_floor(bits: float, variance: float, scn: Scenario) -> float:
    """Directional power a^H R_X a needed for log2(1 + SINR_k) >= bits."""
    sig = scn.signal
    if bits > 1000:
        return math.inf
    return (2.0**bits - 1.0) * sig.radar_noise / (scn.geometry.n_rx * variance * sig.block_length)


def compile_feasibility(
    scn: Scenario,
    w: Weights,
    t: Thresholds,
    r: float,
    mode: SchemeMode = SchemeMode.GENERAL,
    kappa: float | None = None,
    power_margin: float = 0.0,
) -> ConstraintSystem:
    """Constraint system of the feasibility subproblem at utility level ``r``.

    Rows are rescaled to power units (the set they describe is unchanged):
    directional terms by 1/N_t and each user row by 1/(|h|^2 (1 + c)).
    ``power_margin`` lowers the power budget so that a point accepted with
    tolerance still transmits at most P_T.
    """
    if r < 0:
        raise ValueError(f"utility level must be non-negative, got {r}")
    eff = effective(scn, w, t, mode)
    kappa = default_kappa(scn) if kappa is None else kappa
    n_tx, n_b = scn.geometry.n_tx, scn.n_blocks
    sys = ConstraintSystem(n_b, n_tx)
    eye = np.broadcast_to(np.eye(n_tx), (n_b, n_tx, n_tx))
    sys.add(eye, scn.signal.total_power - power_margin, Kind.AT_MOST, "power")

    a = tx_steering(scn.geometry, list(scn.targets.angles))  # (N_t, K)
    k_count = scn.n_targets
    if eff.zf:
        half = kappa / math.sqrt(2.0) / n_tx
        for i in range(k_count):
            for j in range(k_count):
                if i == j:
                    continue
                c = np.outer(a[:, i], a[:, j].conj()) / n_tx  # <c, R> = a_i^H R a_j / N_t
                for part, coeff in (("re", c), ("im", 1j * c)):
                    blk = np.broadcast_to(0.5 * (coeff + coeff.conj().T), (n_b, n_tx, n_tx))
                    label = f"zf_{part}[{i},{j}]"
                    sys.add(blk, half, Kind.AT_MOST, label)
                    sys.add(blk, -half, Kind.AT_LEAST, label)

    if eff.targets:
        for k in range(k_count):
            bits = eff.xi[k] * (eff.mi_floor + eff.alpha * r)
            floor = target_power_floor(bits, scn.targets.variances[k], scn)
            aa = np.outer(a[:, k], a[:, k].conj()) / n_tx
            sys.add(np.broadcast_to(aa, (n_b, n_tx, n_tx)), floor / n_tx, Kind.AT_LEAST, f"target[{k}]")

    if eff.users:
        h = scn.users.channels
        for i in range(scn.n_users):
            c = eff.sinr_floors[i] + eff.omega[i] * r
            hh = np.outer(h[i], h[i].conj())
            scale = 1.0 / (np.vdot(h[i], h[i]).real * (1.0 + c))
            blk = np.broadcast_to(-c * hh, (n_b, n_tx, n_tx)).copy()
            blk[i] = hh
            sys.add(blk * scale, c * scn.users.noise_powers[i] * scale, Kind.AT_LEAST, f"user[{i}]")
    return sys


def r_upper_bound(scn: Scenario, w: Weights | Effective) -> float:
    """Utility level that is certainly outside the region.

    sum_i P_T w_i |h_i|^2 / sigma_i^2 + alpha sum_k log2(1 + P_T N_t^2 sigma_k^2 L / sigma_r^2)
    """
    sig = scn.signal
    if isinstance(w, Weights):
        alpha, omega = w.alpha, np.asarray(w.user_weights)
    else:
        alpha, omega = w.alpha, w.omega
    h2 = np.sum(np.abs(scn.users.channels) ** 2, axis=1)
    comm = float(np.sum(sig.total_power * omega * h2 / scn.users.noise_powers))
    var = np.asarray(scn.targets.variances)
    sense = alpha * float(
        np.sum(np.log2(1.0 + sig.total_power * scn.geometry.n_tx**2 * var * sig.block_length / sig.radar_noise))
    )
    return comm + sense


@dataclass(eq=False)
class ParetoPoint:
    alpha: float
    i_up_bits: float
    exact_mi_bits: float
    sinrs: np.ndarray
    avg_rate: float
    r_star: float = math.nan
    status: str = "ok"

    def row(self) -> dict:
        return {
            "alpha": self.alpha,
            "i_up_bits": self.i_up_bits,
            "exact_mi_bits": self.exact_mi_bits,
            "avg_rate": self.avg_rate,
            "r_star": self.r_star,
            "status": self.status,
        }


@dataclass(eq=False)
class BisectionResult:
    r_star: float
    r_max: float
    point: CovarianceSet
    achieved: dict
    iterations: int
    history: list[tuple[float, str]] = field(default_factory=list)
    final_report: FeasibilityReport | None = None
    rescaled: float = 1.0


def solver_params(scn: Scenario, tau_feas: float | None = None, max_iter: int = 20000, **kw) -> SolverParams:
    tau = 1e-6 * scn.signal.total_power if tau_feas is None else tau_feas
    return SolverParams(max_iter=max_iter, tau_feas=tau, **kw)


def bisection_iterations(r_max: float, eps: float) -> int:
    return max(0, math.ceil(math.log2(r_max / eps))) if r_max > eps else 0


def bisection_solve(
    scn: Scenario,
    w: Weights,
    t: Thresholds,
    mode: SchemeMode = SchemeMode.GENERAL,
    eps: float = 0.01,
    kappa: float | None = None,
    params: SolverParams | None = None,
    r_max: float | None = None,
    warm_start: bool = True,
) -> BisectionResult:
    """Bisection on the utility level over [0, r_max].

    The r = 0 subproblem is checked first; an infeasible verdict there means
    the floors (Lambda, Gamma) are outside the region.  Each step halves the
    bracket, so exactly ceil(log2(r_max / eps)) feasibility checks follow.
    The returned point is the solution at the final lower end of the bracket.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    mode = SchemeMode(mode)
    params = params or solver_params(scn)
    eff = effective(scn, w, t, mode)
    r_hi = r_upper_bound(scn, eff) if r_max is None else float(r_max)
    init = CovarianceSet.isotropic(scn.n_blocks, scn.geometry.n_tx, scn.signal.total_power)

    def check(r: float, start: CovarianceSet = init) -> FeasibilityReport:
        sys = compile_feasibility(scn, w, t, r, mode, kappa, power_margin=params.tau_feas)
        return solve_feasibility(sys, start, params)

    base = check(0.0)
    history: list[tuple[float, str]] = []
    if base.status is Status.INFEASIBLE:
        raise ThresholdsInfeasibleError(
            f"floors outside the achievable region (worst residual {base.max_violation:.3e} at r = 0)"
        )
    if base.status is Status.STALLED:
        raise SolverStalledError(f"feasibility at r = 0 undecided after {base.iterations} sweeps")

    r_lo, best = 0.0, base
    n_iter = bisection_iterations(r_hi, eps)
    hi = r_hi
    for _ in range(n_iter):
        mid = 0.5 * (r_lo + hi)
        rep = check(mid, best.point if warm_start else init)
        history.append((mid, rep.status.value))
        log.debug("r=%.6g -> %s (%d sweeps, viol %.3e)", mid, rep.status.value, rep.iterations, rep.max_violation)
        if rep.feasible:
            r_lo, best = mid, rep
        else:
            hi = mid

    # Final re-solve at the last feasible level.
    final = check(r_lo, best.point if warm_start else init) if n_iter else best
    if not final.feasible:
        final = best
    point = final.point
    power = float(np.trace(point.total()).real)
    scale = 1.0
    if power > scn.signal.total_power:
        # shrinking keeps PSD/ZF and only costs the tolerance slack
        scale = scn.signal.total_power / power
        point = point.scaled(scale)
    return BisectionResult(
        r_star=r_lo,
        r_max=r_hi,
        point=point,
        achieved=metrics.evaluate(point, scn),
        iterations=n_iter,
        history=history,
        final_report=final,
        rescaled=scale,
    )


def scenario_for_mode(scn: Scenario, mode: SchemeMode) -> Scenario:
    """Scenario adjusted to what a scheme transmits (MIConstrained: no radar streams)."""
    if SchemeMode(mode) is SchemeMode.MI_CONSTRAINED and scn.signal.n_radar_streams:
        return scn.replace(n_radar_streams=0)
    return scn


def pareto_sweep(
    scn: Scenario,
    t: Thresholds,
    alpha_grid: Sequence[float],
    mode: SchemeMode = SchemeMode.GENERAL,
    eps: float = 0.01,
    kappa: float | None = None,
    params: SolverParams | None = None,
) -> list[ParetoPoint]:
    """One bisection per alpha with uniform weights; failures are recorded, not raised."""
    points = []
    for alpha in alpha_grid:
        try:
            w = Weights.uniform(float(alpha), scn.n_users, scn.n_targets)
            res = bisection_solve(scn, w, t, mode, eps=eps, kappa=kappa, params=params)
        except (ThresholdsInfeasibleError, SolverStalledError, ConfigError) as exc:
            log.warning("alpha=%g failed: %s", alpha, exc)
            status = "thresholds_infeasible" if isinstance(exc, ThresholdsInfeasibleError) else (
                "stalled" if isinstance(exc, SolverStalledError) else "config_error"
            )
            nan_sinrs = np.full(scn.n_users, math.nan)
            points.append(ParetoPoint(float(alpha), math.nan, math.nan, nan_sinrs, math.nan, math.nan, status))
            continue
        a = res.achieved
        points.append(
            ParetoPoint(float(alpha), a["i_up_bits"], a["exact_mi_bits"], a["sinrs"], a["avg_rate"], res.r_star)
        )
    return points


@dataclass(eq=False)
class GridOracleResult:
    r_star: float
    comm: np.ndarray
    radar: np.ndarray


def _unit_directions(points: int) -> np.ndarray:
    phi = np.linspace(0.0, 0.5 * np.pi, points)
    psi = np.linspace(0.0, 2.0 * np.pi, points, endpoint=False)
    ph, ps = np.meshgrid(phi, psi, indexing="ij")
    return np.stack([np.cos(ph).ravel(), (np.sin(ph) * np.exp(1j * ps)).ravel()], axis=1)


def _frontier(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Indices not dominated when both x and y are to be maximised."""
    order = np.lexsort((-y, -x))
    keep, best_y = [], -np.inf
    for i in order:
        if y[i] > best_y:
            keep.append(i)
            best_y = y[i]
    return np.array(keep, dtype=int)


def grid_oracle(scn: Scenario, w: Weights, t: Thresholds, points: int = 50) -> GridOracleResult:
    """Exhaustive rank-one search for N_t = 2, C = 1, K = 1, M = 1 (General mode).

    Each beamformer is sqrt(p) (cos phi, sin phi e^{j psi}) with ``points``
    values per parameter.  The utility of a pair is the smallest weighted
    excess over the floors, and the result is its maximum over all pairs with
    p_1 + p_2 <= P_T.  Directions dominated in (target gain, user gain) are
    pruned first, which never changes the maximum.
    """
    if (scn.geometry.n_tx, scn.n_users, scn.n_targets, scn.signal.n_radar_streams) != (2, 1, 1, 1):
        raise SizeError("grid oracle requires N_t = 2, C = 1, K = 1, M = 1")
    sig = scn.signal
    a = tx_steering(scn.geometry, scn.targets.angles[0])
    h = scn.users.channels[0]
    dirs = _unit_directions(points)
    tg = np.abs(dirs.conj() @ a) ** 2
    ug = np.abs(dirs.conj() @ h) ** 2
    d1 = _frontier(tg, ug)  # user beam: wants both gains high
    d2 = _frontier(tg, -ug)  # radar beam: wants target gain high, leakage low
    powers = np.linspace(0.0, sig.total_power, points)
    p1, p2 = np.meshgrid(powers, powers, indexing="ij")
    ok = p1 + p2 <= sig.total_power * (1 + 1e-12)
    p1, p2 = p1[ok], p2[ok]

    scale = scn.geometry.n_rx * scn.targets.variances[0] * sig.block_length / sig.radar_noise
    xi, alpha, omega = w.target_weights[0], w.alpha, w.user_weights[0]
    best, arg = -np.inf, None
    for j in d2:
        t_tot = p1[:, None] * tg[d1][None, :] + (p2 * tg[j])[:, None]
        interf = (p2 * ug[j])[:, None] + scn.users.noise_powers[0]
        sinr_u = p1[:, None] * ug[d1][None, :] / interf
        r_user = (sinr_u - t.sinr_floors[0]) / omega
        r_target = (np.log2(1.0 + scale * t_tot) / xi - t.mi_floor) / alpha
        r = np.minimum(r_user, r_target)
        k = int(np.argmax(r))
        if r.flat[k] > best:
            best = float(r.flat[k])
            pi, di = np.unravel_index(k, r.shape)
            arg = (np.sqrt(p1[pi]) * dirs[d1[di]], np.sqrt(p2[pi]) * dirs[j])
    return GridOracleResult(best, arg[0][None, :], arg[1][None, :])
