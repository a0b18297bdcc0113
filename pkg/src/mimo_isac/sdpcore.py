"""Feasibility engine for linear constraints over a product of Hermitian PSD cones.

A point is a stack of B Hermitian N x N blocks.  Each constraint reads
``sum_n Re tr(C_n^H R_n) <kind> d`` and the solver searches the intersection
of all constraints with the PSD cone by cyclic Dykstra projections, using the
trace inner product ``<A, B> = Re tr(A^H B)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import NumericError
from .metrics import CovarianceSet, hermitian_part


class Kind(str, enum.Enum):
    EQUAL = "equal"
    AT_MOST = "at_most"
    AT_LEAST = "at_least"


class Status(str, enum.Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    STALLED = "stalled"


@dataclass(frozen=True, eq=False)
class Constraint:
    coeff_blocks: np.ndarray
    bound: float
    kind: Kind
    label: str = ""

    def __post_init__(self):
        c = np.asarray(self.coeff_blocks, dtype=complex)
        if c.ndim == 2:
            c = c[None]
        herm = hermitian_part(c)
        scale = max(np.linalg.norm(c), 1e-300)
        if np.linalg.norm(c - herm) > 1e-12 * scale:
            raise ValueError(f"coefficient blocks of constraint {self.label!r} are not Hermitian")
        object.__setattr__(self, "coeff_blocks", herm)
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "bound", float(self.bound))


@dataclass(eq=False)
class ConstraintSystem:
    n_blocks: int
    block_dim: int
    constraints: list[Constraint] = field(default_factory=list)

    def add(self, coeff_blocks, bound: float, kind, label: str = "") -> Constraint:
        c = Constraint(coeff_blocks, bound, kind, label)
        if c.coeff_blocks.shape != (self.n_blocks, self.block_dim, self.block_dim):
            raise ValueError(
                f"constraint {label!r} has shape {c.coeff_blocks.shape}, "
                f"expected {(self.n_blocks, self.block_dim, self.block_dim)}"
            )
        self.constraints.append(c)
        return c

    def __len__(self):
        return len(self.constraints)

    def labels(self) -> list[str]:
        return [c.label for c in self.constraints]

    def coefficient_matrix(self) -> np.ndarray:
        """Constraints as rows of real vectors (real view of the blocks)."""
        if not self.constraints:
            return np.zeros((0, 2 * self.n_blocks * self.block_dim**2))
        return np.stack([c.coeff_blocks.reshape(-1).view(float) for c in self.constraints])

    def values(self, point: CovarianceSet) -> np.ndarray:
        x = np.ascontiguousarray(point.blocks).reshape(-1).view(float)
        return self.coefficient_matrix() @ x


@dataclass(frozen=True)
class SolverParams:
    max_iter: int = 20000
    tau_feas: float = 1e-6
    plateau_window: int = 500
    plateau_rtol: float = 1e-9


@dataclass(eq=False)
class FeasibilityReport:
    status: Status
    point: CovarianceSet
    iterations: int
    max_violation: float
    best_history: list[float] = field(default_factory=list, repr=False)

    @property
    def feasible(self) -> bool:
        return self.status is Status.FEASIBLE


def project_psd(h: np.ndarray) -> np.ndarray:
    """Nearest PSD matrix in Frobenius norm (eigenvalue clipping).

    Works on a single matrix or a stack of matrices along the first axis.
    """
    a = hermitian_part(np.asarray(h, dtype=complex))
    if not np.all(np.isfinite(a)):
        raise NumericError("matrix has non-finite entries")
    vals, vecs = np.linalg.eigh(a)
    recon = (vecs * vals[..., None, :]) @ np.swapaxes(vecs, -1, -2).conj()
    err = np.linalg.norm(a - recon, axis=(-2, -1))
    ref = np.linalg.norm(a, axis=(-2, -1))
    if np.any(err > 1e-8 * np.maximum(ref, 1e-300)):
        raise NumericError(f"eigendecomposition residual {np.max(err):.3e} too large")
    clipped = np.maximum(vals, 0.0)
    out = (vecs * clipped[..., None, :]) @ np.swapaxes(vecs, -1, -2).conj()
    return hermitian_part(out)


def _residuals(values: np.ndarray, bounds: np.ndarray, kinds: Sequence[Kind]) -> np.ndarray:
    res = np.empty_like(values)
    for j, kind in enumerate(kinds):
        if kind is Kind.AT_MOST:
            res[j] = max(0.0, values[j] - bounds[j])
        elif kind is Kind.AT_LEAST:
            res[j] = max(0.0, bounds[j] - values[j])
        else:
            res[j] = abs(values[j] - bounds[j])
    return res


def check_violations(point: CovarianceSet, sys: ConstraintSystem) -> tuple[np.ndarray, np.ndarray]:
    """Per-constraint residuals (0 when satisfied) and per-block minimum eigenvalue."""
    values = sys.values(point)
    bounds = np.array([c.bound for c in sys.constraints])
    kinds = [c.kind for c in sys.constraints]
    return _residuals(values, bounds, kinds), point.min_eigenvalues()


def max_violation(point: CovarianceSet, sys: ConstraintSystem) -> float:
    res, eigs = check_violations(point, sys)
    worst = float(res.max()) if res.size else 0.0
    return max(worst, float(max(0.0, -eigs.min())))


def _budget_certificate(sys: ConstraintSystem, tau: float) -> str | None:
    """Cheap infeasibility proof from a trace budget ``sum tr(R_n) <= P``.

    Over {R_n PSD, sum tr R_n <= P} the largest value of <C, R> is
    P * max(0, max_n lambda_max(C_n)); an at-least bound above that (plus
    tolerance) can never be met.
    """
    eye = np.eye(sys.block_dim)
    budget = None
    for c in sys.constraints:
        if c.kind is Kind.AT_MOST and np.allclose(c.coeff_blocks, eye[None], atol=0, rtol=0):
            budget = c.bound if budget is None else min(budget, c.bound)
    for c in sys.constraints:
        if not np.isfinite(c.bound):
            if (c.kind is Kind.AT_LEAST and c.bound > 0) or (c.kind is Kind.AT_MOST and c.bound < 0) or c.kind is Kind.EQUAL:
                return c.label or "non-finite bound"
    if budget is None:
        return None
    if budget < -tau:
        return "negative power budget"
    for c in sys.constraints:
        if c.kind is Kind.AT_MOST:
            continue
        top = np.linalg.eigvalsh(c.coeff_blocks)[:, -1].max()
        sup = max(budget, 0.0) * max(top, 0.0)
        if sup < c.bound - tau:
            return c.label or "unreachable bound"
    return None


def solve_feasibility(
    sys: ConstraintSystem,
    init: CovarianceSet | None = None,
    params: SolverParams = SolverParams(),
) -> FeasibilityReport:
    """Search for a point of ``sys`` intersected with the PSD cones.

    Cyclic Dykstra over the halfspaces/hyperplanes and the product PSD cone,
    in that order, so every reported iterate is PSD.  Constraint rows are
    normalised internally; the returned ``max_violation`` uses the raw
    functionals.  Verdicts:

    * feasible: worst residual <= ``tau_feas``;
    * infeasible: a trace-budget certificate, or the best residual stalls
      (relative gain < ``plateau_rtol`` over ``plateau_window`` sweeps)
      above ``tau_feas``;
    * stalled: ``max_iter`` sweeps without either.
    """
    n_b, n = sys.n_blocks, sys.block_dim
    if init is None:
        init = CovarianceSet(np.broadcast_to(np.eye(n) / n, (n_b, n, n)))
    if init.blocks.shape != (n_b, n, n):
        raise ValueError(f"init has shape {init.blocks.shape}, expected {(n_b, n, n)}")
    tau = params.tau_feas

    cert = _budget_certificate(sys, tau)
    if cert is not None:
        point = CovarianceSet(project_psd(init.blocks))
        return FeasibilityReport(Status.INFEASIBLE, point, 0, max(max_violation(point, sys), np.inf if "non-finite" in cert else 0.0))

    a_raw = sys.coefficient_matrix()
    norms = np.linalg.norm(a_raw, axis=1)
    norms[norms == 0] = 1.0
    a = a_raw / norms[:, None]
    bounds = np.array([c.bound for c in sys.constraints])
    kinds = [c.kind for c in sys.constraints]
    lo_raw = np.where([k is Kind.AT_MOST for k in kinds], -np.inf, bounds)
    hi_raw = np.where([k is Kind.AT_LEAST for k in kinds], np.inf, bounds)
    lo, hi = lo_raw / norms, hi_raw / norms
    gram = a @ a.T
    gram_cols = [np.ascontiguousarray(gram[:, j]) for j in range(len(kinds))]
    m = len(kinds)

    def flat(xb: np.ndarray) -> np.ndarray:
        return np.ascontiguousarray(xb).reshape(-1).view(float)

    def violation(vals: np.ndarray) -> float:
        raw = vals * norms
        return float(np.max(np.maximum(np.maximum(lo_raw - raw, raw - hi_raw), 0.0))) if m else 0.0

    x = project_psd(init.blocks)
    shape = x.shape
    psd_incr = np.zeros_like(x)
    mu = np.zeros(m)  # Dykstra increments of the halfspaces, along each unit row
    vals = a @ flat(x)
    best = violation(vals)
    best_x = x
    history = [best]
    window_start = best
    if best <= tau:
        return FeasibilityReport(Status.FEASIBLE, CovarianceSet(x), 0, best, history)

    lo_l, hi_l = lo.tolist(), hi.tolist()
    for it in range(1, params.max_iter + 1):
        # Halfspace sweep in coordinates: x = base + sum_j coef_j * a_j.
        base = flat(x)
        coef = np.zeros(m)
        for j in range(m):
            v = vals[j] + mu[j]  # <a_j, x + mu_j a_j>
            p = min(max(v, lo_l[j]), hi_l[j])
            step = p - v + mu[j]  # net change of the coefficient on a_j
            if step != 0.0:
                coef[j] += step
                vals += step * gram_cols[j]
            mu[j] = v - p
        y = (base + a.T @ coef).view(complex).reshape(shape) + psd_incr
        x = _clip_eigen(y)
        psd_incr = y - x

        vals = a @ flat(x)
        cur = violation(vals)
        if cur < best:
            best, best_x = cur, x
        history.append(best)
        if best <= tau:
            return FeasibilityReport(Status.FEASIBLE, _checked(best_x), it, best, history)
        if it % params.plateau_window == 0:
            if window_start - best <= params.plateau_rtol * window_start:
                return FeasibilityReport(Status.INFEASIBLE, _checked(best_x), it, best, history)
            window_start = best
    return FeasibilityReport(Status.STALLED, _checked(best_x), params.max_iter, best, history)


def _clip_eigen(y: np.ndarray) -> np.ndarray:
    # inner-loop PSD projection; the eigen residual is verified on the returned point
    vals, vecs = np.linalg.eigh(y)
    vecs = vecs * np.sqrt(np.maximum(vals, 0.0))[..., None, :]
    return vecs @ np.swapaxes(vecs, -1, -2).conj()


def _checked(x: np.ndarray) -> CovarianceSet:
    return CovarianceSet(project_psd(x))
