"""Rank-one beamformers from a relaxed (SDR) covariance solution.

Each user keeps the rank-one part of its covariance seen through its own
channel, w_i = R_i h_i / sqrt(h_i^H R_i h_i); everything left over in the
total covariance is PSD and becomes the radar streams.  Both the total
covariance and every user's useful power are unchanged, so all SINRs and
the MI values are too.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import metrics
from .errors import ExtractionError, NumericError
from .metrics import BeamformerSet, CovarianceSet, hermitian_part
from .scenario import Scenario, UserSet


@dataclass(eq=False)
class ExtractionReport:
    beamformers: BeamformerSet
    sinr_delta: np.ndarray
    mi_delta: float
    cov_sum_residual: float
    residual_min_eig: float
    configured_radar: int = 0

    @property
    def n_radar(self) -> int:
        return self.beamformers.radar.shape[0]


@dataclass(eq=False)
class PreservationCheck:
    ok: bool
    failures: list[str] = field(default_factory=list)

    def __bool__(self):
        return self.ok


def pivoted_cholesky(a: np.ndarray, tol: float) -> np.ndarray:
    """Factor L (N, r) with L L^H ~ a, stopping once the largest pivot is <= tol.

    ``a`` is Hermitian PSD up to roundoff; the columns kept all have squared
    norm > tol.
    """
    a = hermitian_part(np.asarray(a, dtype=complex)).copy()
    n = a.shape[0]
    cols = []
    diag = a.diagonal().real.copy()
    for _ in range(n):
        p = int(np.argmax(diag))
        if diag[p] <= tol:
            break
        col = a[:, p] - sum(c * c[p].conj() for c in cols) if cols else a[:, p].copy()
        col = col / np.sqrt(diag[p])
        cols.append(col)
        diag = diag - np.abs(col) ** 2
        diag[p] = 0.0
    if not cols:
        return np.zeros((n, 0), dtype=complex)
    return np.stack(cols, axis=1)


def extract_rank_one(c: CovarianceSet, users: UserSet, total_power: float | None = None) -> ExtractionReport:
    """Rank-one communication beams plus pivoted-Cholesky radar beams.

    ``total_power`` sets the thresholds (defaults to the trace of the solution).
    SINR deltas compare the vectors against the covariance solution; ``mi_delta``
    is left at 0 here and filled by :func:`verify_preservation`, which knows
    the targets.
    """
    p_t = float(np.trace(c.total()).real) if total_power is None else float(total_power)
    delta_pos = 1e-10 * p_t
    h = users.channels
    n_users = h.shape[0]
    if c.n_blocks < n_users:
        raise ValueError(f"{c.n_blocks} blocks cannot serve {n_users} users")

    comm = np.zeros((n_users, c.n_tx), dtype=complex)
    for i in range(n_users):
        rh = c.blocks[i] @ h[i]
        gain = float(np.vdot(h[i], rh).real)
        if gain <= delta_pos:
            raise ExtractionError(i, f"user {i} receives no useful power (h^H R h = {gain:.3e})")
        comm[i] = rh / np.sqrt(gain)

    total = c.total()
    residual = hermitian_part(total - comm.T @ comm.conj())
    min_eig = float(np.linalg.eigvalsh(residual)[0])
    if min_eig < -1e-6 * p_t:
        raise NumericError(f"residual covariance has eigenvalue {min_eig:.3e}; the SDR point is inaccurate")
    factor = pivoted_cholesky(residual, delta_pos)
    radar = factor.T.copy()  # one radar beam per kept column

    bf = BeamformerSet(comm, radar)
    cov_res = float(np.linalg.norm(metrics.tx_covariance(bf) - hermitian_part(total)))
    sinr_delta = metrics.comm_sinrs(bf, users) - metrics.comm_sinrs(c, users)
    return ExtractionReport(bf, sinr_delta, 0.0, cov_res, min_eig, configured_radar=c.n_blocks - n_users)


def verify_preservation(c: CovarianceSet, report: ExtractionReport, scn: Scenario) -> PreservationCheck:
    """Recompute everything from the vectors and compare with the solution."""
    p_t = scn.signal.total_power
    bf = report.beamformers
    args = (scn.targets, scn.signal, scn.geometry)
    failures = []

    cov_res = float(np.linalg.norm(metrics.tx_covariance(bf) - metrics.tx_covariance(c)))
    if not cov_res <= 1e-8 * p_t:
        failures.append(f"power/covariance residual {cov_res:.3e} > {1e-8 * p_t:.3e}")

    i_up = metrics.mi_upper_bound(c, *args)
    mi_delta = metrics.mi_upper_bound(bf, *args) - i_up
    exact_delta = metrics.exact_sensing_mi(bf, *args) - metrics.exact_sensing_mi(c, *args)
    report.mi_delta = float(mi_delta)
    if abs(mi_delta) > 1e-6 * max(1.0, i_up) or abs(exact_delta) > 1e-6 * max(1.0, i_up):
        failures.append(f"MI changed by {mi_delta:.3e} (bound) / {exact_delta:.3e} (exact)")

    ref = metrics.comm_sinrs(c, scn.users)
    delta = metrics.comm_sinrs(bf, scn.users) - ref
    report.sinr_delta = delta
    bad = np.abs(delta) > 1e-6 * np.maximum(1.0, ref)
    if np.any(bad):
        failures.append(f"SINR changed for users {np.flatnonzero(bad).tolist()}")

    if report.residual_min_eig < -1e-6 * p_t:
        failures.append(f"residual min eigenvalue {report.residual_min_eig:.3e}")
    return PreservationCheck(not failures, failures)
