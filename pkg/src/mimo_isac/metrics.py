"""Closed-form performance quantities of a transmit strategy.

Everything here is a pure function of a covariance set (or beamformer set)
and the scenario pieces it needs.  Information quantities are in bits.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import DomainError, SizeError
from .scenario import ArrayGeometry, Scenario, SignalConfig, TargetSet, UserSet, rx_steering, tx_steering


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.swapaxes(a, -1, -2).conj())


class CovarianceSet:
    """Per-stream transmit covariances R_1..R_{C+M}, stacked as (B, N_t, N_t).

    The first C blocks belong to the communication streams, the rest to the
    radar probing streams.
    """

    def __init__(self, blocks):
        b = np.asarray(blocks, dtype=complex)
        if b.ndim == 2:
            b = b[None]
        if b.ndim != 3 or b.shape[1] != b.shape[2]:
            raise ValueError(f"covariance blocks must have shape (B, N, N), got {b.shape}")
        self.blocks = hermitian_part(b)
        self.blocks.setflags(write=False)

    @classmethod
    def isotropic(cls, n_blocks: int, n_tx: int, total_power: float) -> "CovarianceSet":
        scale = total_power / (n_tx * n_blocks)
        return cls(np.broadcast_to(scale * np.eye(n_tx), (n_blocks, n_tx, n_tx)))

    @classmethod
    def from_beamformers(cls, bf: "BeamformerSet") -> "CovarianceSet":
        w = bf.all_vectors
        return cls(np.einsum("bi,bj->bij", w, w.conj()))

    @property
    def n_blocks(self) -> int:
        return self.blocks.shape[0]

    @property
    def n_tx(self) -> int:
        return self.blocks.shape[1]

    def total(self) -> np.ndarray:
        return self.blocks.sum(axis=0)

    def scaled(self, t: float) -> "CovarianceSet":
        return CovarianceSet(t * self.blocks)

    def min_eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.blocks)[:, 0]

    def __len__(self):
        return self.n_blocks

    def __repr__(self):
        return f"CovarianceSet(n_blocks={self.n_blocks}, n_tx={self.n_tx})"


@dataclass(frozen=True, eq=False)
class BeamformerSet:
    """Beamformers as rows: ``comm`` is (C, N_t), ``radar`` is (M', N_t)."""

    comm: np.ndarray
    radar: np.ndarray

    def __post_init__(self):
        comm = np.atleast_2d(np.asarray(self.comm, dtype=complex))
        radar = np.asarray(self.radar, dtype=complex)
        if radar.size == 0:
            radar = np.zeros((0, comm.shape[1]), dtype=complex)
        radar = np.atleast_2d(radar)
        if radar.shape[1] != comm.shape[1]:
            raise ValueError("communication and radar beamformers differ in length")
        object.__setattr__(self, "comm", comm)
        object.__setattr__(self, "radar", radar)

    @property
    def all_vectors(self) -> np.ndarray:
        return np.vstack([self.comm, self.radar])

    @property
    def total_power(self) -> float:
        return float(np.sum(np.abs(self.all_vectors) ** 2))

    def within_power(self, total_power: float) -> bool:
        return self.total_power <= total_power + 1e-9 * max(1.0, total_power)

    def without_radar(self) -> "BeamformerSet":
        return BeamformerSet(self.comm, np.zeros((0, self.comm.shape[1]), dtype=complex))


@dataclass(frozen=True, eq=False)
class CrossCorrPattern:
    phi: np.ndarray
    lambda_diag: np.ndarray


CovLike = Union[CovarianceSet, BeamformerSet, np.ndarray]


def tx_covariance(x: CovLike) -> np.ndarray:
    """Transmit covariance R_X = sum_n w_n w_n^H (or sum_n R_n)."""
    if isinstance(x, BeamformerSet):
        w = x.all_vectors
        return hermitian_part(w.T @ w.conj())
    if isinstance(x, CovarianceSet):
        return hermitian_part(x.total())
    r = np.asarray(x, dtype=complex)
    if r.ndim == 3:
        r = r.sum(axis=0)
    return hermitian_part(r)


def comm_sinrs(c: Union[CovarianceSet, BeamformerSet], users: UserSet) -> np.ndarray:
    """Per-user SINR with all other streams (users and radar) as interference."""
    if isinstance(c, BeamformerSet):
        c = CovarianceSet.from_beamformers(c)
    h = users.channels
    n_users = h.shape[0]
    if c.n_blocks < n_users:
        raise ValueError(f"{c.n_blocks} blocks cannot serve {n_users} users")
    # gains[i, n] = h_i^H R_n h_i
    gains = np.einsum("ia,nab,ib->in", h.conj(), c.blocks, h).real
    gains = np.maximum(gains, 0.0)
    useful = gains[np.arange(n_users), np.arange(n_users)]
    interference = gains.sum(axis=1) - useful
    return useful / (interference + users.noise_powers)


def avg_rate(sinrs) -> float:
    """Average rate (1/C) sum_i log2(1 + gamma_i) in bits per channel use."""
    g = np.asarray(sinrs, dtype=float)
    if np.any(g < 0):
        raise DomainError("SINRs must be non-negative")
    return float(np.mean(np.log2(1.0 + g)))


def _directional(r_x: np.ndarray, targets: TargetSet, geom: ArrayGeometry) -> np.ndarray:
    a = tx_steering(geom, list(targets.angles))  # (N_t, K)
    return a.conj().T @ r_x @ a  # [i, j] = a_i^H R_X a_j


def cross_corr_pattern(c: CovLike, targets: TargetSet, sig: SignalConfig, geom: ArrayGeometry) -> CrossCorrPattern:
    r_x = tx_covariance(c)
    b = rx_steering(geom, list(targets.angles))
    alpha = b.conj().T @ b
    phi = alpha * _directional(r_x, targets, geom) * (sig.block_length / sig.radar_noise)
    phi = hermitian_part(phi)
    return CrossCorrPattern(phi=phi, lambda_diag=1.0 / np.asarray(targets.variances))


def exact_sensing_mi(c: CovLike, targets: TargetSet, sig: SignalConfig, geom: ArrayGeometry) -> float:
    """log2[det(Phi + Lambda) prod sigma_k^2], via Cholesky of I + D Phi D.

    With D = diag(sigma_k), det(Phi + Lambda) prod sigma_k^2 = det(I + D Phi D);
    the latter is Hermitian positive definite whenever Phi is PSD.
    """
    pat = cross_corr_pattern(c, targets, sig, geom)
    d = np.sqrt(np.asarray(targets.variances))
    m = np.eye(len(d)) + d[:, None] * pat.phi * d[None, :]
    chol = np.linalg.cholesky(hermitian_part(m))
    return float(max(0.0, 2.0 * np.sum(np.log2(np.abs(np.diag(chol))))))


def sensing_mi_oracle(x: np.ndarray, targets: TargetSet, sig: SignalConfig, geom: ArrayGeometry) -> float:
    """Brute-force sensing MI log2 det(I + R_G X~^H X~ / sigma_r^2).

    X~ = X^T kron I_{N_r} and R_G = sum_k sigma_k^2 v_k v_k^H with
    v_k = conj(a(theta_k)) kron b(theta_k).  Test-scale only.
    """
    n_tx, n_rx = geom.n_tx, geom.n_rx
    if n_tx * n_rx > 64:
        raise SizeError(f"oracle limited to N_t*N_r <= 64, got {n_tx * n_rx}")
    x = np.asarray(x, dtype=complex)
    if x.shape[0] != n_tx:
        raise ValueError(f"transmit matrix must have {n_tx} rows, got {x.shape}")
    r_g = np.zeros((n_tx * n_rx, n_tx * n_rx), dtype=complex)
    for theta, var in zip(targets.angles, targets.variances):
        v = np.kron(tx_steering(geom, theta).conj(), rx_steering(geom, theta))
        r_g += var * np.outer(v, v.conj())
    x_tilde = np.kron(x.T, np.eye(n_rx))
    m = np.eye(n_tx * n_rx) + r_g @ (x_tilde.conj().T @ x_tilde) / sig.radar_noise
    sign, logdet = np.linalg.slogdet(m)
    return float(logdet.real / np.log(2.0))


def target_sinrs(c: CovLike, targets: TargetSet, sig: SignalConfig, geom: ArrayGeometry) -> np.ndarray:
    """Echo SINR of every target, N_r sigma_k^2 L / sigma_r^2 * a^H R_X a."""
    r_x = tx_covariance(c)
    a = tx_steering(geom, list(targets.angles))
    power = np.maximum(np.einsum("ak,ab,bk->k", a.conj(), r_x, a).real, 0.0)
    scale = geom.n_rx * np.asarray(targets.variances) * sig.block_length / sig.radar_noise
    return scale * power


def per_target_sinr(c: CovLike, k: int, targets: TargetSet, sig: SignalConfig, geom: ArrayGeometry) -> float:
    """SINR of target ``k``, counted from 1 as in the target list k = 1..K."""
    if not 1 <= k <= len(targets):
        raise IndexError(f"target index {k} out of range 1..{len(targets)}")
    return float(target_sinrs(c, targets, sig, geom)[k - 1])


def mi_upper_bound(c: CovLike, targets: TargetSet, sig: SignalConfig, geom: ArrayGeometry) -> float:
    """Hadamard bound: sum_k log2(1 + SINR_k)."""
    return float(np.sum(np.log2(1.0 + target_sinrs(c, targets, sig, geom))))


def beampattern(r_x: np.ndarray, grid: Sequence[float], geom: ArrayGeometry) -> np.ndarray:
    """Transmit beampattern a(theta)^H R_X a(theta) on an angle grid (degrees)."""
    a = tx_steering(geom, np.asarray(grid, dtype=float))
    r_x = tx_covariance(r_x)
    return np.maximum(np.einsum("ag,ab,bg->g", a.conj(), r_x, a).real, 0.0)


def evaluate(c: Union[CovarianceSet, BeamformerSet], scn: Scenario) -> dict:
    """All headline metrics of a strategy on a scenario."""
    args = (scn.targets, scn.signal, scn.geometry)
    sinrs = comm_sinrs(c, scn.users)
    return {
        "i_up_bits": mi_upper_bound(c, *args),
        "exact_mi_bits": exact_sensing_mi(c, *args),
        "sinrs": sinrs,
        "avg_rate": avg_rate(sinrs),
        "target_sinrs": target_sinrs(c, *args),
        "power": float(np.trace(tx_covariance(c)).real),
    }
