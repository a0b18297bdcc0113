"""Physical inputs: ULA geometry, steering vectors, Rician user channels,
target sets and the power/noise configuration of one ISAC snapshot.

Angles cross the API in degrees and are converted to radians once, inside
:func:`steering`.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, DomainError

# Sub-stream identifiers for the splittable generator (see `substream`).
STREAM_CHANNELS = 1
STREAM_LOS_ANGLES = 2
STREAM_SYMBOLS = 3
STREAM_ECHO = 4


def substream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for ``(seed, *keys)``.

    Every consumer derives its own stream from the scenario seed plus a fixed
    counter, so no two modules ever share generator state.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(watts):
    return 10.0 * np.log10(np.asarray(watts, dtype=float)) + 30.0


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(lin):
    return 10.0 * np.log10(np.asarray(lin, dtype=float))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ArrayGeometry:
    n_tx: int
    n_rx: int
    spacing_ratio: float = 0.5

    def __post_init__(self):
        if int(self.n_tx) < 1 or int(self.n_rx) < 1:
            raise ConfigError(f"array sizes must be >= 1, got n_tx={self.n_tx}, n_rx={self.n_rx}")
        if not self.spacing_ratio > 0:
            raise ConfigError(f"spacing_ratio must be positive, got {self.spacing_ratio}")


@dataclass(frozen=True)
class TargetSet:
    angles: tuple[float, ...]
    variances: tuple[float, ...]

    def __post_init__(self):
        angles = tuple(float(a) for a in self.angles)
        variances = tuple(float(v) for v in self.variances)
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "variances", variances)
        if len(angles) < 1:
            raise ConfigError("at least one target is required")
        if len(angles) != len(variances):
            raise ConfigError("target angles and variances differ in length")
        if any(not abs(a) < 90.0 for a in angles):
            raise DomainError(f"target angles must lie in (-90, 90) degrees: {angles}")
        if len(set(angles)) != len(angles):
            raise ConfigError(f"target angles must be pairwise distinct: {angles}")
        if any(not v > 0 for v in variances):
            raise ConfigError("target variances must be positive")

    def __len__(self):
        return len(self.angles)


@dataclass(frozen=True, eq=False)
class UserSet:
    """Downlink users: ``channels`` has shape (C, N_t), one row per user."""

    channels: np.ndarray
    noise_powers: np.ndarray

    def __post_init__(self):
        h = np.atleast_2d(np.asarray(self.channels, dtype=complex))
        s = np.atleast_1d(np.asarray(self.noise_powers, dtype=float))
        if h.shape[0] < 1:
            raise ConfigError("at least one user is required")
        if h.shape[0] != s.shape[0]:
            raise ConfigError("user channels and noise powers differ in length")
        if np.any(np.linalg.norm(h, axis=1) == 0):
            raise ConfigError("user channels must be nonzero")
        if np.any(~(s > 0)):
            raise ConfigError("user noise powers must be positive")
        object.__setattr__(self, "channels", _frozen(h))
        object.__setattr__(self, "noise_powers", _frozen(s))

    def __len__(self):
        return self.channels.shape[0]


@dataclass(frozen=True)
class SignalConfig:
    block_length: int
    total_power: float
    n_radar_streams: int
    radar_noise: float

    def __post_init__(self):
        if int(self.block_length) < 1:
            raise ConfigError("block_length must be positive")
        if not self.total_power > 0:
            raise ConfigError("total_power must be positive")
        if int(self.n_radar_streams) < 0:
            raise ConfigError("n_radar_streams must be non-negative")
        if not self.radar_noise > 0:
            raise ConfigError("radar_noise must be positive")


@dataclass(frozen=True)
class RicianParams:
    rician_factor: float
    seed: int = 0

    def __post_init__(self):
        if not self.rician_factor >= 0:
            raise ConfigError("rician_factor must be non-negative")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True, eq=False)
class Scenario:
    geometry: ArrayGeometry
    users: UserSet
    targets: TargetSet
    signal: SignalConfig
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        h = self.users.channels
        if h.shape[1] != self.geometry.n_tx:
            raise ConfigError(f"channels have length {h.shape[1]}, array has {self.geometry.n_tx} elements")
        if self.n_users + self.signal.n_radar_streams > self.geometry.n_tx:
            raise ConfigError(
                f"C + M = {self.n_users + self.signal.n_radar_streams} exceeds N_t = {self.geometry.n_tx}"
            )

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_targets(self) -> int:
        return len(self.targets)

    @property
    def n_blocks(self) -> int:
        return self.n_users + self.signal.n_radar_streams

    def replace(self, **changes) -> "Scenario":
        """Copy with top-level fields or signal fields replaced.

        Signal fields (``n_radar_streams``, ``radar_noise`` ...) may be given
        directly; they are routed into a new :class:`SignalConfig`.
        """
        sig_fields = {f.name for f in dataclasses.fields(SignalConfig)}
        sig = {k: changes.pop(k) for k in list(changes) if k in sig_fields}
        if "noise_powers" in changes:
            changes["users"] = UserSet(self.users.channels, changes.pop("noise_powers"))
        if sig:
            changes["signal"] = dataclasses.replace(self.signal, **sig)
        return dataclasses.replace(self, **changes)


def steering(n: int, theta_deg, spacing_ratio: float = 0.5) -> np.ndarray:
    """ULA response ``exp(j 2 pi d/lambda n sin(theta))``, n = 0..N-1.

    A scalar angle gives a length-N vector; a sequence of G angles gives the
    (N, G) manifold matrix with one column per angle.
    """
    theta = np.asarray(theta_deg, dtype=float)
    if np.any(~(np.abs(theta) < 90.0)):
        raise DomainError(f"steering angle must satisfy |theta| < 90 degrees, got {theta_deg}")
    phase = 2.0 * np.pi * spacing_ratio * np.sin(np.deg2rad(theta))
    idx = np.arange(n)
    if theta.ndim == 0:
        return np.exp(1j * idx * phase)
    return np.exp(1j * np.outer(idx, phase))


def tx_steering(geom: ArrayGeometry, theta_deg) -> np.ndarray:
    return steering(geom.n_tx, theta_deg, geom.spacing_ratio)


def rx_steering(geom: ArrayGeometry, theta_deg) -> np.ndarray:
    return steering(geom.n_rx, theta_deg, geom.spacing_ratio)


def draw_los_angles(count: int, seed: int) -> np.ndarray:
    """Per-user line-of-sight angles, uniform on (-90, 90) degrees."""
    rng = substream(seed, STREAM_LOS_ANGLES)
    angles = rng.uniform(-90.0, 90.0, size=count)
    # uniform() is half-open on the left; keep strictly inside the domain
    return np.clip(angles, -89.999, 89.999)


def sample_rician_channels(
    geom: ArrayGeometry,
    count: int,
    params: RicianParams,
    los_angles: Sequence[float] | None = None,
) -> np.ndarray:
    """Rician channels ``sqrt(mu/(mu+1)) Delta + sqrt(1/(mu+1)) u``, shape (C, N_t).

    ``Delta`` is the transmit steering vector at a per-user angle (drawn from
    the seed unless ``los_angles`` is given) and ``u`` is CN(0, I).
    ``rician_factor = inf`` gives the pure line-of-sight channel.
    """
    if count < 1:
        raise ConfigError("at least one user is required")
    if los_angles is None:
        los_angles = draw_los_angles(count, params.seed)
    los_angles = np.asarray(los_angles, dtype=float)
    if los_angles.shape != (count,):
        raise ConfigError(f"expected {count} line-of-sight angles, got {los_angles.shape}")
    los = tx_steering(geom, los_angles).T
    mu = float(params.rician_factor)
    if math.isinf(mu):
        return los
    rng = substream(params.seed, STREAM_CHANNELS)
    scatter = (rng.standard_normal((count, geom.n_tx)) + 1j * rng.standard_normal((count, geom.n_tx))) / np.sqrt(2.0)
    return np.sqrt(mu / (mu + 1.0)) * los + np.sqrt(1.0 / (mu + 1.0)) * scatter
