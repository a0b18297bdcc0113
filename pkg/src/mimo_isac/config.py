"""Run configuration: JSON schema, dB conversions and scenario construction.

Quantities the figures quote in dB (P_T and noise in dBm, SINR floors and
SNR grids in dB) are accepted in dB here and converted exactly once, in
:func:`build_scenario` and friends.
"""

from __future__ import annotations

import copy
import json
import math
from pathlib import Path
from typing import Any, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .errors import ConfigError
from .pareto import SchemeMode, Thresholds, Weights
from .scenario import (
    ArrayGeometry,
    RicianParams,
    Scenario,
    SignalConfig,
    TargetSet,
    UserSet,
    db_to_linear,
    dbm_to_watts,
    sample_rician_channels,
)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GeometryCfg(_Strict):
    n_tx: int = 32
    n_rx: int = 32
    spacing_ratio: float = 0.5


class UsersCfg(_Strict):
    count: int = 2
    # "inf" gives pure line-of-sight channels
    rician_factor: float = 1.0
    los_angles_deg: Optional[list[float]] = None
    noise_dbm: Union[float, list[float]] = 0.0


class TargetsCfg(_Strict):
    angles_deg: list[float] = Field(default_factory=lambda: [20.0, 40.0])
    variance: Union[float, list[float]] = 1.0


class SignalCfg(_Strict):
    block_length: int = 1024
    total_power_dbm: float = 40.0
    # None means M = K
    n_radar_streams: Optional[int] = None
    radar_noise_dbm: float = 0.0


class WeightsCfg(_Strict):
    alpha: float = 0.5
    user_weights: Optional[list[float]] = None
    target_weights: Optional[list[float]] = None


class ThresholdsCfg(_Strict):
    mi_floor_bits: float = 10.0
    sinr_floor_db: Union[float, list[float]] = 5.0


class SolverCfg(_Strict):
    eps: float = 0.01
    tau_feas: Optional[float] = None
    kappa: Optional[float] = None
    max_iter: int = 20000
    warm_start: bool = True


class ExperimentCfg(_Strict):
    alpha_grid: list[float] = Field(default_factory=lambda: [round(0.1 * i, 1) for i in range(1, 10)])
    snr_grid_db: list[float] = Field(default_factory=lambda: [-10.0, 0.0, 10.0])
    schemes: list[SchemeMode] = Field(default_factory=lambda: [SchemeMode.GENERAL])
    radar_snr_db: float = 10.0
    trials: int = 100
    grid_step_deg: float = 0.1

    @field_validator("trials")
    @classmethod
    def _trials(cls, v):
        if v < 1:
            raise ValueError("trials must be >= 1")
        return v


class RunConfig(_Strict):
    geometry: GeometryCfg = Field(default_factory=GeometryCfg)
    users: UsersCfg = Field(default_factory=UsersCfg)
    targets: TargetsCfg = Field(default_factory=TargetsCfg)
    signal: SignalCfg = Field(default_factory=SignalCfg)
    weights: WeightsCfg = Field(default_factory=WeightsCfg)
    thresholds: ThresholdsCfg = Field(default_factory=ThresholdsCfg)
    mode: SchemeMode = SchemeMode.GENERAL
    solver: SolverCfg = Field(default_factory=SolverCfg)
    experiment: ExperimentCfg = Field(default_factory=ExperimentCfg)
    seed: int = Field(default=0, ge=0, lt=2**64)
    out: str = "results"
    figures: bool = False

    def echo(self) -> dict:
        """Full configuration including defaults, JSON-safe."""
        return json.loads(self.model_dump_json())


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        if text.lower() in ("inf", "+inf", "-inf", "nan"):
            return float(text)
        return text


def apply_override(raw: dict, assignment: str) -> dict:
    """Apply ``a.b.c=value`` to a nested dict; the value is parsed as JSON when possible."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form key=value")
    key, text = assignment.split("=", 1)
    parts = [p for p in key.strip().split(".") if p]
    if not parts:
        raise ConfigError(f"override {assignment!r} has an empty key")
    node = raw
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override {assignment!r} descends into a non-object")
    node[parts[-1]] = _parse_value(text.strip())
    return raw


def load_config(path: Optional[Union[str, Path]] = None, overrides: Optional[list[str]] = None) -> RunConfig:
    raw: dict = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a JSON object")
    raw = copy.deepcopy(raw)
    for item in overrides or []:
        apply_override(raw, item)
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def _per_item(value, count: int, name: str) -> list[float]:
    if isinstance(value, (int, float)):
        return [float(value)] * count
    if len(value) != count:
        raise ConfigError(f"{name} has {len(value)} entries, expected {count}")
    return [float(v) for v in value]


def build_scenario(cfg: RunConfig) -> Scenario:
    geom = ArrayGeometry(cfg.geometry.n_tx, cfg.geometry.n_rx, cfg.geometry.spacing_ratio)
    n_users = cfg.users.count
    noise = [float(dbm_to_watts(v)) for v in _per_item(cfg.users.noise_dbm, n_users, "users.noise_dbm")]
    channels = sample_rician_channels(
        geom, n_users, RicianParams(cfg.users.rician_factor, cfg.seed), cfg.users.los_angles_deg
    )
    k = len(cfg.targets.angles_deg)
    targets = TargetSet(cfg.targets.angles_deg, _per_item(cfg.targets.variance, k, "targets.variance"))
    m = k if cfg.signal.n_radar_streams is None else cfg.signal.n_radar_streams
    sig = SignalConfig(
        cfg.signal.block_length,
        float(dbm_to_watts(cfg.signal.total_power_dbm)),
        m,
        float(dbm_to_watts(cfg.signal.radar_noise_dbm)),
    )
    return Scenario(geom, UserSet(channels, noise), targets, sig, meta={"seed": cfg.seed})


def build_weights(cfg: RunConfig, n_users: int, n_targets: int, alpha: Optional[float] = None) -> Weights:
    a = cfg.weights.alpha if alpha is None else alpha
    uniform = Weights.uniform(a, n_users, n_targets)
    users = cfg.weights.user_weights if alpha is None and cfg.weights.user_weights else uniform.user_weights
    targets = cfg.weights.target_weights or uniform.target_weights
    return Weights(a, tuple(users), tuple(targets))


def build_thresholds(cfg: RunConfig, n_users: int) -> Thresholds:
    floors = _per_item(cfg.thresholds.sinr_floor_db, n_users, "thresholds.sinr_floor_db")
    lin = [float(db_to_linear(f)) if math.isfinite(f) else math.inf for f in floors]
    return Thresholds(cfg.thresholds.mi_floor_bits, tuple(lin))
