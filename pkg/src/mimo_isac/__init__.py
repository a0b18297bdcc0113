"""Multi-objective transmit beamforming for MIMO integrated sensing and communication."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    DomainError,
    ExtractionError,
    IsacError,
    NumericError,
    SizeError,
    SolverStalledError,
    ThresholdsInfeasibleError,
)
from .metrics import BeamformerSet, CovarianceSet  # noqa: E402
from .pareto import SchemeMode, Thresholds, Weights, bisection_solve, pareto_sweep  # noqa: E402
from .rankone import extract_rank_one, verify_preservation  # noqa: E402
from .scenario import (  # noqa: E402
    ArrayGeometry,
    RicianParams,
    Scenario,
    SignalConfig,
    TargetSet,
    UserSet,
    sample_rician_channels,
)
from .sensing import capon_spectrum, estimate_angles, rmse_mc  # noqa: E402
