"""mimodet: massive-MIMO symbol detection via annealed Langevin dynamics,
with classical baselines and a reproducible Monte-Carlo SER harness."""

from .baselines import (
    DetectorKind,
    ML_ENUMERATION_CAP,
    ml_exhaustive,
    mmse_detect,
    zf_detect,
)
from .channel import (
    RealSystem,
    build_real_system,
    exp_correlation,
    kronecker_channel,
    load_channel_csv,
    load_observation,
    matrix_sqrt_psd,
    rayleigh_channel,
    real_embedding,
    save_channel_csv,
    save_observation,
    sigma0_from_snr,
    simulate_transmission,
    transmit,
)
from .constellation import (
    Constellation,
    ErrorCount,
    ModulationPlan,
    SymbolVector,
    conditional_mean,
    embed_complex,
    make_qam,
    nearest_points,
    prior_score,
    project,
    sample_symbols,
    symbol_error_rate,
    unembed_real,
)
from .errors import ConfigurationError, DetectorError, TrajectoryDivergenceError
from .harness import (
    ExperimentConfig,
    Row,
    SweepResult,
    load_config,
    run_ablation,
    run_sweep,
    write_csv,
)
from .langevin import (
    DetectionResult,
    LangevinConfig,
    NoiseSchedule,
    detect,
    detect_system,
    geometric_schedule,
    langevin_step,
    likelihood_score,
    linear_schedule,
    make_schedule,
    posterior_score,
    run_trajectory,
    step_matrix,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "Constellation",
    "DetectionResult",
    "DetectorError",
    "DetectorKind",
    "ErrorCount",
    "ExperimentConfig",
    "LangevinConfig",
    "ML_ENUMERATION_CAP",
    "ModulationPlan",
    "NoiseSchedule",
    "RealSystem",
    "Row",
    "SweepResult",
    "SymbolVector",
    "TrajectoryDivergenceError",
    "build_real_system",
    "conditional_mean",
    "detect",
    "detect_system",
    "embed_complex",
    "exp_correlation",
    "geometric_schedule",
    "kronecker_channel",
    "langevin_step",
    "likelihood_score",
    "linear_schedule",
    "load_channel_csv",
    "load_config",
    "load_observation",
    "make_qam",
    "make_schedule",
    "matrix_sqrt_psd",
    "ml_exhaustive",
    "mmse_detect",
    "nearest_points",
    "posterior_score",
    "prior_score",
    "project",
    "rayleigh_channel",
    "real_embedding",
    "run_ablation",
    "run_sweep",
    "run_trajectory",
    "sample_symbols",
    "save_channel_csv",
    "save_observation",
    "sigma0_from_snr",
    "simulate_transmission",
    "step_matrix",
    "symbol_error_rate",
    "transmit",
    "unembed_real",
    "write_csv",
    "zf_detect",
]
