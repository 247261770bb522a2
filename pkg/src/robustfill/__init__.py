"""Space-filling and model-based designs for computer experiments with noise factors."""

__version__ = "0.1.0"

from .stats_dist import BetaWarp, DomainError, MatrixError, NoiseModel, double_transform, inverse_transform
from .gp_core import ConditioningError, CorrelationParams, Design, KrigingModel, fit_kriging, predict_mse
from .criteria import (
    CriterionConfig,
    InternalNoiseSpec,
    QuadratureSpec,
    efficiency_table,
    imse,
    imse_internal,
    irmse,
    irmse_k,
    min_efficiency,
    wrmse,
)
from .generators import (
    cross_array,
    double_transformed_noise,
    fill_distance,
    hybrid_noise_design,
    jittered_cross_array,
    maximin_lhd,
    maxpro_lhd,
    optimal_internal_design,
    optimize_irmse_1d,
    robust_1d_noise_design,
    transformed_noise,
)
from .io import DesignParseError, read_design, write_design
from .harness import StudyConfig, StudyReport, emit_profile, robust_setting, run_simulated_example

__all__ = [
    "BetaWarp",
    "DomainError",
    "MatrixError",
    "NoiseModel",
    "double_transform",
    "inverse_transform",
    "ConditioningError",
    "CorrelationParams",
    "Design",
    "KrigingModel",
    "fit_kriging",
    "predict_mse",
    "CriterionConfig",
    "InternalNoiseSpec",
    "QuadratureSpec",
    "efficiency_table",
    "imse",
    "imse_internal",
    "irmse",
    "irmse_k",
    "min_efficiency",
    "wrmse",
    "cross_array",
    "double_transformed_noise",
    "fill_distance",
    "hybrid_noise_design",
    "jittered_cross_array",
    "maximin_lhd",
    "maxpro_lhd",
    "optimal_internal_design",
    "optimize_irmse_1d",
    "robust_1d_noise_design",
    "transformed_noise",
    "DesignParseError",
    "read_design",
    "write_design",
    "StudyConfig",
    "StudyReport",
    "emit_profile",
    "robust_setting",
    "run_simulated_example",
]
