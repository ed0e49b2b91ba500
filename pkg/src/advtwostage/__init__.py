"""Two-stage adversarial training for high-dimensional linear regression.

Clean ridge fit, analytic robust second stage, asymptotic risk limits,
shortcut leave-one-out CV and a Monte Carlo harness.
"""

from .advrisk import (
    C0,
    FixedPointResult,
    RiskBreakdown,
    adv_loss_pointwise,
    adv_risk,
    best_robust_model,
    best_robust_risk,
    excess_adv_risk,
    mc_adv_risk,
    population_adv_risk,
    solve_alpha,
    two_stage_map,
)
from .asymptotics import (
    AspectRatio,
    CleanLimits,
    TwoStageLimits,
    stieltjes_m,
    stieltjes_m_prime,
    theory_clean_excess_risk,
    theory_clean_limits,
    theory_two_stage_limits,
)
from .errors import (
    AdvTwoStageError,
    ArgumentError,
    ConfigError,
    DegenerateContextError,
    DegenerateLeverageError,
    NumericError,
    PoleError,
    SelectionError,
    SingularSystemError,
)
from .linmodel import (
    Dataset,
    GroundTruth,
    RidgeFit,
    gen_gaussian_dataset,
    loo_delta,
    loo_deltas,
    ridge_fit,
    ridge_path,
    sample_theta0,
)
from .loocv import (
    CvReport,
    ShortcutContext,
    alpha_loo,
    classical_ridge_loo,
    exact_cv,
    select_lambda,
    shortcut_coeffs,
    shortcut_cv,
    shortcut_loo_estimate,
)
from .simlab import (
    AggregateCurve,
    ExperimentConfig,
    default_config,
    run_cv_table,
    run_excess_risk_sweep,
    run_lambda_sweep,
    run_ridge_vs_ridgeless,
    run_theory_curves,
)
from .vanilla import AdvFitOptions, adv_objective, vanilla_adv_fit, vanilla_adv_solve

__version__ = "0.1.0"

__all__ = [
    "C0",
    "FixedPointResult",
    "RiskBreakdown",
    "adv_loss_pointwise",
    "adv_risk",
    "best_robust_model",
    "best_robust_risk",
    "excess_adv_risk",
    "mc_adv_risk",
    "population_adv_risk",
    "solve_alpha",
    "two_stage_map",
    "AspectRatio",
    "CleanLimits",
    "TwoStageLimits",
    "stieltjes_m",
    "stieltjes_m_prime",
    "theory_clean_excess_risk",
    "theory_clean_limits",
    "theory_two_stage_limits",
    "AdvTwoStageError",
    "ArgumentError",
    "ConfigError",
    "DegenerateContextError",
    "DegenerateLeverageError",
    "NumericError",
    "PoleError",
    "SelectionError",
    "SingularSystemError",
    "Dataset",
    "GroundTruth",
    "RidgeFit",
    "gen_gaussian_dataset",
    "loo_delta",
    "loo_deltas",
    "ridge_fit",
    "ridge_path",
    "sample_theta0",
    "CvReport",
    "ShortcutContext",
    "alpha_loo",
    "classical_ridge_loo",
    "exact_cv",
    "select_lambda",
    "shortcut_coeffs",
    "shortcut_cv",
    "shortcut_loo_estimate",
    "AggregateCurve",
    "ExperimentConfig",
    "default_config",
    "run_cv_table",
    "run_excess_risk_sweep",
    "run_lambda_sweep",
    "run_ridge_vs_ridgeless",
    "run_theory_curves",
    "AdvFitOptions",
    "adv_objective",
    "vanilla_adv_fit",
    "vanilla_adv_solve",
]
