"""Variance-based global sensitivity analysis with Shapley effects.

Estimates all d Shapley effects of a model simultaneously from a single
Monte Carlo pass of (d+1)N evaluations, with unbiased variance estimates and
confidence intervals, alongside classic pick-freeze main/total effect
estimators, closed-form references for the analytic benchmarks, a brute-force
ANOVA oracle, and convergence-study tooling.
"""

__version__ = "0.1.0"

from .analysis import (ConvergenceStudy, convergence_csv_lines,
                       convergence_study, sse_exact, sse_samplemean,
                       trial_seed)
from .errors import (CapacityError, ConfigError, EvaluationError,
                     ParameterError, SensitivityError)
from .estimators import (EffectReport, EstimatorConfig, ShapleyReport,
                         estimate_main_effects, estimate_shapley_all,
                         estimate_shapley_winding, estimate_total_effects,
                         pickfreeze_increment)
from .inputs import (InputSpace, LogNormal, Normal, RngStream, Uniform,
                     inverse_cdf, random_permutation, sample_matrix)
from .models import (ExternalModel, ModelFunction, constant_model,
                     external_model, ishigami, ishigami_space, plate_buckling,
                     plate_buckling_space, sobol_g, sobol_g_space)
from .reference import (AnovaDecomposition, OrthogonalityReport,
                        SensitivityIndices, anova_oracle, indices_from_anova,
                        ishigami_anova, ishigami_exact, main_total_from_anova,
                        orthogonality_check, shapley_from_anova, sobol_g_anova,
                        sobol_g_exact)

__all__ = [
    "__version__",
    "AnovaDecomposition",
    "CapacityError",
    "ConfigError",
    "ConvergenceStudy",
    "EffectReport",
    "EstimatorConfig",
    "EvaluationError",
    "ExternalModel",
    "InputSpace",
    "LogNormal",
    "ModelFunction",
    "Normal",
    "OrthogonalityReport",
    "ParameterError",
    "RngStream",
    "SensitivityError",
    "SensitivityIndices",
    "ShapleyReport",
    "Uniform",
    "anova_oracle",
    "constant_model",
    "convergence_csv_lines",
    "convergence_study",
    "estimate_main_effects",
    "estimate_shapley_all",
    "estimate_shapley_winding",
    "estimate_total_effects",
    "external_model",
    "indices_from_anova",
    "inverse_cdf",
    "ishigami",
    "ishigami_anova",
    "ishigami_exact",
    "ishigami_space",
    "main_total_from_anova",
    "orthogonality_check",
    "pickfreeze_increment",
    "plate_buckling",
    "plate_buckling_space",
    "random_permutation",
    "sample_matrix",
    "shapley_from_anova",
    "sobol_g",
    "sobol_g_anova",
    "sobol_g_exact",
    "sobol_g_space",
    "sse_exact",
    "sse_samplemean",
    "trial_seed",
]
