"""Quantum-limited estimation of a two-port interferometric network.

A displaced two-mode squeezed probe passes through a lossless two-port
network carrying four phase-type parameters; both output quadratures are
read out by homodyne detection. This package provides:

- the exact Gaussian measurement model and its closed-form outcome
  statistics (:mod:`twoport.model`),
- exact and leading-order Fisher information matrices, Cramer-Rao bounds,
  and the classification of singular tuning choices (:mod:`twoport.fisher`),
- maximum-likelihood estimation on simulated homodyne records with Monte
  Carlo bound-saturation campaigns (:mod:`twoport.estimation`),
- reproducible experiment runners with CSV and SVG artifacts and a CLI
  (:mod:`twoport.experiments`, :mod:`twoport.cli`).
"""

from ._version import __version__
from .exceptions import (ArtifactError, ConfigError,
                         DegenerateCovarianceError,
                         IllConditionedFisherError, SingularCoefficientError,
                         TwoportError)
from .model import (PARAMETER_NAMES, VACUUM_VARIANCE, GaussianState,
                    HomodyneSettings, NetworkParams, OutputStatistics,
                    ProbeConfig, ResourceSplit, TuningConstants,
                    build_unitary, closed_form_stats, homodyne_stats,
                    log_density, measurement_matrix, minimum_variance_angles,
                    probe_state, propagate, symplectic_of, tuned_mixing,
                    tuned_network, tuned_settings)
from .fisher import (CoefficientMatrices, CrbReport, FisherSplit,
                     MuCoefficients, SigmaCoefficients, SingularityClass,
                     SingularityReport, StatsDerivatives, coefficient_matrix,
                     coefficient_mu, coefficient_sigma, coefficient_total,
                     crb, fisher_matrix, lambda_value, singularity_check,
                     stats_derivatives, trace_bound_vs_beta)
from .estimation import (EstimationResult, MonteCarloSummary,
                         ParameterSummary, SampleSet, align_to_reference,
                         log_likelihood, mle_fit, monte_carlo,
                         nearest_branch, sample_outcomes, score, trial_seed)
from .experiments import (EXPERIMENTS, ExperimentConfig, PlotSpec,
                          ResultTable, apply_overrides, emit_artifacts,
                          load_config, read_csv, run_experiment, run_fim_diag,
                          run_fim_scan, run_mle_vs_m, run_mle_vs_n,
                          run_singularity_scan)

__all__ = [
    "__version__",
    "TwoportError", "ConfigError", "DegenerateCovarianceError",
    "SingularCoefficientError", "IllConditionedFisherError", "ArtifactError",
    "PARAMETER_NAMES", "VACUUM_VARIANCE",
    "NetworkParams", "ProbeConfig", "ResourceSplit", "HomodyneSettings",
    "TuningConstants", "GaussianState", "OutputStatistics",
    "build_unitary", "symplectic_of", "probe_state", "propagate",
    "measurement_matrix", "homodyne_stats", "closed_form_stats",
    "minimum_variance_angles", "tuned_settings", "tuned_mixing",
    "tuned_network", "log_density",
    "StatsDerivatives", "stats_derivatives", "FisherSplit", "fisher_matrix",
    "lambda_value", "SigmaCoefficients", "coefficient_sigma",
    "MuCoefficients", "coefficient_mu", "SingularityClass",
    "SingularityReport", "singularity_check", "CoefficientMatrices",
    "coefficient_total", "coefficient_matrix", "CrbReport", "crb",
    "trace_bound_vs_beta",
    "SampleSet", "sample_outcomes", "log_likelihood", "score", "mle_fit",
    "EstimationResult", "nearest_branch", "align_to_reference", "trial_seed",
    "ParameterSummary", "MonteCarloSummary", "monte_carlo",
    "EXPERIMENTS", "ExperimentConfig", "PlotSpec", "ResultTable",
    "load_config", "apply_overrides", "run_experiment", "run_fim_scan",
    "run_fim_diag", "run_mle_vs_m", "run_mle_vs_n", "run_singularity_scan",
    "emit_artifacts", "read_csv",
]
