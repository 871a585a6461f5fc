"""Likelihood ratio tests for the shape of light-tailed families from the top-k order statistics."""
from .asymptotics import (
    centering_H,
    intermediate_quantile,
    laplace_tail,
    local_step,
    regularity_report,
    surrogate_quantile,
    von_mises_parts,
    weighted_tail_ratio,
)
from .errors import ConfigError, DegenerateStep, DomainError, NotFound, NumericalError, TailRatioError
from .estimator import TopKLikelihoodRatioTest
from .experiments import (
    ExperimentDesign,
    McSummary,
    run_experiment,
    run_lemma3,
    run_theorem1,
    run_theorem2,
    size_power_table,
)
from .families import FAMILY_NAMES, TailFamily, builtin_family
from .likelihood import LrReport, TopKSample, decompose_A123, log_lr, test_decision, topk_loglik
from .sampling import SeededStream, inverse_cdf, sample_exceedances, sample_topk

__version__ = "0.1.0"
