"""Detectors for weak targets of known signature and unknown strength.

Clairvoyant, LMP, GLRT, penalized-likelihood and Bayesian detectors over a
known Gaussian background, the mixed LMP/Bayes limit detector, prior
sculpting, and a seeded evaluation harness.
"""

__version__ = "0.1.0"

from .errors import ConfigError, ContractError, DomainError, NumericError, WeakDetectError
from .models import (
    ADDITIVE,
    BEERS_LAW,
    REPLACEMENT,
    GaussianBackground,
    TargetInteractionModel,
    embed,
    inverse_embed,
    lmp_statistic,
    log_bkg_density,
    log_likelihood,
    second_derivative_ratio,
)
from .priors import (
    MixedPriorSchedule,
    Prior,
    exponential_moment,
    mass_at,
    mixed_prior,
    prior_density,
    truncated_exponential_moment,
)
from .detectors import (
    DetectionProblem,
    DetectorSpec,
    alpha_from_beta,
    batch_scores,
    bayes,
    beta_from_alpha,
    clairvoyant,
    finite_eps_mixed,
    glrt,
    lmp,
    matched_filter,
    mixed_star,
    penalized_glrt,
    sculpted,
)
from .evaluation import (
    convergence_study,
    dominance_check,
    empirical_roc,
    power_at_far,
    power_curve,
    sculpt_optimize,
)
