"""Bayesian mixture predictors, prediction-quality metrics and greedy covers
for stochastic processes over a finite alphabet."""

from predclass.cover import (
    CoverResult,
    GammaPrime,
    NuPredictor,
    TSet,
    build_gamma_prime,
    build_nu,
    build_t_set,
    greedy_cover,
)
from predclass.divergence import (
    KlEstimate,
    TvEstimate,
    jensen_gap_check,
    kl_exact,
    kl_identity,
    kl_monte_carlo,
    tv_horizon,
    tv_ladder,
)
from predclass.measures import (
    BINARY,
    Alphabet,
    BernoulliMeasure,
    History,
    MarkovMeasure,
    ProcessMeasure,
    UniformMeasure,
    bernoulli_grid,
    log_marginal,
    next_log_probs,
    point_mass,
    random_markov,
    sample,
)
from predclass.predictors import (
    LaplacePredictor,
    MarkovLaplacePredictor,
    MixturePredictor,
    RhoR,
    WeightScheme,
    build_rho_r,
    laplace_conditional,
    mixture_log_marginal,
    posterior_weights,
)

__version__ = "0.1.0"
