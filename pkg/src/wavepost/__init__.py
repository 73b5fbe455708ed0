"""Bayesian wavelet shrinkage under spike-and-slab and sieve priors, with a
Monte Carlo lab for posterior contraction rates."""

from .besov import BesovIndex, TruthSpec, besov_norm, in_ball, make_truth
from .lab import ExperimentConfig, run_contraction_experiment, theoretical_rate
from .posterior import (
    CoefficientPosterior,
    coefficient_posterior,
    posterior_mean,
    posterior_median,
    posterior_tree,
    sieve_posterior,
)
from .priors import SievePrior, SpikeSlabPrior, choose_alpha
from .sequence_model import CoefficientTree, SequenceObservation, simulate_observation
from .wavelets import forward_dwt, inverse_dwt

__version__ = "0.1.0"

__all__ = [
    "BesovIndex",
    "CoefficientPosterior",
    "CoefficientTree",
    "ExperimentConfig",
    "SequenceObservation",
    "SievePrior",
    "SpikeSlabPrior",
    "TruthSpec",
    "besov_norm",
    "choose_alpha",
    "coefficient_posterior",
    "forward_dwt",
    "in_ball",
    "inverse_dwt",
    "make_truth",
    "posterior_mean",
    "posterior_median",
    "posterior_tree",
    "run_contraction_experiment",
    "sieve_posterior",
    "simulate_observation",
    "theoretical_rate",
]
