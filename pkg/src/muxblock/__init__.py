"""Hierarchical clustering of multiplex networks by variational inference."""

from .engine import (AdamState, FitConfig, FitReport, VariationalState,
                     adam_step, elbo, fit)
from .errors import ParseError, ValidationError
from .gaussian import GaussExpectations, gauss_expectations
from .initialization import initialize_state
from .metrics import ClusteringResult, align_to_truth, extract_assignments, nmi
from .model import (CovariateMatrix, GroundTruth, Hyperparameters,
                    MultiplexNetwork, TruncationConfig, log_joint,
                    probit_stick_probs, sample_network, stick_breaking_weights)

__version__ = "0.1.0"

__all__ = [
    "AdamState", "ClusteringResult", "CovariateMatrix", "FitConfig",
    "FitReport", "GaussExpectations", "GroundTruth", "Hyperparameters",
    "MultiplexNetwork", "ParseError", "TruncationConfig", "ValidationError",
    "VariationalState", "adam_step", "align_to_truth", "elbo",
    "extract_assignments", "fit", "gauss_expectations", "initialize_state",
    "log_joint", "nmi", "probit_stick_probs", "sample_network",
    "stick_breaking_weights",
]
