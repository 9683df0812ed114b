"""Gaussian mixture fitting by Riemannian optimization over SPD matrices."""

__version__ = "0.1.0"

from .data import Dataset, kmeanspp_init, load_csv, sample_gmm
from .em import em_fit, em_objective
from .fitting import fit_gmm, make_gmm_problem
from .objective import (
    MixtureEstimate,
    PenaltyConfig,
    augment,
    build_psi_matrix,
    default_penalty_config,
    embed_mixture,
    penalized_objective,
    recover_mixture,
    reformulated_loglik,
    zero_penalty,
)
from .optim import BatchOptions, SgdOptions, SgdSchedule, cg, lbfgs, sgd
from .product import GmmParams, GmmTangent, make_params

__all__ = [
    "Dataset", "kmeanspp_init", "load_csv", "sample_gmm",
    "em_fit", "em_objective",
    "fit_gmm", "make_gmm_problem",
    "MixtureEstimate", "PenaltyConfig", "augment", "build_psi_matrix",
    "default_penalty_config", "embed_mixture", "penalized_objective",
    "recover_mixture", "reformulated_loglik", "zero_penalty",
    "BatchOptions", "SgdOptions", "SgdSchedule", "cg", "lbfgs", "sgd",
    "GmmParams", "GmmTangent", "make_params",
]
