"""Glue between objectives and solvers: problem assembly and fit drivers.

Solvers minimize; the GMM problems negate the (penalized) log-likelihood.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spd
from .data import Dataset, kmeanspp_init
from .em import EmOptions, em_fit
from .objective import (
    AugmentedData,
    augment,
    default_penalty_config,
    embed_mixture,
    penalized_objective,
    recover_mixture,
    riemannian_grad,
    zero_penalty,
)
from .optim import (
    BatchOptions,
    SgdOptions,
    SgdSchedule,
    SolverProblem,
    cg,
    lbfgs,
    sgd,
)
from .product import GmmParams, GmmTangent, product_metric, product_retract, \
    product_transport, t_scale

SOLVERS = ("lbfgs", "cg", "sgd", "em")


def make_gmm_problem(data, cfg, k):
    """Negated penalized reformulated objective over the product manifold."""
    aug = data if isinstance(data, AugmentedData) else augment(data)
    n = aug.n

    def value(params):
        return -penalized_objective(params, aug, cfg)

    def grad(params):
        return t_scale(riemannian_grad(params, aug, cfg, n), -1.0)

    def stochastic_grad(params, idx):
        idx = np.asarray(idx)
        batch = AugmentedData(rows=aug.rows[idx], d=aug.d)
        g = riemannian_grad(params, batch, cfg, n)
        return t_scale(g, -float(n) / idx.size)

    return SolverProblem(n=n, value=value, grad=grad,
                         stochastic_grad=stochastic_grad)


def make_plain_gaussian_problem(data):
    """Unreformulated single-Gaussian negative log-likelihood over
    R^d x P^d: the GmmParams container carries the covariance as its only
    SPD component and the mean in the Euclidean logit slot."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    n, d = data.shape

    def value(params):
        cov = params.components[0]
        mu = params.logits
        chol = spd.cholesky_spd(cov, "covariance")
        diff = data - mu
        half = np.linalg.solve(chol, diff.T)
        quad = float(np.sum(half * half))
        logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
        return 0.5 * (n * d * np.log(2.0 * np.pi) + n * logdet + quad)

    def grad(params):
        cov = params.components[0]
        mu = params.logits
        chol = spd.cholesky_spd(cov, "covariance")
        diff = data - mu
        scatter = diff.T @ diff
        # Riemannian S-block of the negated log-likelihood: (n/2) S - M/2
        s_grad = spd.symmetrize(0.5 * n * cov - 0.5 * scatter)
        cov_inv_r = np.linalg.solve(cov, diff.sum(axis=0))
        return GmmTangent(components=(s_grad,), logit_dirs=-cov_inv_r)

    return SolverProblem(n=n, value=value, grad=grad)


def plain_gaussian_init(data):
    data = np.atleast_2d(np.asarray(data, dtype=float))
    d = data.shape[1]
    return GmmParams(components=(np.eye(d),), logits=np.zeros(d))


@dataclass
class FitResult:
    estimate: object          # MixtureEstimate
    params: object            # GmmParams or None (EM)
    objective: float          # penalized log-likelihood (maximization sign)
    trace: object
    stop_reason: str
    solver: str


def fit_gmm(data, k, solver="lbfgs", cfg=None, seed=0, init=None,
            batch_opts=None, sgd_opts=None, schedule=None, batch_size=None,
            em_opts=None, init_candidates=30, penalize=True):
    """End-to-end fit: k-means++ initialization, chosen solver, recovery."""
    if isinstance(data, Dataset):
        data = data.rows
    data = np.atleast_2d(np.asarray(data, dtype=float))
    n, d = data.shape
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}; valid: {', '.join(SOLVERS)}")
    if cfg is None:
        cfg = default_penalty_config(data) if penalize else zero_penalty(d)
    if init is None:
        init = kmeanspp_init(data, k, candidates=init_candidates, seed=seed,
                             cfg=cfg)
    aug = augment(data)

    if solver == "em":
        res = em_fit(data, k, cfg=cfg, init=init, opts=em_opts or EmOptions())
        est = res.x
        return FitResult(estimate=est, params=embed_mixture(est),
                         objective=penalized_objective(embed_mixture(est), aug, cfg),
                         trace=res.trace, stop_reason=res.stop_reason, solver=solver)

    problem = make_gmm_problem(aug, cfg, k)
    x0 = embed_mixture(init)
    if solver == "lbfgs":
        res = lbfgs(problem, x0, batch_opts or BatchOptions())
    elif solver == "cg":
        res = cg(problem, x0, batch_opts or BatchOptions(c2=0.1))
    else:
        opts = sgd_opts or SgdOptions(seed=seed)
        res = sgd(problem, x0,
                  schedule or SgdSchedule(),
                  batch_size or max(d, 1), opts)
    est = recover_mixture(res.x)
    return FitResult(estimate=est, params=res.x,
                     objective=penalized_objective(res.x, aug, cfg),
                     trace=res.trace, stop_reason=res.stop_reason, solver=solver)
