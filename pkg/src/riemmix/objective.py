"""Lifted and penalized Gaussian mixture log-likelihood.

The mixture is optimized over augmented SPD matrices S_j of size (d+1)x(d+1)
that absorb the mean and covariance of each component, plus K-1 weight
logits.  Each sample x is lifted to y = [x; 1] and scored with the scaled
zero-mean Gaussian

    log q(y; S) = (1/2) log(2*pi) + 1/2 + log p_N(y; 0, S),

so that at a maximizer the bottom-right entry of S equals 1 and the standard
mixture parameters can be read off the blocks of S.  The sqrt(2*pi)*e^(1/2)
scale is the one that makes the lifted objective take exactly the same value
as the standard log-likelihood at corresponding maximizers, not merely share
them: expanding S in block form gives a per-sample constant of
log(c) - (1/2)log(2*pi) - 1/2 beyond the standard Gaussian term, which
vanishes only for c = sqrt(2*pi)*e^(1/2).

Penalties: an inverse-Wishart/Gaussian conjugate pair acting on S through

    psi(S) = -(rho/2) logdet(S) - (beta/2) trace(Psi S^-1),

and a symmetric Dirichlet term on the weight logits.  All densities and
mixture sums are evaluated in log space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.special import logsumexp

from . import spd
from .errors import NumericError
from .product import GmmParams, GmmTangent, make_params

LOG_2PI = float(np.log(2.0 * np.pi))


# ---------------------------------------------------------------------------
# data lifting


@dataclass(frozen=True)
class AugmentedData:
    """Samples lifted to R^(d+1) with a trailing 1 in every row."""

    rows: np.ndarray  # n x (d+1)
    d: int

    @property
    def n(self):
        return self.rows.shape[0]


def augment(data):
    """Append a trailing 1 to every row: x -> [x; 1]."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    if data.size and not np.all(np.isfinite(data)):
        raise NumericError("data contains non-finite entries")
    n, d = data.shape
    rows = np.hstack([data, np.ones((n, 1))]) if n else np.empty((0, d + 1))
    return AugmentedData(rows=rows, d=d)


# ---------------------------------------------------------------------------
# penalty configuration


@dataclass(frozen=True)
class PenaltyConfig:
    """Penalizer constants and the assembled block matrix Psi.

    In the derived (default) mode alpha_w and rho follow from (beta, kappa,
    nu, d) through

        alpha_w = beta * (kappa - 1) / (d + nu + 1)
        rho     = alpha_w * (d + nu + 1) + beta

    The raw constructor sets them independently (used to mirror reported
    experiment constants that do not satisfy the identities).
    """

    kappa: float
    nu: float
    beta: float
    alpha_w: float
    rho: float
    Lambda: np.ndarray
    lambda_vec: np.ndarray
    zeta: float
    Psi: np.ndarray

    @property
    def d(self):
        return self.Lambda.shape[0]


def _assemble_psi(alpha_w, beta, kappa, Lambda, lam):
    d = Lambda.shape[0]
    psi = np.empty((d + 1, d + 1))
    scale = alpha_w / beta if beta != 0 else 0.0
    psi[:d, :d] = scale * Lambda + kappa * np.outer(lam, lam)
    psi[:d, d] = kappa * lam
    psi[d, :d] = kappa * lam
    psi[d, d] = kappa
    return spd.symmetrize(psi)


def build_psi_matrix(kappa, nu, beta, Lambda, lambda_vec, zeta=1.0):
    """Derived-mode config: fills alpha_w and rho from the two identities."""
    Lambda = spd.spd_point(Lambda, "Lambda")
    lam = np.atleast_1d(np.asarray(lambda_vec, dtype=float))
    d = Lambda.shape[0]
    if lam.shape != (d,):
        raise ValueError("lambda_vec dimension does not match Lambda")
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    if beta <= 0:
        raise ValueError("beta must be positive")
    alpha_w = beta * (kappa - 1.0) / (d + nu + 1.0)
    rho = alpha_w * (d + nu + 1.0) + beta
    psi = _assemble_psi(alpha_w, beta, kappa, Lambda, lam)
    return PenaltyConfig(
        kappa=float(kappa), nu=float(nu), beta=float(beta), alpha_w=float(alpha_w),
        rho=float(rho), Lambda=Lambda, lambda_vec=lam, zeta=float(zeta), Psi=psi,
    )


def raw_penalty_config(rho, kappa, alpha_w, beta, Lambda, lambda_vec, zeta=1.0, nu=0.0):
    """Raw-override mode: rho, kappa, alpha_w, beta set independently."""
    Lambda = spd.spd_point(Lambda, "Lambda")
    lam = np.atleast_1d(np.asarray(lambda_vec, dtype=float))
    psi = _assemble_psi(alpha_w, beta, kappa, Lambda, lam)
    return PenaltyConfig(
        kappa=float(kappa), nu=float(nu), beta=float(beta), alpha_w=float(alpha_w),
        rho=float(rho), Lambda=Lambda, lambda_vec=lam, zeta=float(zeta), Psi=psi,
    )


def zero_penalty(d):
    """No-op penalty (rho = beta-weighting = zeta = 0); used for plain ML."""
    return PenaltyConfig(
        kappa=1.0, nu=0.0, beta=0.0, alpha_w=0.0, rho=0.0,
        Lambda=np.eye(d), lambda_vec=np.zeros(d), zeta=0.0,
        Psi=np.zeros((d + 1, d + 1)),
    )


def default_penalty_config(data, kappa=2.0, beta=1.0, nu=None, zeta=1.0,
                           lambda_scale=0.01):
    """Data-driven defaults: Lambda = lambda_scale * sample covariance,
    lambda = sample mean, nu = d + 1 (proper inverse-Wishart)."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    n, d = data.shape
    if nu is None:
        nu = d + 1.0
    mean = data.mean(axis=0) if n else np.zeros(d)
    if n > 1:
        cov = np.cov(data, rowvar=False, bias=True)
        cov = np.atleast_2d(cov)
    else:
        cov = np.eye(d)
    # guard against rank deficiency of the sample covariance
    cov = cov + 1e-10 * np.trace(cov) / max(d, 1) * np.eye(d) + 1e-12 * np.eye(d)
    return build_psi_matrix(kappa, nu, beta, lambda_scale * cov, mean, zeta)


# ---------------------------------------------------------------------------
# densities and likelihood


def log_q_density(y, s):
    """log of the scaled density sqrt(2*pi)*exp(1/2)*p_N(y; 0, S)."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    s = np.asarray(s, dtype=float)
    if s.shape != (y.size, y.size):
        raise ValueError("dimension mismatch between y and S")
    chol = spd.cholesky_spd(spd.symmetrize(s), "S")
    return float(_log_q_rows(y[None, :], chol)[0])


def _log_q_rows(rows, chol):
    """Vector of log q(y_i; S) for all rows, given the Cholesky factor of S."""
    dim = chol.shape[0]
    half = solve_triangular(chol, rows.T, lower=True)
    quad = np.sum(half * half, axis=0)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    return 0.5 * LOG_2PI + 0.5 - 0.5 * logdet - 0.5 * dim * LOG_2PI - 0.5 * quad


def log_weights(logits, k):
    """log softmax of the logits with the implicit trailing zero."""
    omega = np.concatenate([np.atleast_1d(np.asarray(logits, float)), [0.0]])
    if omega.size != k:
        raise ValueError(f"expected {k - 1} logits, got {omega.size - 1}")
    return omega - logsumexp(omega)


def _component_chols(params):
    return [spd.cholesky_spd(c, f"component {j}") for j, c in enumerate(params.components)]


def _log_joint(params, data):
    """n x K matrix of log(alpha_j) + log q(y_i; S_j)."""
    k = params.n_components
    logw = log_weights(params.logits, k)
    cols = []
    for j, chol in enumerate(_component_chols(params)):
        cols.append(logw[j] + _log_q_rows(data.rows, chol))
    return np.column_stack(cols)


def reformulated_loglik(params, data):
    """sum_i log sum_j softmax(omega)_j q(y_i; S_j), via log-sum-exp."""
    if params.matrix_dim != data.d + 1:
        raise ValueError("parameter dimension does not match data")
    if data.n == 0:
        return 0.0
    return float(np.sum(logsumexp(_log_joint(params, data), axis=1)))


def penalty_psi(s, cfg):
    """-(rho/2) logdet(S) - (beta/2) trace(Psi S^-1)."""
    if cfg.rho == 0.0 and cfg.beta == 0.0:
        return 0.0
    s = np.asarray(s, dtype=float)
    chol = spd.cholesky_spd(spd.symmetrize(s), "S")
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    tr = float(np.trace(cho_solve((chol, True), cfg.Psi)))
    return -0.5 * cfg.rho * logdet - 0.5 * cfg.beta * tr


def penalty_phi(logits, zeta, k):
    """zeta * sum_i omega_i - K * zeta * logsumexp(omega), omega_K = 0."""
    if zeta == 0.0:
        return 0.0
    omega = np.concatenate([np.atleast_1d(np.asarray(logits, float)), [0.0]])
    if omega.size != k:
        raise ValueError(f"expected {k - 1} logits, got {omega.size - 1}")
    return float(zeta * np.sum(omega) - k * zeta * logsumexp(omega))


def penalized_objective(params, data, cfg):
    """reformulated_loglik + sum_j psi(S_j) + phi(omega)."""
    total = reformulated_loglik(params, data)
    total += sum(penalty_psi(c, cfg) for c in params.components)
    total += penalty_phi(params.logits, cfg.zeta, params.n_components)
    return float(total)


def responsibilities(params, data):
    """Posterior membership weights w_ij, evaluated in log space."""
    lj = _log_joint(params, data)
    row_lse = logsumexp(lj, axis=1)
    bad = ~np.isfinite(row_lse)
    if np.any(bad):
        row = int(np.argmax(bad))
        raise NumericError(f"all mixture components underflow for row {row}")
    return np.exp(lj - row_lse[:, None])


# ---------------------------------------------------------------------------
# gradients


def euclidean_grad(params, batch, cfg, n_total):
    """Sum of per-sample Euclidean gradients over the batch.

    Per sample i and component j the S-block is
        -(w/2) S^-1 + (w/2) S^-1 y y^T S^-1 - (rho/2n) S^-1 + (beta/2n) S^-1 Psi S^-1
    and the logit block is w - alpha_j + zeta/n - (K zeta / n) alpha_j.

    Returns (list of K matrices, array of K-1 logit derivatives).
    """
    if batch.n == 0:
        raise ValueError("batch must be nonempty")
    if n_total < batch.n:
        raise ValueError("n_total smaller than the batch")
    k = params.n_components
    w = responsibilities(params, batch)
    alpha = np.exp(log_weights(params.logits, k))
    b = batch.n
    pen_scale = b / float(n_total)
    s_grads = []
    for j, s in enumerate(params.components):
        chol = spd.cholesky_spd(s, f"component {j}")
        s_inv = cho_solve((chol, True), np.eye(s.shape[0]))
        wj = w[:, j]
        scatter = (batch.rows * wj[:, None]).T @ batch.rows
        g = -0.5 * (np.sum(wj) + pen_scale * cfg.rho) * s_inv
        g += 0.5 * s_inv @ scatter @ s_inv
        if cfg.beta != 0.0:
            g += 0.5 * pen_scale * cfg.beta * s_inv @ cfg.Psi @ s_inv
        s_grads.append(spd.symmetrize(g))
    resp_sum = np.sum(w, axis=0)
    omega_grad = resp_sum[:-1] - b * alpha[:-1]
    if cfg.zeta != 0.0:
        omega_grad = omega_grad + pen_scale * (cfg.zeta - k * cfg.zeta * alpha[:-1])
    return s_grads, omega_grad


def riemannian_grad(params, batch, cfg, n_total):
    """Product-manifold gradient: S-blocks via (1/2) S (G + G^T) S, logits unchanged."""
    s_grads, omega_grad = euclidean_grad(params, batch, cfg, n_total)
    comps = tuple(
        spd.egrad_to_rgrad(s, g) for s, g in zip(params.components, s_grads)
    )
    return GmmTangent(components=comps, logit_dirs=np.asarray(omega_grad, float))


# ---------------------------------------------------------------------------
# standard-form mixtures


@dataclass(frozen=True)
class MixtureEstimate:
    """Standard-form GMM: simplex weights, means, covariances."""

    weights: np.ndarray
    means: np.ndarray       # K x d
    covariances: np.ndarray  # K x d x d

    @property
    def n_components(self):
        return self.weights.shape[0]

    @property
    def d(self):
        return self.means.shape[1]


def make_mixture(weights, means, covariances):
    weights = np.asarray(weights, dtype=float)
    means = np.atleast_2d(np.asarray(means, dtype=float))
    covariances = np.asarray(covariances, dtype=float)
    if covariances.ndim == 2:
        covariances = covariances[None, :, :]
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
        raise ValueError("weights must be nonnegative and sum to 1")
    covariances = np.stack([spd.spd_point(c, f"covariance {j}")
                            for j, c in enumerate(covariances)])
    return MixtureEstimate(weights=weights, means=means, covariances=covariances)


def recover_mixture(params):
    """Read (weights, means, covariances) off the blocks of each S_j.

    With S = [[U + s t t^T, s t], [s t^T, s]]: s is the corner entry,
    t = S[:d, d] / s and U = S[:d, :d] - s t t^T (a Schur complement, hence SPD).
    """
    k = params.n_components
    d = params.matrix_dim - 1
    weights = np.exp(log_weights(params.logits, k))
    means = np.empty((k, d))
    covs = np.empty((k, d, d))
    for j, s in enumerate(params.components):
        corner = s[d, d]
        t = s[:d, d] / corner
        u = s[:d, :d] - corner * np.outer(t, t)
        means[j] = t
        covs[j] = spd.symmetrize(u)
    return MixtureEstimate(weights=weights, means=means, covariances=covs)


def embed_mixture(est):
    """Inverse of recover_mixture with s = 1; logits are log(w_j / w_K)."""
    k = est.n_components
    d = est.d
    comps = []
    for j in range(k):
        cov = spd.spd_point(est.covariances[j], f"covariance {j}")
        mu = est.means[j]
        s = np.empty((d + 1, d + 1))
        s[:d, :d] = cov + np.outer(mu, mu)
        s[:d, d] = mu
        s[d, :d] = mu
        s[d, d] = 1.0
        comps.append(s)
    if np.any(est.weights <= 0):
        raise ValueError("embedding requires strictly positive weights")
    logits = np.log(est.weights[:-1] / est.weights[-1])
    return make_params(comps, logits)
