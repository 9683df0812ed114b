"""Geometry of the manifold of symmetric positive definite (SPD) matrices.

Points and tangent vectors are plain ``numpy`` arrays: a point is a d x d SPD
matrix, a tangent vector at any point is a d x d symmetric matrix.  All maps
are pure functions; nothing here holds state.

The affine-invariant metric is used throughout:

    g_S(xi, eta) = trace(S^-1 xi S^-1 eta)

Matrix square roots, logs and fractional powers go through the symmetric
eigendecomposition, which is stable for the symmetric inputs guaranteed by
the constructors.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericError, RetractionFailure

# Relative symmetry tolerance for tangent/point validation.
SYM_RTOL = 1e-12
# A Cholesky pivot below this fraction of the largest diagonal entry is
# treated as loss of positive definiteness (scale-invariant guard).
PIVOT_RTOL = 1e-14


def symmetrize(m):
    """(M + M^T) / 2."""
    m = np.asarray(m, dtype=float)
    return 0.5 * (m + m.T)


def _check_square(m, name="matrix"):
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")


def _check_same_dim(*mats):
    shapes = {m.shape for m in mats}
    if len(shapes) != 1:
        raise ValueError(f"dimension mismatch: shapes {sorted(shapes)}")


def cholesky_spd(m, name="matrix"):
    """Lower Cholesky factor, with a scale-invariant pivot guard.

    Raises NumericError if the factorization fails or any pivot falls below
    PIVOT_RTOL times the largest diagonal entry.
    """
    try:
        chol = np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"{name} is not positive definite") from exc
    dmax = float(np.max(np.diag(m)))
    if dmax <= 0.0 or float(np.min(np.diag(chol)) ** 2) < PIVOT_RTOL * dmax:
        raise NumericError(f"{name} is numerically singular")
    return chol


def spd_point(m, name="point"):
    """Validate and return an SPD point: symmetrize, then require a successful
    triangular factorization.  Kills symmetry drift at module boundaries."""
    m = np.asarray(m, dtype=float)
    _check_square(m, name)
    if not np.all(np.isfinite(m)):
        raise NumericError(f"{name} has non-finite entries")
    sym = symmetrize(m)
    cholesky_spd(sym, name)
    return sym


def tangent_vector(m, name="tangent"):
    """Validate a tangent vector: square, finite, symmetric within SYM_RTOL."""
    m = np.asarray(m, dtype=float)
    _check_square(m, name)
    if not np.all(np.isfinite(m)):
        raise NumericError(f"{name} has non-finite entries")
    norm = np.linalg.norm(m)
    if norm > 0 and np.linalg.norm(m - m.T) > SYM_RTOL * norm * 10:
        raise ValueError(f"{name} is not symmetric")
    return symmetrize(m)


def _eigh(m):
    return np.linalg.eigh(symmetrize(m))


def spd_sqrt(m):
    w, v = _eigh(m)
    if np.any(w <= 0):
        raise NumericError("matrix square root of non-PD matrix")
    return (v * np.sqrt(w)) @ v.T


def spd_inv_sqrt(m):
    w, v = _eigh(m)
    if np.any(w <= 0):
        raise NumericError("inverse square root of non-PD matrix")
    return (v / np.sqrt(w)) @ v.T


def spd_power(m, p):
    w, v = _eigh(m)
    if np.any(w <= 0):
        raise NumericError("fractional power of non-PD matrix")
    return (v * w**p) @ v.T


def spd_logm(m):
    w, v = _eigh(m)
    if np.any(w <= 0):
        raise NumericError("matrix logarithm of non-PD matrix")
    return (v * np.log(w)) @ v.T


def sym_expm(m):
    """exp of a symmetric matrix via eigendecomposition."""
    w, v = _eigh(m)
    with np.errstate(over="ignore"):
        ew = np.exp(w)
    if not np.all(np.isfinite(ew)):
        raise NumericError("matrix exponential overflow")
    return (v * ew) @ v.T


def metric(base, xi, eta):
    """Affine-invariant inner product trace(S^-1 xi S^-1 eta)."""
    base = np.asarray(base, float)
    xi = np.asarray(xi, float)
    eta = np.asarray(eta, float)
    _check_same_dim(base, xi, eta)
    for m, name in ((base, "base"), (xi, "xi"), (eta, "eta")):
        if not np.all(np.isfinite(m)):
            raise NumericError(f"{name} has non-finite entries")
    a = np.linalg.solve(base, xi)
    b = np.linalg.solve(base, eta)
    # trace(a @ b) without forming the product
    return float(np.sum(a * b.T))


def norm(base, xi):
    return float(np.sqrt(max(metric(base, xi, xi), 0.0)))


def egrad_to_rgrad(base, egrad):
    """Riemannian gradient (1/2) S (G + G^T) S from a Euclidean gradient G."""
    base = np.asarray(base, float)
    egrad = np.asarray(egrad, float)
    _check_same_dim(base, egrad)
    return symmetrize(base @ symmetrize(egrad) @ base)


def exp_map(base, xi):
    """Exponential map S^(1/2) exp(S^(-1/2) xi S^(-1/2)) S^(1/2).

    Algebraically equal to S exp(S^-1 xi) but symmetric in floating point.
    """
    base = np.asarray(base, float)
    xi = np.asarray(xi, float)
    _check_same_dim(base, xi)
    if not np.any(xi):
        return symmetrize(base)
    half = spd_sqrt(base)
    inv_half = spd_inv_sqrt(base)
    inner = sym_expm(inv_half @ symmetrize(xi) @ inv_half)
    out = symmetrize(half @ inner @ half)
    if not np.all(np.isfinite(out)):
        raise NumericError("exponential map overflow")
    return out


def log_map(base, target):
    """Inverse of exp_map: the tangent vector xi with exp_map(base, xi) = target."""
    base = np.asarray(base, float)
    target = np.asarray(target, float)
    _check_same_dim(base, target)
    half = spd_sqrt(base)
    inv_half = spd_inv_sqrt(base)
    inner = spd_logm(inv_half @ target @ inv_half)
    return symmetrize(half @ inner @ half)


def geodesic(a, b, t):
    """Geodesic A^(1/2) (A^(-1/2) B A^(-1/2))^t A^(1/2), 0 <= t <= 1."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"geodesic parameter t={t} outside [0, 1]")
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    _check_same_dim(a, b)
    half = spd_sqrt(a)
    inv_half = spd_inv_sqrt(a)
    mid = spd_power(inv_half @ b @ inv_half, t)
    return symmetrize(half @ mid @ half)


def transport_operator(frm, to):
    """The operator E = (to @ frm^-1)^(1/2) defining parallel transport.

    Computed through the similarity transform
    E = frm^(1/2) (frm^(-1/2) to frm^(-1/2))^(1/2) frm^(-1/2),
    which keeps every factor symmetric; E satisfies E frm E^T = to.
    """
    frm = np.asarray(frm, float)
    to = np.asarray(to, float)
    _check_same_dim(frm, to)
    half = spd_sqrt(frm)
    inv_half = spd_inv_sqrt(frm)
    mid = spd_sqrt(inv_half @ to @ inv_half)
    return half @ mid @ inv_half


def parallel_transport(frm, to, xi):
    """Parallel transport E xi E^T with E = (to frm^-1)^(1/2)."""
    e = transport_operator(frm, to)
    return symmetrize(e @ np.asarray(xi, float) @ e.T)


def euclidean_retraction(base, xi):
    """Additive retraction S + xi; fails if the result leaves the PD cone."""
    base = np.asarray(base, float)
    xi = np.asarray(xi, float)
    _check_same_dim(base, xi)
    cand = symmetrize(base + xi)
    try:
        cholesky_spd(cand, "retracted point")
    except NumericError as exc:
        min_eig = float(np.min(np.linalg.eigvalsh(cand)))
        raise RetractionFailure(
            f"euclidean retraction left the PD cone (min eigenvalue {min_eig:.3e})",
            min_eigenvalue=min_eig,
        ) from exc
    return cand
