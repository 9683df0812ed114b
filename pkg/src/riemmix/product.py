"""Product manifold (prod_j P^(d+1)) x R^(K-1).

A point couples K SPD matrices (one per mixture component, each of size
(d+1) x (d+1)) with K-1 unconstrained weight logits; the K-th logit is the
constant 0.  Geometry is component-wise: SPD factors use the affine-invariant
metric, the logit factor is Euclidean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spd
from .errors import RetractionFailure


@dataclass(frozen=True)
class GmmParams:
    """Point on the product manifold: K SPD matrices plus weight logits."""

    components: tuple
    logits: np.ndarray

    @property
    def n_components(self):
        return len(self.components)

    @property
    def matrix_dim(self):
        return self.components[0].shape[0]


@dataclass(frozen=True)
class GmmTangent:
    """Tangent vector matching a GmmParams: symmetric matrices plus logit directions."""

    components: tuple
    logit_dirs: np.ndarray


def make_params(components, logits=None):
    """Validated constructor: symmetrizes and PD-checks every component."""
    comps = tuple(spd.spd_point(c, f"component {j}") for j, c in enumerate(components))
    if not comps:
        raise ValueError("at least one component required")
    if len({c.shape for c in comps}) != 1:
        raise ValueError("components must share a dimension")
    if logits is None:
        logits = np.zeros(len(comps) - 1)
    logits = np.atleast_1d(np.asarray(logits, dtype=float))
    if not np.all(np.isfinite(logits)):
        raise ValueError("logits must be finite")
    return GmmParams(components=comps, logits=logits)


def make_tangent(components, logit_dirs):
    comps = tuple(spd.tangent_vector(c, f"tangent {j}") for j, c in enumerate(components))
    logit_dirs = np.atleast_1d(np.asarray(logit_dirs, dtype=float))
    return GmmTangent(components=comps, logit_dirs=logit_dirs)


def _check_shapes(base, *tangents):
    for t in tangents:
        if len(t.components) != len(base.components):
            raise ValueError("component count mismatch")
        for c, b in zip(t.components, base.components):
            if c.shape != b.shape:
                raise ValueError("component shape mismatch")
        if t.logit_dirs.shape != base.logits.shape:
            raise ValueError("logit shape mismatch")


def zero_tangent(params):
    return GmmTangent(
        components=tuple(np.zeros_like(c) for c in params.components),
        logit_dirs=np.zeros_like(params.logits),
    )


def t_scale(xi, a):
    return GmmTangent(
        components=tuple(a * c for c in xi.components),
        logit_dirs=a * xi.logit_dirs,
    )


def t_add(xi, eta):
    return GmmTangent(
        components=tuple(a + b for a, b in zip(xi.components, eta.components)),
        logit_dirs=xi.logit_dirs + eta.logit_dirs,
    )


def t_axpy(a, xi, eta):
    """a * xi + eta."""
    return GmmTangent(
        components=tuple(a * u + v for u, v in zip(xi.components, eta.components)),
        logit_dirs=a * xi.logit_dirs + eta.logit_dirs,
    )


def product_metric(base, xi, eta):
    """Sum of SPD metrics over components plus the Euclidean logit product."""
    _check_shapes(base, xi, eta)
    total = sum(
        spd.metric(s, a, b)
        for s, a, b in zip(base.components, xi.components, eta.components)
    )
    return float(total + np.dot(xi.logit_dirs, eta.logit_dirs))


def product_norm(base, xi):
    return float(np.sqrt(max(product_metric(base, xi, xi), 0.0)))


def product_retract(base, xi, kind="exp"):
    """Component-wise retraction; logits move additively."""
    _check_shapes(base, xi)
    if kind not in ("exp", "euclidean"):
        raise ValueError(f"unknown retraction kind {kind!r}")
    new_comps = []
    for j, (s, v) in enumerate(zip(base.components, xi.components)):
        try:
            if kind == "exp":
                new_comps.append(spd.exp_map(s, v))
            else:
                new_comps.append(spd.euclidean_retraction(s, v))
        except RetractionFailure as exc:
            raise RetractionFailure(
                f"retraction failed on component {j}: {exc}",
                min_eigenvalue=exc.min_eigenvalue,
                component=j,
            ) from exc
    return GmmParams(components=tuple(new_comps), logits=base.logits + xi.logit_dirs)


def product_transport(frm, to, xi):
    """Parallel transport on each SPD factor; logit directions are unchanged."""
    _check_shapes(frm, xi)
    _check_shapes(to, xi)
    comps = tuple(
        spd.parallel_transport(a, b, v)
        for a, b, v in zip(frm.components, to.components, xi.components)
    )
    return GmmTangent(components=comps, logit_dirs=xi.logit_dirs.copy())
