"""Fast built-in property suite backing the `selftest` subcommand.

Groups: manifold axioms, gradient checks, Wolfe certification, and a
g-concavity midpoint sample.  Each group prints one pass/fail line.
"""

from __future__ import annotations

import numpy as np

from . import spd
from .linesearch import ScalarProbe, WolfeConfig, wolfe_search
from .objective import (
    augment,
    penalized_objective,
    reformulated_loglik,
    riemannian_grad,
    zero_penalty,
)
from .product import (
    make_params,
    make_tangent,
    product_metric,
    product_norm,
    product_retract,
    t_axpy,
    t_scale,
)


def _random_spd(rng, d, scale=1.0):
    a = rng.standard_normal((d, d))
    return spd.symmetrize(a @ a.T) + scale * np.eye(d)


def _random_sym(rng, d):
    return spd.symmetrize(rng.standard_normal((d, d)))


def _manifold_group(rng):
    for _ in range(20):
        d = int(rng.integers(1, 6))
        s = _random_spd(rng, d)
        t = _random_spd(rng, d)
        xi = _random_sym(rng, d)
        eta = _random_sym(rng, d)
        if abs(spd.metric(s, xi, eta) - spd.metric(s, eta, xi)) > 1e-8:
            return False
        back = spd.exp_map(s, spd.log_map(s, t))
        if np.linalg.norm(back - t) > 1e-8 * np.linalg.norm(t):
            return False
        moved = spd.parallel_transport(s, t, xi)
        moved2 = spd.parallel_transport(s, t, eta)
        if abs(spd.metric(t, moved, moved2) - spd.metric(s, xi, eta)) > \
                1e-8 * max(abs(spd.metric(s, xi, eta)), 1.0):
            return False
        if np.linalg.norm(spd.geodesic(s, t, 0.0) - s) > 1e-10 * np.linalg.norm(s):
            return False
        if np.linalg.norm(spd.geodesic(s, t, 1.0) - t) > 1e-8 * np.linalg.norm(t):
            return False
    return True


def _gradient_group(rng, perturb=False):
    d, k, n = 2, 2, 40
    data = rng.standard_normal((n, d))
    aug = augment(data)
    cfg = zero_penalty(d)
    params = make_params(
        [_random_spd(rng, d + 1) for _ in range(k)], rng.standard_normal(k - 1))
    grad = riemannian_grad(params, aug, cfg, n)
    if perturb:
        grad = t_scale(grad, 1.5)
    for _ in range(5):
        xi = make_tangent([_random_sym(rng, d + 1) for _ in range(k)],
                          rng.standard_normal(k - 1))
        xi = t_scale(xi, 1.0 / max(product_norm(params, xi), 1e-12))
        h = 1e-5
        up = penalized_objective(product_retract(params, t_scale(xi, h)), aug, cfg)
        dn = penalized_objective(product_retract(params, t_scale(xi, -h)), aug, cfg)
        fd = (up - dn) / (2 * h)
        an = product_metric(params, grad, xi)
        if abs(fd - an) > 1e-4 * max(abs(fd), 1.0):
            return False
    return True


def _wolfe_group(rng):
    for _ in range(50):
        a = float(rng.uniform(0.5, 4.0))
        m = float(rng.uniform(0.2, 5.0))
        probe = ScalarProbe(phi=lambda t, a=a, m=m: a * (t - m) ** 2,
                            dphi=lambda t, a=a, m=m: 2 * a * (t - m))
        res = wolfe_search(probe, WolfeConfig())
        f0, g0 = probe.phi(0.0), probe.dphi(0.0)
        if not (probe.phi(res.alpha) <= f0 + 1e-4 * res.alpha * g0
                and abs(probe.dphi(res.alpha)) <= 0.9 * abs(g0)):
            return False
    return True


def _gconcavity_group(rng):
    d, n = 2, 30
    data = rng.standard_normal((n, d))
    aug = augment(data)
    for _ in range(20):
        s = _random_spd(rng, d + 1)
        r = _random_spd(rng, d + 1)
        mid = spd.geodesic(s, r, 0.5)
        ls = reformulated_loglik(make_params([s]), aug)
        lr = reformulated_loglik(make_params([r]), aug)
        lm = reformulated_loglik(make_params([mid]), aug)
        if lm < 0.5 * ls + 0.5 * lr - 1e-10:
            return False
    return True


def run_selftest(perturb_gradient=False):
    rng = np.random.default_rng(20240811)
    groups = [
        ("manifold", lambda: _manifold_group(rng)),
        ("gradient", lambda: _gradient_group(rng, perturb=perturb_gradient)),
        ("wolfe", lambda: _wolfe_group(rng)),
        ("g-concavity", lambda: _gconcavity_group(rng)),
    ]
    all_ok = True
    for name, fn in groups:
        ok = fn()
        all_ok = all_ok and ok
        print(f"selftest {name}: {'pass' if ok else 'FAIL'}")
    return all_ok
