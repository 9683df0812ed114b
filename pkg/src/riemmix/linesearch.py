"""Strong-Wolfe line search with bracketing and zooming phases.

Minimization convention throughout: the search operates on a scalar slice
phi(alpha) = f(R_x(alpha * xi)) with phi'(0) < 0 and returns a step
satisfying

    phi(a) <= phi(0) + c1 * a * phi'(0)          (sufficient decrease)
    |phi'(a)| <= c2 * |phi'(0)|                  (strong curvature)

Interpolation and extrapolation use Hermite cubics fit to the function
value and slope at two points.  Interpolation is safeguarded to the
interior of the bracket (0.1 times the interval length from either end);
extrapolation trials are clamped to [1.1, 10] times the current step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import LineSearchFailure


@dataclass
class WolfeConfig:
    c1: float = 1e-4
    c2: float = 0.9
    i_max: int = 50
    alpha_init: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.c1 < self.c2 < 1.0:
            raise ValueError("require 0 < c1 < c2 < 1")
        if self.alpha_init <= 0.0:
            raise ValueError("alpha_init must be positive")


@dataclass
class ScalarProbe:
    """Objective and slope along the search curve."""

    phi: Callable[[float], float]
    dphi: Callable[[float], float]


@dataclass
class LineSearchResult:
    alpha: float
    phi_alpha: float
    dphi_alpha: float
    evals: int
    wolfe_ok: bool = True


def cubic_min(a, phi_a, dphi_a, b, phi_b, dphi_b):
    """Minimizer of the Hermite cubic through (a, phi_a, dphi_a), (b, phi_b,
    dphi_b), clamped to the interior [lo + 0.1 L, hi - 0.1 L] of the interval.
    Falls back to the midpoint when the cubic has no usable interior minimizer.
    """
    if a == b:
        raise ValueError("cubic_min requires two distinct points")
    lo, hi = (a, b) if a < b else (b, a)
    length = hi - lo
    guard_lo = lo + 0.1 * length
    guard_hi = hi - 0.1 * length
    d1 = dphi_a + dphi_b - 3.0 * (phi_a - phi_b) / (a - b)
    disc = d1 * d1 - dphi_a * dphi_b
    if disc < 0.0:
        return 0.5 * (lo + hi)
    d2 = np.sign(b - a) * np.sqrt(disc)
    denom = dphi_b - dphi_a + 2.0 * d2
    if denom == 0.0 or not np.isfinite(denom):
        return 0.5 * (lo + hi)
    cand = b - (b - a) * (dphi_b + d2 - d1) / denom
    if not np.isfinite(cand):
        return 0.5 * (lo + hi)
    return float(min(max(cand, guard_lo), guard_hi))


def initial_step(f_curr, f_prev, slope_curr):
    """First trial step 2 (f_k - f_{k-1}) / phi'(0); falls back to 1 when the
    formula gives a nonpositive or non-finite value (first iteration, or an
    objective that did not decrease)."""
    if slope_curr >= 0.0:
        raise ValueError("initial_step requires a descent slope")
    if f_prev is None:
        return 1.0
    alpha = 2.0 * (f_curr - f_prev) / slope_curr
    if not np.isfinite(alpha) or alpha <= 0.0:
        return 1.0
    return float(alpha)


class _Budget:
    """Tracks probe evaluations; phi and dphi each count one."""

    def __init__(self, probe):
        self._probe = probe
        self.evals = 0

    def at(self, alpha):
        self.evals += 2
        return self._probe.phi(alpha), self._probe.dphi(alpha)


def _extrapolate(alpha, phi0, dphi0, phi_a, dphi_a):
    """Next bracketing trial: cubic extrapolant from data at 0 and alpha,
    clamped into [1.1, 10] times the current step."""
    cand = cubic_min(0.0, phi0, dphi0, alpha, phi_a, dphi_a)
    # the safeguarded interpolant lives inside (0, alpha); an extrapolation
    # candidate beyond alpha comes from the unclamped vertex instead
    d1 = dphi0 + dphi_a - 3.0 * (phi0 - phi_a) / (0.0 - alpha)
    disc = d1 * d1 - dphi0 * dphi_a
    if disc >= 0.0:
        d2 = np.sqrt(disc)
        denom = dphi_a - dphi0 + 2.0 * d2
        if denom != 0.0 and np.isfinite(denom):
            vertex = alpha - alpha * (dphi_a + d2 - d1) / denom
            if np.isfinite(vertex):
                cand = vertex
    return float(min(10.0 * alpha, max(1.1 * alpha, cand)))


def wolfe_search(probe, cfg=None):
    """Bracketing phase followed by zooming; returns a strong-Wolfe step.

    On budget exhaustion, the best point seen that still satisfies
    sufficient decrease is returned flagged ``wolfe_ok=False``; if no probed
    point decreased sufficiently, LineSearchFailure is raised.
    """
    cfg = cfg or WolfeConfig()
    budget = _Budget(probe)
    phi0 = probe.phi(0.0)
    dphi0 = probe.dphi(0.0)
    budget.evals += 2
    if dphi0 >= 0.0:
        raise ValueError("wolfe_search requires a descent direction (phi'(0) < 0)")

    def suff(alpha, val):
        return val <= phi0 + cfg.c1 * alpha * dphi0

    def curv(slope):
        return abs(slope) <= cfg.c2 * abs(dphi0)

    best = None  # best sufficient-decrease point: (phi, alpha, slope)

    def note(alpha, val, slope):
        nonlocal best
        if suff(alpha, val) and (best is None or val < best[0]):
            best = (val, alpha, slope)

    def finish_failure():
        if best is not None:
            return LineSearchResult(best[1], best[0], best[2], budget.evals,
                                    wolfe_ok=False)
        raise LineSearchFailure(
            "no sufficient-decrease point found within the probe budget",
            evals=budget.evals)

    def zoom(a_lo, f_lo, g_lo, a_hi, f_hi, g_hi, i):
        while i <= cfg.i_max:
            i += 1
            # the bracket can collapse to rounding width near machine-precision
            # optima; no further trial point is distinguishable, so settle
            if abs(a_hi - a_lo) <= 1e-14 * max(1.0, abs(a_lo), abs(a_hi)):
                return finish_failure()
            a_j = cubic_min(a_lo, f_lo, g_lo, a_hi, f_hi, g_hi)
            f_j, g_j = budget.at(a_j)
            note(a_j, f_j, g_j)
            if not suff(a_j, f_j) or f_j >= f_lo:
                a_hi, f_hi, g_hi = a_j, f_j, g_j
            else:
                if curv(g_j):
                    return LineSearchResult(a_j, f_j, g_j, budget.evals)
                if g_j * (a_hi - a_lo) >= 0.0:
                    a_hi, f_hi, g_hi = a_lo, f_lo, g_lo
                a_lo, f_lo, g_lo = a_j, f_j, g_j
        return finish_failure()

    a_prev, f_prev, g_prev = 0.0, phi0, dphi0
    a_i = cfg.alpha_init
    i = 0
    while i <= cfg.i_max:
        i += 1
        f_i, g_i = budget.at(a_i)
        note(a_i, f_i, g_i)
        if not suff(a_i, f_i) or (i > 1 and f_i >= f_prev):
            return zoom(a_prev, f_prev, g_prev, a_i, f_i, g_i, i)
        if curv(g_i):
            return LineSearchResult(a_i, f_i, g_i, budget.evals)
        if g_i >= 0.0:
            return zoom(a_i, f_i, g_i, a_prev, f_prev, g_prev, i)
        a_next = _extrapolate(a_i, phi0, dphi0, f_i, g_i)
        a_prev, f_prev, g_prev = a_i, f_i, g_i
        a_i = a_next
    return finish_failure()
