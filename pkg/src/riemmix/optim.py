"""Riemannian LBFGS, conjugate gradients and SGD over the product manifold.

Solvers are generic in a SolverProblem bundle (value, gradient, stochastic
gradient, retraction, transport, metric) and follow the minimization
convention: the GMM drivers hand them the negated penalized log-likelihood.

Evaluation accounting: a function evaluation and a gradient evaluation each
count 1 (a line-search probe evaluating both counts 2); a stochastic
mini-batch gradient counts batch_size / n of a full gradient evaluation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import LineSearchFailure, NumericError, RetractionFailure
from .linesearch import ScalarProbe, WolfeConfig, initial_step, wolfe_search
from .product import (
    product_metric,
    product_norm,
    product_retract,
    product_transport,
    t_add,
    t_axpy,
    t_scale,
    zero_tangent,
)

CURVATURE_ADMIT_RTOL = 1e-10


@dataclass
class SolverProblem:
    """Objective/geometry seam consumed by all solvers.

    ``stochastic_grad(x, idx)`` must be an unbiased estimator of the full
    gradient (batch terms rescaled by n / batch_size).
    """

    n: int
    value: Callable
    grad: Callable
    stochastic_grad: Optional[Callable] = None
    retract: Callable = product_retract
    transport: Callable = product_transport
    metric: Callable = product_metric


@dataclass
class TraceRecord:
    evals: float
    objective: float
    grad_norm: float
    wall_s: float


@dataclass
class ConvergenceTrace:
    records: list = field(default_factory=list)

    def append(self, evals, objective, grad_norm, wall_s):
        if self.records and evals <= self.records[-1].evals:
            evals = self.records[-1].evals + 1e-9
        self.records.append(TraceRecord(evals, objective, grad_norm, wall_s))

    def __len__(self):
        return len(self.records)

    @property
    def objectives(self):
        return np.array([r.objective for r in self.records])

    @property
    def evals(self):
        return np.array([r.evals for r in self.records])

    @property
    def grad_norms(self):
        return np.array([r.grad_norm for r in self.records])


class _Counting:
    """Wraps a SolverProblem with evaluation counting."""

    def __init__(self, problem):
        self.p = problem
        self.evals = 0.0

    def value(self, x):
        self.evals += 1.0
        return self.p.value(x)

    def grad(self, x):
        self.evals += 1.0
        return self.p.grad(x)

    def stochastic_grad(self, x, idx):
        self.evals += len(idx) / self.p.n
        return self.p.stochastic_grad(x, idx)


@dataclass
class BatchOptions:
    max_iters: int = 1000
    grad_tol: float = 1e-6
    f_tol: float = 1e-6
    memory: int = 10
    retraction: str = "exp"
    c1: float = 1e-4
    c2: float = 0.9
    ls_max: int = 50


@dataclass
class SolverResult:
    x: object
    trace: ConvergenceTrace
    stop_reason: str
    iterations: int


def _make_probe(counting, problem, x, direction, f0, g0_slope, kind):
    """Scalar slice of the objective along the retraction curve; memoizes the
    retracted point and its gradient so the accepted step is not recomputed.
    New evaluations count against ``counting``; alpha = 0 reuses f0/slope."""
    cache = {}

    def point_at(alpha):
        if alpha not in cache:
            cache[alpha] = {"x": problem.retract(x, t_scale(direction, alpha),
                                                 kind=kind)}
        return cache[alpha]

    def phi(alpha):
        if alpha == 0.0:
            return f0
        entry = point_at(alpha)
        if "f" not in entry:
            entry["f"] = counting.value(entry["x"])
        return entry["f"]

    def dphi(alpha):
        if alpha == 0.0:
            return g0_slope
        entry = point_at(alpha)
        if "g" not in entry:
            entry["g"] = counting.grad(entry["x"])
        moved = problem.transport(x, entry["x"], direction)
        return problem.metric(entry["x"], entry["g"], moved)

    return ScalarProbe(phi=phi, dphi=dphi), cache


def _run_batch(problem, x0, opts, direction_fn, post_step):
    """Shared driver for LBFGS and CG.

    direction_fn(state) -> search direction (tangent at state['x']).
    post_step(state, ...) updates solver memory after an accepted step.
    """
    counting = _Counting(problem)
    trace = ConvergenceTrace()
    t0 = time.perf_counter()
    x = x0
    f = counting.value(x)
    g = counting.grad(x)
    gnorm = product_norm(x, g)
    trace.append(counting.evals, f, gnorm, time.perf_counter() - t0)
    if gnorm < opts.grad_tol:
        return SolverResult(x=x, trace=trace, stop_reason="grad_tol", iterations=0)
    state = {"x": x, "f": f, "g": g, "f_prev": None, "mem": [], "cg_dir": None}
    stop = "max_iters"
    it = 0

    def steepest(state):
        return (t_scale(state["g"], -1.0),
                -product_metric(state["x"], state["g"], state["g"]))

    for it in range(1, opts.max_iters + 1):
        on_steepest = False
        d = direction_fn(state)
        slope = product_metric(state["x"], state["g"], d)
        if slope >= 0.0 or not np.isfinite(slope):
            state["mem"].clear()
            state["cg_dir"] = None
            d, slope = steepest(state)
            on_steepest = True
        alpha0 = initial_step(state["f"], state["f_prev"], slope)
        probe, cache = _make_probe(counting, problem, state["x"], d,
                                   state["f"], slope, opts.retraction)
        wcfg = WolfeConfig(c1=opts.c1, c2=opts.c2, i_max=opts.ls_max,
                           alpha_init=alpha0)
        try:
            res = wolfe_search(probe, wcfg)
        except (LineSearchFailure, RetractionFailure, NumericError):
            if on_steepest:
                stop = "line_search_failure"
                break
            # retry once from a steepest-descent restart
            state["mem"].clear()
            state["cg_dir"] = None
            d, slope = steepest(state)
            probe, cache = _make_probe(counting, problem, state["x"], d,
                                       state["f"], slope, opts.retraction)
            wcfg = WolfeConfig(
                c1=opts.c1, c2=opts.c2, i_max=opts.ls_max,
                alpha_init=1.0 / max(product_norm(state["x"], state["g"]), 1e-12))
            try:
                res = wolfe_search(probe, wcfg)
            except (LineSearchFailure, RetractionFailure, NumericError):
                stop = "line_search_failure"
                break
        entry = cache.get(res.alpha)
        if entry is None:
            entry = {"x": problem.retract(state["x"], t_scale(d, res.alpha),
                                          kind=opts.retraction)}
        x_new = entry["x"]
        f_new = entry.get("f")
        if f_new is None:
            f_new = counting.value(x_new)
        g_new = entry.get("g")
        if g_new is None:
            g_new = counting.grad(x_new)
        post_step(state, x_new, f_new, g_new, d, res)
        state["f_prev"] = state["f"]
        state["x"], state["f"], state["g"] = x_new, f_new, g_new
        gnorm = product_norm(x_new, g_new)
        trace.append(counting.evals, f_new, gnorm, time.perf_counter() - t0)
        if not res.wolfe_ok:
            state["mem"].clear()
            state["cg_dir"] = None
        if gnorm < opts.grad_tol:
            stop = "grad_tol"
            break
        if abs(state["f_prev"] - f_new) < opts.f_tol:
            stop = "f_tol"
            break
    return SolverResult(x=state["x"], trace=trace, stop_reason=stop, iterations=it)


def _two_loop(state, problem):
    """Standard two-loop recursion with the gamma = <s,y>/<y,y> seed."""
    x, g, mem = state["x"], state["g"], state["mem"]
    if not mem:
        return t_scale(g, -1.0)
    q = t_scale(g, -1.0)
    alphas = []
    for s, y, sy in reversed(mem):
        a = product_metric(x, s, q) / sy
        alphas.append(a)
        q = t_axpy(-a, y, q)
    s_last, y_last, sy_last = mem[-1]
    gamma = sy_last / product_metric(x, y_last, y_last)
    q = t_scale(q, gamma)
    for (s, y, sy), a in zip(mem, reversed(alphas)):
        b = product_metric(x, y, q) / sy
        q = t_axpy(a - b, s, q)
    return q


def lbfgs(problem, x0, opts=None):
    """Riemannian LBFGS with transported curvature pairs and Wolfe steps."""
    opts = opts or BatchOptions()

    def direction(state):
        return _two_loop(state, problem)

    def post_step(state, x_new, f_new, g_new, d, res):
        x = state["x"]
        step = t_scale(d, res.alpha)
        s = problem.transport(x, x_new, step)
        y = t_axpy(-1.0, problem.transport(x, x_new, state["g"]), g_new)
        moved = []
        for s_i, y_i, _ in state["mem"]:
            ts = problem.transport(x, x_new, s_i)
            ty = problem.transport(x, x_new, y_i)
            moved.append((ts, ty, product_metric(x_new, ts, ty)))
        state["mem"] = [m for m in moved if m[2] > 0]
        sy = product_metric(x_new, s, y)
        s_norm = product_norm(x_new, s)
        y_norm = product_norm(x_new, y)
        if sy > CURVATURE_ADMIT_RTOL * s_norm * y_norm:
            state["mem"].append((s, y, sy))
            if len(state["mem"]) > opts.memory:
                state["mem"].pop(0)

    return _run_batch(problem, x0, opts, direction, post_step)


def cg(problem, x0, opts=None):
    """Riemannian nonlinear CG with the Polak-Ribiere+ coefficient, transported
    previous direction, and reset to steepest descent on non-descent."""
    opts = opts or BatchOptions()

    def direction(state):
        if state.get("cg_dir") is None:
            return t_scale(state["g"], -1.0)
        x = state["x"]
        g = state["g"]
        g_moved = state["cg_g_moved"]
        d_moved = state["cg_d_moved"]
        gg_prev = state["cg_gg_prev"]
        beta = max(0.0, (product_metric(x, g, g) - product_metric(x, g, g_moved)) / gg_prev)
        return t_axpy(beta, d_moved, t_scale(g, -1.0))

    def post_step(state, x_new, f_new, g_new, d, res):
        x = state["x"]
        state["cg_dir"] = d
        state["cg_d_moved"] = problem.transport(x, x_new, d)
        state["cg_g_moved"] = problem.transport(x, x_new, state["g"])
        state["cg_gg_prev"] = product_metric(x, state["g"], state["g"])

    return _run_batch(problem, x0, opts, direction, post_step)


# ---------------------------------------------------------------------------
# stochastic gradient descent


@dataclass
class SgdSchedule:
    """Step-size schedule over the total update count.

    exponential_decay: geometric interpolation from ``start`` to ``end``.
    inv_sqrt_constant: constant c / sqrt(T) for horizon T updates.
    lipschitz_capped:  min(1/L, c / (sigma sqrt(T))) with user-supplied L, sigma.
    """

    kind: str = "exponential_decay"
    start: float = 1.0
    end: float = 1e-3
    c: float = 1.0
    L: float = 1.0
    sigma: float = 1.0

    def steps(self, total):
        if total < 1:
            raise ValueError("schedule needs at least one update")
        if self.kind == "exponential_decay":
            if not self.start >= self.end > 0.0:
                raise ValueError("exponential_decay requires start >= end > 0")
            if total == 1:
                return np.array([self.start])
            ratio = (self.end / self.start) ** (1.0 / (total - 1))
            return self.start * ratio ** np.arange(total)
        if self.kind == "inv_sqrt_constant":
            return np.full(total, self.c / np.sqrt(total))
        if self.kind == "lipschitz_capped":
            eta = min(1.0 / self.L, self.c / (self.sigma * np.sqrt(total)))
            return np.full(total, eta)
        raise ValueError(f"unknown schedule kind {self.kind!r}")


@dataclass
class SgdOptions:
    max_epochs: int = 20
    retraction: str = "euclidean"
    with_replacement: bool = False
    record_every: Optional[int] = None  # updates between full-objective records
    store_iterates: bool = False
    monitor: Optional[Callable] = None  # called with (update_index, params)
    max_halvings: int = 30
    seed: int = 0


def sgd(problem, x0, schedule, batch_size, opts=None):
    """Riemannian SGD: x <- R_x(-eta_t * ghat / n) with ghat the unbiased
    full-gradient estimate, so the update matches per-sample gradient dynamics.

    Batches are sampled without replacement within each epoch by default.
    Euclidean retraction failures trigger step halving for that update.
    """
    opts = opts or SgdOptions()
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    n = problem.n
    counting = _Counting(problem)
    trace = ConvergenceTrace()
    rng = np.random.default_rng(opts.seed)
    batches_per_epoch = int(np.ceil(n / batch_size))
    total = opts.max_epochs * batches_per_epoch
    etas = schedule.steps(total)
    t0 = time.perf_counter()
    x = x0
    f = counting.value(x)
    g = counting.grad(x)
    trace.append(counting.evals, f, product_norm(x, g), time.perf_counter() - t0)
    iterates = [x] if opts.store_iterates else None
    update = 0
    for epoch in range(opts.max_epochs):
        if opts.with_replacement:
            order = rng.integers(0, n, size=batches_per_epoch * batch_size)
        else:
            order = rng.permutation(n)
        for b in range(batches_per_epoch):
            idx = order[b * batch_size:(b + 1) * batch_size]
            if idx.size == 0:
                continue
            ghat = counting.stochastic_grad(x, idx)
            step = t_scale(ghat, -etas[update] / n)
            halvings = 0
            while True:
                try:
                    x = problem.retract(x, step, kind=opts.retraction)
                    break
                except RetractionFailure:
                    halvings += 1
                    if halvings > opts.max_halvings:
                        raise NumericError(
                            f"SGD update {update}: retraction still failing "
                            f"after {opts.max_halvings} step halvings")
                    step = t_scale(step, 0.5)
            update += 1
            if opts.monitor is not None:
                opts.monitor(update, x)
            if opts.store_iterates:
                iterates.append(x)
            if opts.record_every and update % opts.record_every == 0:
                f = counting.value(x)
                g = counting.grad(x)
                trace.append(counting.evals, f, product_norm(x, g),
                             time.perf_counter() - t0)
        if not opts.record_every:
            f = counting.value(x)
            g = counting.grad(x)
            trace.append(counting.evals, f, product_norm(x, g),
                         time.perf_counter() - t0)
    if opts.record_every and update % opts.record_every != 0:
        f = counting.value(x)
        g = counting.grad(x)
        trace.append(counting.evals, f, product_norm(x, g),
                     time.perf_counter() - t0)
    result = SolverResult(x=x, trace=trace, stop_reason="max_epochs",
                          iterations=update)
    result.iterates = iterates
    result.etas = etas[:update]
    return result


def sgd_randomized_output(iterates, etas, L, seed=0):
    """Randomized stopping: return iterate t with probability proportional to
    2 eta_t - L eta_t^2."""
    etas = np.asarray(etas, dtype=float)
    if len(iterates) != etas.size:
        raise ValueError("one step size per stored iterate required")
    mass = 2.0 * etas - L * etas**2
    if np.any(mass <= 0.0):
        raise ValueError("all probabilities 2*eta - L*eta^2 must be positive")
    p = mass / mass.sum()
    rng = np.random.default_rng(seed)
    return iterates[int(rng.choice(etas.size, p=p))]


# ---------------------------------------------------------------------------
# compact-set monitor for SGD iterates


@dataclass
class DataStats:
    n: int
    max_row_norm_sq: float  # max_i of the squared augmented-row norm


@dataclass
class BoundReport:
    lower_bound: float
    upper_bound: float
    min_eigs: np.ndarray
    max_eigs: np.ndarray
    lower_ok: np.ndarray
    upper_ok: np.ndarray

    @property
    def ok(self):
        return bool(np.all(self.lower_ok) and np.all(self.upper_ok))


def compactness_bounds(cfg, stats):
    """Eigenvalue corridor for SGD iterates of the penalized objective.

    Lower: lambda_min(Psi) * beta / (n + rho).
    Upper: max over w in [0, 1] of (w n M + beta ||Psi||) / (w n + rho) with
    M the largest squared augmented-row norm; the ratio is monotone in w, so
    only the endpoints matter.
    """
    psi_eigs = np.linalg.eigvalsh(cfg.Psi)
    lower = float(psi_eigs[0] * cfg.beta / (stats.n + cfg.rho))
    psi_norm = float(psi_eigs[-1])
    at_one = (stats.n * stats.max_row_norm_sq + cfg.beta * psi_norm) / (stats.n + cfg.rho)
    at_zero = cfg.beta * psi_norm / cfg.rho if cfg.rho > 0 else at_one
    return lower, float(max(at_one, at_zero))


def iterate_bound_monitor(params, cfg, stats, slack=1e-9):
    """Check every component's extreme eigenvalues against the corridor."""
    lower, upper = compactness_bounds(cfg, stats)
    min_eigs = np.array([np.linalg.eigvalsh(c)[0] for c in params.components])
    max_eigs = np.array([np.linalg.eigvalsh(c)[-1] for c in params.components])
    return BoundReport(
        lower_bound=lower,
        upper_bound=upper,
        min_eigs=min_eigs,
        max_eigs=max_eigs,
        lower_ok=min_eigs >= lower - slack,
        upper_ok=max_eigs <= upper + slack,
    )
