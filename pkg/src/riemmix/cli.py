"""Command-line surface: fit, compare, gen, selftest.

Configuration is a single flat JSON document with kebab-case keys; CLI flags
override file values.  Output files are written atomically (temp + rename).
Trace CSVs use the stable schema ``evals,objective,grad_norm,wall_ms``; the
wall column is written as 0.0 unless real timing is requested, so that runs
repeated with the same config and seed are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

# honor the thread cap before numpy initializes its pools
_threads = os.environ.get("RIEMMIX_THREADS")
if _threads:
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, _threads)

import numpy as np

from . import __version__
from .data import (
    RNG_IDENTITY,
    Dataset,
    kmeanspp_init,
    load_csv,
    random_separated_mixture,
    sample_gmm,
)
from .errors import NumericError
from .fitting import SOLVERS, FitResult, fit_gmm
from .objective import (
    MixtureEstimate,
    default_penalty_config,
    raw_penalty_config,
    zero_penalty,
)
from .optim import BatchOptions, SgdOptions, SgdSchedule

EXIT_OK = 0
EXIT_SELFTEST = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_PARTIAL = 4

DEFAULT_CONFIG = {
    "solver": "lbfgs",
    "k": 1,
    "seed": 0,
    "max-iters": 1000,
    "max-epochs": 20,
    "batch-size": None,        # defaults to the data dimension
    "retraction": None,        # exp for batch, euclidean for sgd
    "grad-tol": 1e-6,
    "f-tol": 1e-6,
    "kappa": 2.0,
    "beta": 1.0,
    "nu": None,
    "zeta": 1.0,
    "lambda-scale": 0.01,
    "penalty-mode": "derived",  # or "raw" or "off"
    "raw-rho": 0.01,
    "raw-kappa": 0.01,
    "raw-alpha": 1.0,
    "raw-beta": 1.0,
    "init-candidates": 30,
    "timing": "zero",           # "zero" keeps trace files deterministic
}


class ConfigError(Exception):
    pass


def _atomic_write(path, text):
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _trace_csv(trace, timing):
    lines = ["evals,objective,grad_norm,wall_ms"]
    for r in trace.records:
        wall = float(r.wall_s) * 1000.0 if timing == "real" else 0.0
        lines.append(f"{float(r.evals)!r},{float(r.objective)!r},"
                     f"{float(r.grad_norm)!r},{wall!r}")
    return "\n".join(lines) + "\n"


def _mixture_to_json(est):
    return {
        "weights": est.weights.tolist(),
        "means": est.means.tolist(),
        "covariances": est.covariances.tolist(),
    }


def _mixture_from_json(obj):
    return MixtureEstimate(
        weights=np.array(obj["weights"], dtype=float),
        means=np.array(obj["means"], dtype=float),
        covariances=np.array(obj["covariances"], dtype=float),
    )


def _data_csv(rows):
    lines = [",".join(repr(float(v)) for v in row) for row in rows]
    return "\n".join(lines) + ("\n" if lines else "")


def _load_config(args):
    cfg = dict(DEFAULT_CONFIG)
    if getattr(args, "config", None):
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}")
        unknown = set(loaded) - set(DEFAULT_CONFIG) - {"data", "out"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    for key in ("solver", "k", "seed", "batch_size", "max_epochs",
                "retraction", "timing", "init_candidates"):
        flag = getattr(args, key, None)
        if flag is not None:
            cfg[key.replace("_", "-")] = flag
    return cfg


def _penalty_for(cfg, data):
    mode = cfg["penalty-mode"]
    if mode == "off":
        return zero_penalty(data.shape[1])
    if mode == "raw":
        d = data.shape[1]
        n = data.shape[0]
        mean = data.mean(axis=0)
        cov = np.atleast_2d(np.cov(data, rowvar=False, bias=True)) if n > 1 \
            else np.eye(d)
        cov = cov + 1e-10 * (np.trace(cov) / d + 1.0) * np.eye(d)
        return raw_penalty_config(
            rho=cfg["raw-rho"], kappa=cfg["raw-kappa"],
            alpha_w=cfg["raw-alpha"], beta=cfg["raw-beta"],
            Lambda=cfg["lambda-scale"] * cov, lambda_vec=mean,
            zeta=cfg["zeta"])
    if mode == "derived":
        return default_penalty_config(
            data, kappa=cfg["kappa"], beta=cfg["beta"], nu=cfg["nu"],
            zeta=cfg["zeta"], lambda_scale=cfg["lambda-scale"])
    raise ConfigError(f"unknown penalty-mode {mode!r}")


def _run_one(data, run_cfg, solver, init):
    d = data.shape[1]
    pen = _penalty_for(run_cfg, data)
    batch_opts = BatchOptions(
        max_iters=run_cfg["max-iters"], grad_tol=run_cfg["grad-tol"],
        f_tol=run_cfg["f-tol"],
        retraction=run_cfg["retraction"] or "exp")
    sgd_opts = SgdOptions(
        max_epochs=run_cfg["max-epochs"],
        retraction=run_cfg["retraction"] or "euclidean",
        seed=run_cfg["seed"])
    return fit_gmm(
        data, run_cfg["k"], solver=solver, cfg=pen, seed=run_cfg["seed"],
        init=init, batch_opts=batch_opts, sgd_opts=sgd_opts,
        batch_size=run_cfg["batch-size"] or d,
        init_candidates=run_cfg["init-candidates"])


def _report(result: FitResult, run_cfg, elapsed):
    return {
        "solver": result.solver,
        "objective": result.objective,
        "estimate": _mixture_to_json(result.estimate),
        "stop-reason": result.stop_reason,
        "trace-length": len(result.trace),
        "config": run_cfg,
        "timings": {"total-s": elapsed},
        "library-version": __version__,
        "rng": RNG_IDENTITY,
    }


def cmd_fit(args):
    run_cfg = _load_config(args)
    if run_cfg["solver"] not in SOLVERS:
        raise ConfigError(
            f"unknown solver {run_cfg['solver']!r}; valid solvers: "
            f"{', '.join(SOLVERS)}")
    dataset = load_csv(args.data)
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    t0 = time.perf_counter()
    result = _run_one(dataset.rows, run_cfg, run_cfg["solver"], init=None)
    elapsed = time.perf_counter() - t0
    _atomic_write(os.path.join(out, "trace.csv"),
                  _trace_csv(result.trace, run_cfg["timing"]))
    report = _report(result, run_cfg, elapsed)
    # reports carry the maximization-sign log-likelihood
    _atomic_write(os.path.join(out, "report.json"),
                  json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(f"fit {run_cfg['solver']}: objective {result.objective:.6f}, "
          f"stopped on {result.stop_reason}")
    return EXIT_OK


def cmd_compare(args):
    run_cfg = _load_config(args)
    solvers = [s.strip() for s in args.solvers.split(",") if s.strip()]
    if len(solvers) < 2:
        raise ConfigError("compare needs at least two solvers")
    for s in solvers:
        if s not in SOLVERS:
            raise ConfigError(f"unknown solver {s!r}; valid: {', '.join(SOLVERS)}")
    dataset = load_csv(args.data)
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    pen = _penalty_for(run_cfg, dataset.rows)
    init = kmeanspp_init(dataset.rows, run_cfg["k"],
                         candidates=run_cfg["init-candidates"],
                         seed=run_cfg["seed"], cfg=pen)
    results = {}
    failures = {}
    for s in solvers:
        try:
            results[s] = _run_one(dataset.rows, run_cfg, s, init=init)
        except (NumericError, ValueError) as exc:
            failures[s] = str(exc)
    if results:
        best = min(r.trace.objectives.min() for r in results.values())
        lines = ["solver,evals,gap"]
        for s, r in results.items():
            running = np.minimum.accumulate(r.trace.objectives)
            for ev, obj in zip(r.trace.evals, running):
                lines.append(f"{s},{float(ev)!r},{float(obj - best)!r}")
        _atomic_write(os.path.join(out, "compare.csv"), "\n".join(lines) + "\n")
    for s, r in results.items():
        print(f"{s}: best objective {-r.trace.objectives.min():.6f} "
              f"({r.stop_reason})")
    for s, msg in failures.items():
        print(f"{s}: FAILED ({msg})", file=sys.stderr)
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_gen(args):
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    if args.truth:
        with open(args.truth, "r", encoding="utf-8") as fh:
            truth = _mixture_from_json(json.load(fh))
    else:
        truth = random_separated_mixture(args.k, args.d, args.seed,
                                         separation=args.separation)
    dataset = sample_gmm(truth, args.n, args.seed)
    _atomic_write(os.path.join(out, "data.csv"), _data_csv(dataset.rows))
    sidecar = {
        "truth": _mixture_to_json(truth),
        "seed": args.seed,
        "n": args.n,
        "rng": RNG_IDENTITY,
        "library-version": __version__,
    }
    _atomic_write(os.path.join(out, "truth.json"),
                  json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    print(f"gen: wrote {args.n} rows (d={truth.d}, K={truth.n_components}) to {out}")
    return EXIT_OK


def cmd_selftest(args):
    from .selftest import run_selftest
    ok = run_selftest(perturb_gradient=getattr(args, "perturb_gradient", False))
    return EXIT_OK if ok else EXIT_SELFTEST


def build_parser():
    parser = argparse.ArgumentParser(
        prog="riemmix",
        description="Gaussian mixture fitting by Riemannian optimization")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat JSON config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", help="output directory")
        p.add_argument("--k", type=int, default=None)
        p.add_argument("--batch-size", type=int, default=None)
        p.add_argument("--max-epochs", type=int, default=None)
        p.add_argument("--retraction", choices=("exp", "euclidean"), default=None)
        p.add_argument("--init-candidates", type=int, default=None)
        p.add_argument("--timing", choices=("zero", "real"), default=None)

    p_fit = sub.add_parser("fit", help="fit one mixture with one solver")
    common(p_fit)
    p_fit.add_argument("--data", required=True, help="CSV dataset path")
    p_fit.add_argument("--solver", default=None)
    p_fit.set_defaults(func=cmd_fit)

    p_cmp = sub.add_parser("compare", help="run several solvers from a shared init")
    common(p_cmp)
    p_cmp.add_argument("--data", required=True)
    p_cmp.add_argument("--solvers", required=True,
                       help="comma-separated solver names")
    p_cmp.set_defaults(func=cmd_compare)

    p_gen = sub.add_parser("gen", help="generate synthetic mixture data")
    p_gen.add_argument("--out", help="output directory")
    p_gen.add_argument("--truth", help="JSON mixture file; otherwise random")
    p_gen.add_argument("--k", type=int, default=2)
    p_gen.add_argument("--d", type=int, default=2)
    p_gen.add_argument("--n", type=int, required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--separation", type=float, default=5.0)
    p_gen.set_defaults(func=cmd_gen)

    p_self = sub.add_parser("selftest", help="run the fast property suite")
    p_self.add_argument("--perturb-gradient", action="store_true",
                        help="test hook: corrupt the gradient to force a failure")
    p_self.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
