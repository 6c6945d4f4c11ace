"""Command-line interface.

Subcommands mirror the analysis workflow: ``fit`` for parameter estimates,
``characterize`` for lifetime-characteristic tables, ``bootstrap`` for a
single BCa interval, ``sensitivity`` for influence diagnostics across the
tuning grid, and ``simulate`` for Monte Carlo MSE/coverage studies.  Every
number printed is also available as a structured JSON document via
``--out``; identical invocations produce byte-identical documents.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__
from . import characteristics as chars
from .bootstrap import BcaResult, BootstrapConfig, bca_interval
from .errors import (
    DatasetFormatError,
    DegenerateDataError,
    IllPosedError,
    NonConvergenceError,
    StepStressError,
)
from .estimation import fit, param_confidence_interval
from .io import load_dataset, load_scenario, save_report
from .robustness import sensitivity_curve
from .simulation import run_coverage_study, run_mse_study

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARSE = 2
EXIT_ILL_POSED = 3
EXIT_NO_CONVERGENCE = 4

_DEFAULT_BETAS = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)


def _add_data_options(p: argparse.ArgumentParser):
    p.add_argument("data", help="dataset file (see bundled examples for the format)")
    p.add_argument("--time-scale", type=float, default=1.0,
                   help="multiply all parsed times by this factor (default 1)")
    p.add_argument("--normalize-stress", dest="normalize_stress", action="store_true",
                   default=True, help="normalize Arrhenius stresses to map the top "
                   "temperature to 1 (default on; only used with a 'temperatures' header)")
    p.add_argument("--no-normalize-stress", dest="normalize_stress", action="store_false")


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--beta", type=float, action="append", default=None,
                   help="tuning parameter; repeatable (default 0 0.2 ... 1)")
    p.add_argument("--level", type=float, default=0.95, help="confidence level (default 0.95)")
    p.add_argument("--out", default=None, help="also write a JSON report to this path")


def _betas(args) -> tuple[float, ...]:
    return tuple(args.beta) if args.beta else _DEFAULT_BETAS


def _print(line: str = ""):
    sys.stdout.write(line + "\n")


def _interval(iv) -> str:
    return f"[{iv[0]:10.4f}, {iv[1]:10.4f}]"


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_fit(args) -> int:
    design, data = load_dataset(args.data, args.time_scale, args.normalize_stress)
    report = {"command": "fit", "n_units": data.n_units, "level": args.level, "fits": []}
    for beta in _betas(args):
        res = fit(data, design, beta)
        if not res.converged:
            raise NonConvergenceError(
                f"fit at beta={beta} did not converge (|grad|={res.gradient_norm:.2e})"
            )
        ci = param_confidence_interval(res, args.level)
        se = res.std_errors()
        _print(f"beta = {beta:g}   loss = {res.loss:.6e}   |gradient| = {res.gradient_norm:.2e}")
        _print(f"  {'param':>8s} {'estimate':>12s} {'std.err':>12s} "
               f"{'lower':>12s} {'upper':>12s}")
        names = [f"a_{i}{j + 1}" for j in range(design.num_risks) for i in (0, 1)]
        for k, name in enumerate(names):
            _print(f"  {name:>8s} {res.params_hat.a[k]:12.6f} {se[k]:12.6f} "
                   f"{ci[k, 0]:12.6f} {ci[k, 1]:12.6f}")
        _print("  asymptotic covariance (sqrt(N)-normalized):")
        for row in res.covariance:
            _print("    " + " ".join(f"{v:12.5e}" for v in row))
        _print()
        report["fits"].append({
            "beta": beta,
            "estimate": res.params_hat.a.tolist(),
            "std_errors": se.tolist(),
            "ci_lower": ci[:, 0].tolist(),
            "ci_upper": ci[:, 1].tolist(),
            "covariance": res.covariance.tolist(),
            "loss": res.loss,
            "gradient_norm": res.gradient_norm,
        })
    if args.out:
        save_report(report, args.out)
    return EXIT_OK


def _characteristic_rows(res, args, data, design, beta, do_boot):
    rows = []
    specs = [
        ("mttf", "MTTF", chars.mttf(res, args.level), "mttf"),
        ("reliability", f"Reliability(t0={args.t0:g})",
         chars.reliability(res, args.t0, args.level), ("reliability", args.t0)),
        ("quantile", f"Quantile(alpha0={args.alpha0:g})",
         chars.quantile(res, args.alpha0, args.level), ("quantile", args.alpha0)),
    ]
    for kind, label, est, target in specs:
        boot = None
        if do_boot:
            cfg = BootstrapConfig(B=args.B, seed=args.seed, level=args.level, target=target,
                                  n_jobs=args.jobs)
            boot = bca_interval(data, design, beta, cfg, fit0=res)
        rows.append((kind, label, est, boot))
    return rows


def _cmd_characterize(args) -> int:
    design, data = load_dataset(args.data, args.time_scale, args.normalize_stress)
    do_boot = args.B > 0
    report = {
        "command": "characterize",
        "n_units": data.n_units,
        "level": args.level,
        "t0": args.t0,
        "alpha0": args.alpha0,
        "B": args.B,
        "seed": args.seed,
        "blocks": [],
    }
    header = f"  {'beta':>5s} {'estimate':>10s} {'direct CI':>26s} {'transformed CI':>26s}"
    if do_boot:
        header += f" {'bootstrap CI':>26s}"
    by_kind: dict[str, list[str]] = {}
    for beta in _betas(args):
        res = fit(data, design, beta)
        if not res.converged:
            raise NonConvergenceError(f"fit at beta={beta} did not converge")
        for kind, label, est, boot in _characteristic_rows(res, args, data, design, beta, do_boot):
            line = (f"  {beta:5.2f} {est.value:10.4f} {_interval(est.ci_direct):>26s} "
                    f"{_interval(est.ci_transformed):>26s}")
            entry = {
                "beta": beta,
                "kind": kind,
                "estimate": est.value,
                "std_error": est.std_error,
                "ci_direct": list(est.ci_direct),
                "ci_transformed": list(est.ci_transformed),
            }
            if boot is not None:
                line += f" {_interval(boot.interval):>26s}"
                entry["ci_bootstrap"] = list(boot.interval)
                entry["bootstrap_degenerate_bias"] = boot.degenerate_bias
            by_kind.setdefault(label, []).append(line)
            report["blocks"].append(entry)
    for label, lines in by_kind.items():
        _print(label)
        _print(header)
        for line in lines:
            _print(line)
        _print()
    if args.out:
        save_report(report, args.out)
    return EXIT_OK


def _parse_target(args):
    t = args.target
    if t == "mttf":
        return "mttf"
    if t == "reliability":
        return ("reliability", args.t0)
    if t == "quantile":
        return ("quantile", args.alpha0)
    if t.startswith("param:"):
        return ("param", int(t.split(":", 1)[1]))
    raise DatasetFormatError(f"unknown bootstrap target {t!r}")


def _cmd_bootstrap(args) -> int:
    design, data = load_dataset(args.data, args.time_scale, args.normalize_stress)
    beta = args.beta[0] if args.beta else 0.0
    cfg = BootstrapConfig(B=args.B, seed=args.seed, level=args.level,
                          target=_parse_target(args), n_jobs=args.jobs)
    res: BcaResult = bca_interval(data, design, beta, cfg)
    _print(f"target = {args.target}   beta = {beta:g}   B = {args.B}   seed = {args.seed}")
    _print(f"estimate        = {res.estimate:.6f}")
    _print(f"BCa interval    = {_interval(res.interval)}")
    _print(f"bias correction = {res.bias_correction:.6f}")
    _print(f"acceleration    = {res.acceleration:.6f}")
    if res.degenerate_bias:
        _print("warning: bias correction degenerate; plain percentile interval reported")
    if args.out:
        save_report({
            "command": "bootstrap",
            "target": args.target,
            "beta": beta,
            "B": args.B,
            "seed": args.seed,
            "level": args.level,
            "estimate": res.estimate,
            "interval": list(res.interval),
            "bias_correction": res.bias_correction,
            "acceleration": res.acceleration,
            "degenerate_bias": res.degenerate_bias,
        }, args.out)
    return EXIT_OK


def _cmd_sensitivity(args) -> int:
    scenario = load_scenario(args.scenario)
    betas = _betas(args)
    curve = sensitivity_curve(scenario.true_params, scenario.design, betas, args.kind)
    _print(f"kind = {args.kind}")
    _print(f"  {'beta':>6s} {'sensitivity':>14s}")
    for b, v in zip(curve.betas, curve.values):
        _print(f"  {b:6.2f} {v:14.6f}")
    if args.out:
        save_report({
            "command": "sensitivity",
            "kind": args.kind,
            "betas": curve.betas.tolist(),
            "values": curve.values.tolist(),
        }, args.out)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    overrides = {}
    if args.reps is not None:
        overrides["replications"] = args.reps
    if args.fast:
        overrides["replications"] = 50
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.beta:
        overrides["betas"] = tuple(args.beta)
    if overrides:
        from dataclasses import replace
        scenario = replace(scenario, **overrides)

    report = {"command": "simulate", "study": args.study,
              "replications": scenario.replications, "epsilon": scenario.contamination_fraction,
              "seed": scenario.seed}
    if args.study == "mse":
        res = run_mse_study(scenario, n_jobs=args.jobs)
        _print(f"MSE study: eps = {res.epsilon:g}, replications = {scenario.replications}")
        dim = scenario.true_params.a.size
        names = [f"a_{i}{j + 1}" for j in range(dim // 2) for i in (0, 1)]
        _print(f"  {'beta':>5s} " + " ".join(f"{n:>12s}" for n in names)
               + f" {'MTTF':>12s} {'reliab.':>12s} {'quantile':>12s} {'failed':>7s}")
        for bi, b in enumerate(res.betas):
            _print(f"  {b:5.2f} "
                   + " ".join(f"{v:12.6f}" for v in res.mse_params[bi])
                   + f" {res.mse_mttf[bi]:12.4f} {res.mse_reliability[bi]:12.6f}"
                   + f" {res.mse_quantile[bi]:12.4f} {res.n_failed[bi]:7d}")
        report["result"] = res.to_dict()
    else:
        characteristic = ("mttf" if args.characteristic == "mttf"
                          else (args.characteristic,
                                args.t0 if args.characteristic == "reliability" else args.alpha0))
        methods = tuple(args.methods)
        res = run_coverage_study(scenario, characteristic, methods, B=args.B, n_jobs=args.jobs)
        _print(f"coverage study: eps = {res.epsilon:g}, target = {res.characteristic}, "
               f"true value = {res.true_value:.4f}, replications = {scenario.replications}")
        _print(f"  {'beta':>5s} " + " ".join(f"{m + ' cov':>12s} {m + ' width':>12s}"
                                             for m in methods) + f" {'failed':>7s}")
        for bi, b in enumerate(res.betas):
            cells = " ".join(
                f"{res.coverage[bi, mi]:12.3f} {res.mean_width[bi, mi]:12.3f}"
                for mi in range(len(methods))
            )
            _print(f"  {b:5.2f} {cells} {res.n_failed[bi]:7d}")
        report["result"] = res.to_dict()
    if args.out:
        save_report(report, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="stepstress",
        description="Robust inference for interval-monitored step-stress tests "
                    "with exponential competing risks.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="estimate model parameters over a beta grid")
    _add_data_options(f)
    _add_common(f)
    f.set_defaults(func=_cmd_fit)

    c = sub.add_parser("characterize", help="lifetime characteristics with CI triple")
    _add_data_options(c)
    _add_common(c)
    c.add_argument("--t0", type=float, default=4.0, help="mission time (default 4)")
    c.add_argument("--alpha0", type=float, default=0.5, help="quantile level (default 0.5)")
    c.add_argument("--B", type=int, default=1000,
                   help="bootstrap replicates; 0 disables the bootstrap column")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--jobs", type=int, default=1)
    c.set_defaults(func=_cmd_characterize)

    b = sub.add_parser("bootstrap", help="one BCa interval for a chosen target")
    _add_data_options(b)
    _add_common(b)
    b.add_argument("--target", default="mttf",
                   help="mttf | reliability | quantile | param:INDEX")
    b.add_argument("--t0", type=float, default=4.0)
    b.add_argument("--alpha0", type=float, default=0.5)
    b.add_argument("--B", type=int, default=1000)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--jobs", type=int, default=1)
    b.set_defaults(func=_cmd_bootstrap)

    s = sub.add_parser("sensitivity", help="influence sensitivity across the tuning grid")
    s.add_argument("scenario", help="scenario file providing the design and parameters")
    _add_common(s)
    s.add_argument("--kind", choices=("self_standardized", "gross_error"),
                   default="self_standardized")
    s.set_defaults(func=_cmd_sensitivity)

    m = sub.add_parser("simulate", help="Monte Carlo MSE or coverage study")
    m.add_argument("scenario", help="scenario file")
    _add_common(m)
    m.add_argument("--study", choices=("mse", "coverage"), default="mse")
    m.add_argument("--characteristic", choices=("mttf", "reliability", "quantile"),
                   default="mttf")
    m.add_argument("--methods", nargs="+", default=("direct", "transformed"),
                   choices=("direct", "transformed", "bca"))
    m.add_argument("--t0", type=float, default=50.0)
    m.add_argument("--alpha0", type=float, default=0.5)
    m.add_argument("--B", type=int, default=1000)
    m.add_argument("--reps", type=int, default=None, help="override scenario replications")
    m.add_argument("--fast", action="store_true", help="50-replication profile")
    m.add_argument("--seed", type=int, default=None, help="override scenario seed")
    m.add_argument("--jobs", type=int, default=1)
    m.set_defaults(func=_cmd_simulate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DatasetFormatError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_PARSE
    except (IllPosedError, DegenerateDataError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_ILL_POSED
    except NonConvergenceError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_NO_CONVERGENCE
    except (StepStressError, OSError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
