"""Command-line front end.

Subcommands mirror the experiment drivers: ``probe``, ``rate``,
``lowerbound``, ``regret``, and ``check``.  Every flag can also come from a
JSON config file (``--config``); explicit flags win.  Exit code 0 iff all
assertions of the invoked experiment pass.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .checks import run_checks
from .config import ConfigError, ExperimentConfig
from .experiments import (
    lower_bound_experiment,
    probe_experiment,
    rate_experiment,
    regret_experiment,
)


def _int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.replace(",", " ").split()]


def _float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.replace(",", " ").split()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zograd",
        description="Biased noisy gradient oracles: estimator probes, rate and regret "
        "experiments, and minimax floor checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config file; explicit flags override it")
        p.add_argument("--seed", type=int, default=None, help="master seed")
        p.add_argument("--out", default=None, help="CSV output path (JSON summary sits next to it)")
        p.add_argument("--workers", type=int, default=None)

    p_probe = sub.add_parser("probe", help="bias/variance probe of one oracle over a delta grid")
    common(p_probe)
    p_probe.add_argument("--oracle", default=None, help="oracle spec, e.g. 'one-point,fn=quadratic,sigma=1.0'")
    p_probe.add_argument("--delta-grid", type=_float_list, default=None, metavar="LIST")
    p_probe.add_argument("--reps", type=int, default=None)

    p_rate = sub.add_parser("rate", help="optimization-error rate fit over a horizon grid")
    common(p_rate)
    p_rate.add_argument("--class", dest="problem_class", choices=("convex", "sc"), default=None)
    p_rate.add_argument("--estimator", choices=("one-point", "smoothing", "spsa", "rdsa", "sf", "exact"), default=None)
    p_rate.add_argument("--noise", choices=("controlled", "uncontrolled"), default=None)
    p_rate.add_argument("--sigma", type=float, default=None)
    p_rate.add_argument("--horizons", type=_int_list, default=None, metavar="LIST")
    p_rate.add_argument("--reps", type=int, default=None)
    p_rate.add_argument("--tol", type=float, default=None)

    p_lb = sub.add_parser("lowerbound", help="hard-pair floor experiment")
    common(p_lb)
    p_lb.add_argument("--class", dest="problem_class", choices=("convex", "sc"), default=None)
    p_lb.add_argument("--p", type=float, default=None)
    p_lb.add_argument("--q", type=float, default=None)
    p_lb.add_argument("--c1", type=float, default=None)
    p_lb.add_argument("--c2", type=float, default=None)
    p_lb.add_argument("--n", type=int, default=None)
    p_lb.add_argument("--reps", type=int, default=None)

    p_regret = sub.add_parser("regret", help="cumulative-regret rate fit")
    common(p_regret)
    p_regret.add_argument("--class", dest="problem_class", choices=("convex", "sc"), default=None)
    p_regret.add_argument("--p", type=float, default=None)
    p_regret.add_argument("--q", type=float, default=None)
    p_regret.add_argument("--estimator", choices=("one-point", "smoothing", "spsa", "rdsa", "sf"), default=None)
    p_regret.add_argument("--sigma", type=float, default=None)
    p_regret.add_argument("--horizons", type=_int_list, default=None, metavar="LIST")
    p_regret.add_argument("--reps", type=int, default=None)
    p_regret.add_argument("--tol", type=float, default=None)

    sub.add_parser("check", help="run the full property suite; exit 0 iff all pass")
    return parser


def _load_config(args: argparse.Namespace, experiment: str) -> ExperimentConfig:
    if getattr(args, "config", None):
        cfg = ExperimentConfig.from_json_file(args.config)
        cfg = cfg.with_overrides(experiment=experiment)
    else:
        cfg = ExperimentConfig(experiment=experiment)
    overrides = {
        "master_seed": getattr(args, "seed", None),
        "out": getattr(args, "out", None),
        "workers": getattr(args, "workers", None),
        "problem_class": getattr(args, "problem_class", None),
        "estimator": getattr(args, "estimator", None),
        "noise": getattr(args, "noise", None),
        "sigma": getattr(args, "sigma", None),
        "replications": getattr(args, "reps", None),
        "tolerance": getattr(args, "tol", None),
        "oracle_spec": getattr(args, "oracle", None),
        "p": getattr(args, "p", None),
        "q": getattr(args, "q", None),
        "c1": getattr(args, "c1", None),
        "c2": getattr(args, "c2", None),
        "n": getattr(args, "n", None),
    }
    if getattr(args, "horizons", None):
        overrides["horizons"] = tuple(args.horizons)
    if getattr(args, "delta_grid", None):
        overrides["delta_grid"] = tuple(args.delta_grid)
    if getattr(args, "reps", None) and experiment == "probe":
        overrides["probe_reps"] = args.reps
    return cfg.with_overrides(**overrides)


def _pick_regret_estimator(cfg: ExperimentConfig) -> ExperimentConfig:
    """When (p, q) are given without an estimator, choose the matching cell."""
    if cfg.p is None or cfg.q is None:
        return cfg
    table = {(2.0, 2.0): "smoothing", (1.0, 2.0): "one-point"}
    est = table.get((float(cfg.p), float(cfg.q)))
    if est is None:
        raise ConfigError(f"p/q: no estimator cell for (p={cfg.p}, q={cfg.q})")
    return cfg.with_overrides(estimator=est)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "check":
            return run_checks()
        if args.command == "probe":
            cfg = _load_config(args, "probe")
            report = probe_experiment(cfg)
            print(f"{report.experiment_id}: envelopes {'OK' if report.passed else 'VIOLATED'}")
            for row in report.details["rows"]:
                print(
                    f"  delta={row['delta']:g} "
                    f"bias={row['bias']:.4g} (<= {row['c1_bound']:.4g} + 5se {5 * row['bias_se']:.2g}) "
                    f"var={row['var']:.4g} (<= 1.05*{row['c2_bound']:.4g} + 5se {5 * row['var_se']:.2g})"
                )
        elif args.command == "rate":
            cfg = _load_config(args, "rate")
            report = rate_experiment(cfg)
            fit = report.fit
            print(
                f"{report.experiment_id}: exponent {fit.exponent:.4f} "
                f"(target {report.target_exponent:.4f} +- {report.tolerance}), "
                f"r^2 {fit.r_squared:.4f} -> {'PASS' if report.passed else 'FAIL'}"
            )
        elif args.command == "lowerbound":
            cfg = _load_config(args, "lowerbound")
            report = lower_bound_experiment(cfg)
            d = report.details
            print(
                f"{report.experiment_id}: mean {d['mean_error']:.5g} + 3se "
                f"{d['mean_plus_3se']:.5g} vs floor {d['floor']:.5g} "
                f"(exact-oracle sanity {d['exact_oracle_error']:.2g}) -> "
                f"{'PASS' if report.passed else 'FAIL'}"
            )
        elif args.command == "regret":
            cfg = _pick_regret_estimator(_load_config(args, "regret"))
            report = regret_experiment(cfg)
            d = report.details
            print(
                f"{report.experiment_id}: regret growth exponent "
                f"{d['regret_growth_exponent']:.4f} (target {d['target_growth_exponent']:.4f} "
                f"+- {report.tolerance}) -> {'PASS' if report.passed else 'FAIL'}"
            )
        else:  # pragma: no cover
            raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
