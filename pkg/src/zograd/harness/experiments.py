"""Rate, regret, lower-bound, and probe experiments.

Every replication owns a counter-derived RNG stream keyed by
``(master_seed, horizon_index, replication)``, so results are bitwise
reproducible regardless of the worker count; aggregation always walks
replications in index order.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..adversarial import (
    EPS_CAP_CONVEX,
    AdversarialOracle,
    HardInstance,
    hard_pair,
    minimax_lower_bound,
    optimal_separation,
)
from ..core import OracleEnvelope, RngStream
from ..estimators import (
    EstimatorOracle,
    ExactGradientOracle,
    RDSA,
    SF,
    SPSA,
    SURFACE,
    UncontrolledNoise,
    additive_controlled,
)
from ..solver import (
    Regularizer,
    Schedule,
    optimization_rate_exponent,
    regret_rate_exponent,
    run,
    schedule_opt_convex,
    schedule_opt_sc,
    schedule_regret,
)
from ..testbed import (
    ObjectiveFunction,
    exp_one_d,
    kinked_quadratic,
    quadratic,
    softabs,
    strongly_convex_pair,
)
from .config import ConfigError, ExperimentConfig
from .fitting import RateFit, fit_rate
from .probes import probe_bias_variance

_SC_ALPHA_FLOOR = 4.0
_SCHEMES = {"spsa": SPSA, "rdsa": RDSA, "sf": SF, "surface": SURFACE}


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def default_function_spec(problem_class: str) -> dict:
    """The testbed where the predicted rates bind: a unit-curvature quadratic
    whose constrained minimizer sits on the boundary with a nonzero gradient,
    so the error is carried by the schedule's step/variance tradeoff rather
    than averaged away (an interior optimum makes averaging beat the convex
    rate).  The constant offset zeroes f at the optimum, which keeps
    single-evaluation noise symmetric at every tolerance."""
    return {"name": "quadratic", "a": [1.0], "b": [-2.0], "offset": 1.5,
            "lower": [0.0], "upper": [1.0]}


def build_function(spec: dict, problem_class: str = "convex") -> ObjectiveFunction:
    name = spec.get("name")
    if name == "auto":
        spec = default_function_spec(problem_class)
        name = spec["name"]
    domain = None
    if "lower" in spec or "upper" in spec:
        from ..core import Box

        domain = Box(np.asarray(spec["lower"], dtype=float), np.asarray(spec["upper"], dtype=float))
    if name == "quadratic":
        return quadratic(spec.get("a", [1.0]), spec.get("b"), domain, float(spec.get("offset", 0.0)))
    if name == "softabs":
        return softabs(int(spec.get("v", 1)), float(spec.get("eps", 0.1)), domain)
    if name == "sc_pair":
        return strongly_convex_pair(int(spec.get("v", 1)), float(spec.get("eps", 0.1)), domain)
    if name == "kinked":
        return kinked_quadratic(float(spec.get("a_neg", 0.5)), float(spec.get("a_pos", 1.5)), domain)
    if name == "exp":
        return exp_one_d(domain)
    raise ConfigError(f"function.name: unknown function {name!r}")


def build_estimator(cfg: ExperimentConfig, f: ObjectiveFunction):
    """Map the CLI estimator names onto (feedback, scheme) pairs:
    one-point -> one-point SPSA probes, smoothing -> surface sampling,
    spsa/rdsa/sf -> two-point with that perturbation law."""
    if cfg.estimator == "exact":
        return ExactGradientOracle(f)
    if cfg.estimator == "one-point":
        feedback, scheme = "one_point", SPSA
    elif cfg.estimator == "smoothing":
        feedback, scheme = "one_point", SURFACE
    else:
        feedback, scheme = "two_point", _SCHEMES[cfg.estimator]
    if cfg.noise == "controlled":
        if feedback != "two_point":
            raise ConfigError("noise: controlled noise requires a two-point estimator")
        noise = additive_controlled(f, cfg.sigma, slope=cfg.noise_slope)
    else:
        noise = UncontrolledNoise(cfg.sigma)
    return EstimatorOracle(target=f, scheme=scheme, noise=noise, feedback=feedback)


def sc_alpha(f: ObjectiveFunction) -> float:
    """Schedule bookkeeping scale for the strongly convex regime; must exceed
    2L/mu for the step-size accounting to be valid from t = 1."""
    return max(_SC_ALPHA_FLOOR, 3.0 * f.smoothness / f.strong_convexity)


def schedule_for(
    problem_class: str,
    env: OracleEnvelope,
    f: ObjectiveFunction,
    n: int,
    mode: str,
    reg: Regularizer,
) -> Schedule:
    D = reg.diameter(f.domain)
    if mode == "optimization":
        if problem_class == "convex":
            return schedule_opt_convex(
                env.p, env.q, env.c1, env.c2, D, 1.0, f.smoothness, n, env.oracle_type
            )
        return schedule_opt_sc(
            env.p, env.q, env.c1, env.c2, D, sc_alpha(f), f.strong_convexity, f.smoothness,
            n, env.oracle_type,
        )
    r_sup = f.domain.sup_norm()
    return schedule_regret(
        env.p, env.q, env.c1, env.c2, D, 1.0 if problem_class == "convex" else sc_alpha(f),
        f.smoothness, f.strong_convexity, n, env.oracle_type, r_sup,
        strongly_convex=(problem_class == "sc"),
    )


# ---------------------------------------------------------------------------
# Replication fan-out
# ---------------------------------------------------------------------------


def _one_replication(payload: tuple) -> tuple[float, Optional[float]]:
    cfg_dict, n, h_idx, rep, mode = payload
    cfg = ExperimentConfig.from_dict(cfg_dict)
    f = build_function(cfg.function, cfg.problem_class)
    oracle = build_estimator(cfg, f)
    schedule = schedule_for(cfg.problem_class, oracle.envelope, f, n, mode, Regularizer())
    rng = RngStream(cfg.master_seed, (h_idx << 20) | rep).generator()
    trace = run(
        oracle, schedule, n, f.domain, Regularizer(), rng=rng,
        mode="regret" if mode == "regret" else "optimization",
    )
    return float(trace.error), (None if trace.regret is None else float(trace.regret))


def _replicate(cfg: ExperimentConfig, n: int, h_idx: int, mode: str) -> list[tuple[float, Optional[float]]]:
    if cfg.workers <= 1:
        # inline path: share one oracle/schedule across replications
        f = build_function(cfg.function, cfg.problem_class)
        oracle = build_estimator(cfg, f)
        schedule = schedule_for(cfg.problem_class, oracle.envelope, f, n, mode, Regularizer())
        out = []
        for rep in range(cfg.replications):
            rng = RngStream(cfg.master_seed, (h_idx << 20) | rep).generator()
            trace = run(
                oracle, schedule, n, f.domain, Regularizer(), rng=rng,
                mode="regret" if mode == "regret" else "optimization",
            )
            out.append((float(trace.error), None if trace.regret is None else float(trace.regret)))
        return out
    payloads = [(cfg.to_dict(), n, h_idx, rep, mode) for rep in range(cfg.replications)]
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(_one_replication, payloads))


# ---------------------------------------------------------------------------
# Reports and persistence
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentReport:
    experiment_id: str
    fit: Optional[RateFit]
    target_exponent: Optional[float]
    tolerance: float
    passed: bool
    details: dict
    csv_path: Optional[str]
    json_path: Optional[str]


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return "" if value is None else str(value)


def write_rows(path: str | Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def read_rows(path: str | Path) -> list[dict]:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_summary(path: str | Path, payload: dict) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


_RUN_HEADER = ("experiment_id", "n", "replication", "error", "regret", "delta", "seed")


def _out_paths(cfg: ExperimentConfig, experiment_id: str) -> tuple[Optional[Path], Optional[Path]]:
    if cfg.out is None:
        return None, None
    csv_path = Path(cfg.out)
    return csv_path, csv_path.with_suffix(".json")


# ---------------------------------------------------------------------------
# Rate and regret experiments
# ---------------------------------------------------------------------------


def rate_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Fit the optimization-error exponent over the horizon grid and compare
    it with the envelope's predicted rate."""
    cfg.validate()
    f = build_function(cfg.function, cfg.problem_class)
    oracle = build_estimator(cfg, f)
    env = oracle.envelope
    experiment_id = f"rate-{cfg.problem_class}-{cfg.estimator}-{cfg.noise}"
    rows: list[tuple] = []
    means: list[float] = []
    ses: list[float] = []
    for h_idx, n in enumerate(cfg.horizons):
        schedule = schedule_for(cfg.problem_class, env, f, n, "optimization", Regularizer())
        results = _replicate(cfg, n, h_idx, "optimization")
        errors = np.array([max(e, 0.0) for e, _ in results])
        means.append(float(errors.mean()))
        ses.append(float(errors.std(ddof=1) / math.sqrt(len(errors))) if len(errors) > 1 else 0.0)
        for rep, (err, _) in enumerate(results):
            rows.append(
                (experiment_id, n, rep, err, None, schedule.delta, (h_idx << 20) | rep)
            )
    fit = fit_rate([(n, max(m, 1e-15)) for n, m in zip(cfg.horizons, means)])
    problem = "convex_smooth" if cfg.problem_class == "convex" else "strongly_convex"
    target = optimization_rate_exponent(problem, env.p, env.q)
    passed = abs(fit.exponent - target) <= cfg.tolerance
    csv_path, json_path = _out_paths(cfg, experiment_id)
    details = {
        "envelope": {"c1": env.c1, "p": env.p, "c2": env.c2, "q": env.q, "type": env.oracle_type},
        "per_horizon": [
            {"n": int(n), "mean_error": m, "se": s}
            for n, m, s in zip(cfg.horizons, means, ses)
        ],
        "r_squared": fit.r_squared,
    }
    if csv_path:
        write_rows(csv_path, _RUN_HEADER, rows)
        write_summary(json_path, _summary_payload(cfg, experiment_id, fit, target, passed, details))
    return ExperimentReport(
        experiment_id, fit, target, cfg.tolerance, passed, details,
        str(csv_path) if csv_path else None, str(json_path) if json_path else None,
    )


def regret_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Fit the per-round regret decay over the horizon grid; the cumulative
    regret growth exponent is 1 minus the fitted decay."""
    cfg.validate()
    f = build_function(cfg.function, cfg.problem_class)
    oracle = build_estimator(cfg, f)
    if not getattr(oracle, "unbiased", False):
        raise ConfigError("estimator: regret mode requires an unbiased oracle (E[Y] = x)")
    env = oracle.envelope
    if cfg.p is not None and cfg.p != env.p:
        raise ConfigError(f"p: estimator cell has p={env.p}, config asked for {cfg.p}")
    if cfg.q is not None and cfg.q != env.q:
        raise ConfigError(f"q: estimator cell has q={env.q}, config asked for {cfg.q}")
    experiment_id = f"regret-{cfg.problem_class}-{cfg.estimator}-{cfg.noise}"
    rows: list[tuple] = []
    means: list[float] = []
    for h_idx, n in enumerate(cfg.horizons):
        schedule = schedule_for(cfg.problem_class, env, f, n, "regret", Regularizer())
        results = _replicate(cfg, n, h_idx, "regret")
        per_round = np.array([r / max(n - 1, 1) for _, r in results])
        means.append(float(per_round.mean()))
        for rep, (err, reg_total) in enumerate(results):
            rows.append(
                (experiment_id, n, rep, err, reg_total, schedule.delta, (h_idx << 20) | rep)
            )
    fit = fit_rate([(n, max(m, 1e-15)) for n, m in zip(cfg.horizons, means)])
    problem = "convex_smooth" if cfg.problem_class == "convex" else "strongly_convex"
    target_decay = regret_rate_exponent(problem, env.p, env.q)
    passed = abs(fit.exponent - target_decay) <= cfg.tolerance
    csv_path, json_path = _out_paths(cfg, experiment_id)
    details = {
        "envelope": {"c1": env.c1, "p": env.p, "c2": env.c2, "q": env.q, "type": env.oracle_type},
        "per_horizon": [{"n": int(n), "mean_regret_per_round": m} for n, m in zip(cfg.horizons, means)],
        "regret_growth_exponent": 1.0 - fit.exponent,
        "target_growth_exponent": 1.0 - target_decay,
        "r_squared": fit.r_squared,
    }
    if csv_path:
        write_rows(csv_path, _RUN_HEADER, rows)
        write_summary(json_path, _summary_payload(cfg, experiment_id, fit, target_decay, passed, details))
    return ExperimentReport(
        experiment_id, fit, target_decay, cfg.tolerance, passed, details,
        str(csv_path) if csv_path else None, str(json_path) if json_path else None,
    )


def _summary_payload(cfg, experiment_id, fit, target, passed, details) -> dict:
    return {
        "experiment_id": experiment_id,
        "exponent": fit.exponent if fit else None,
        "intercept": fit.intercept if fit else None,
        "r_squared": fit.r_squared if fit else None,
        "target_exponent": target,
        "tolerance": cfg.tolerance,
        "passed": bool(passed),
        "config": cfg.to_dict(),
        "details": details,
    }


# ---------------------------------------------------------------------------
# Lower-bound floor experiment
# ---------------------------------------------------------------------------


def _lowerbound_task(payload: tuple) -> float:
    cfg_dict, v_idx, rep = payload
    cfg = ExperimentConfig.from_dict(cfg_dict)
    inst = _lowerbound_pair(cfg)[v_idx]
    return _lowerbound_single(cfg, inst, v_idx, rep)


def _lowerbound_pair(cfg: ExperimentConfig) -> tuple[HardInstance, HardInstance]:
    problem = "convex_smooth" if cfg.problem_class == "convex" else "strongly_convex"
    p, q, c1, c2 = _envelope_params(cfg)
    eps = optimal_separation(problem, p, q, c1, c2, cfg.n)
    if problem == "convex_smooth" and eps >= EPS_CAP_CONVEX:
        raise ConfigError(
            f"n: optimal separation {eps:.4f} exceeds the convex cap {EPS_CAP_CONVEX:.4f}; increase n"
        )
    return hard_pair(problem, p, q, c1, c2, eps)


def _envelope_params(cfg: ExperimentConfig) -> tuple[float, float, float, float]:
    p = cfg.p if cfg.p is not None else 2.0
    q = cfg.q if cfg.q is not None else 2.0
    c1 = cfg.c1 if cfg.c1 is not None else 1.0
    c2 = cfg.c2 if cfg.c2 is not None else 1.0
    return p, q, c1, c2


def _lowerbound_schedule(cfg: ExperimentConfig, f: ObjectiveFunction, env: OracleEnvelope) -> Schedule:
    reg = Regularizer()
    D = reg.diameter(f.domain)
    if cfg.problem_class == "convex":
        return schedule_opt_convex(env.p, env.q, env.c1, env.c2, D, 1.0, f.smoothness, cfg.n)
    return schedule_opt_sc(
        env.p, env.q, env.c1, env.c2, D, sc_alpha(f), f.strong_convexity, f.smoothness, cfg.n
    )


def _lowerbound_single(cfg: ExperimentConfig, inst: HardInstance, v_idx: int, rep: int, exact: bool = False) -> float:
    f = inst.objective()
    oracle = ExactGradientOracle(f) if exact else AdversarialOracle(inst)
    schedule = _lowerbound_schedule(cfg, f, inst.envelope)
    rng = RngStream(cfg.master_seed, ((2 + v_idx) << 20) | rep if not exact else ((8 + v_idx) << 20) | rep).generator()
    trace = run(oracle, schedule, cfg.n, f.domain, Regularizer(), rng=rng)
    return float(trace.error)


def lower_bound_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Run mirror descent against both arms of the hard pair at the optimal
    separation and check the closed-form floor from below."""
    cfg.validate()
    problem = "convex_smooth" if cfg.problem_class == "convex" else "strongly_convex"
    p, q, c1, c2 = _envelope_params(cfg)
    pair = _lowerbound_pair(cfg)
    floor = minimax_lower_bound(problem, p, q, c1, c2, cfg.n)
    experiment_id = f"lowerbound-{cfg.problem_class}-p{p}-q{q}"

    payloads = [
        (cfg.to_dict(), v_idx, rep)
        for v_idx in (0, 1)
        for rep in range(cfg.replications)
    ]
    if cfg.workers <= 1:
        errors = [_lowerbound_single(cfg, pair[v_idx], v_idx, rep) for _, v_idx, rep in payloads]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            errors = list(pool.map(_lowerbound_task, payloads))
    arr = np.array(errors)
    mean = float(arr.mean())
    se = float(arr.std(ddof=1) / math.sqrt(arr.size))
    # exact-gradient sanity: the floor is oracle-induced, not solver-induced
    sanity = float(
        np.mean([_lowerbound_single(cfg, pair[v], v, rep, exact=True) for v in (0, 1) for rep in range(4)])
    )
    passed = (mean + 3.0 * se >= floor) and (sanity < floor)
    deltas = [
        _lowerbound_schedule(cfg, pair[v].objective(), pair[v].envelope).delta for v in (0, 1)
    ]
    rows = [
        (f"{experiment_id}-v{'+' if v_idx == 0 else '-'}", cfg.n, rep, err, None,
         deltas[v_idx], ((2 + v_idx) << 20) | rep)
        for (_, v_idx, rep), err in zip(payloads, errors)
    ]
    details = {
        "floor": floor,
        "mean_error": mean,
        "se": se,
        "mean_plus_3se": mean + 3.0 * se,
        "separation": pair[0].eps,
        "exact_oracle_error": sanity,
    }
    csv_path, json_path = _out_paths(cfg, experiment_id)
    if csv_path:
        write_rows(csv_path, _RUN_HEADER, rows)
        write_summary(json_path, _summary_payload(cfg, experiment_id, None, None, passed, details))
    return ExperimentReport(
        experiment_id, None, None, cfg.tolerance, passed, details,
        str(csv_path) if csv_path else None, str(json_path) if json_path else None,
    )


# ---------------------------------------------------------------------------
# Probe experiment
# ---------------------------------------------------------------------------


def parse_oracle_spec(spec: str):
    """Build an oracle plus its probe point from a compact spec string.

    Grammar: ``kind[,key=value]...`` with kinds one-point, two-point,
    smoothing, exact, adversarial-convex, adversarial-sc.  Keys: fn, scheme,
    noise, sigma, v, eps, c1, p, c2, q, class, x.
    """
    parts = [p.strip() for p in spec.split(",") if p.strip()]
    if not parts:
        raise ConfigError("oracle_spec: empty")
    kind = parts[0]
    kv: dict[str, str] = {}
    for part in parts[1:]:
        if "=" not in part:
            raise ConfigError(f"oracle_spec: expected key=value, got {part!r}")
        k, v = part.split("=", 1)
        kv[k.strip()] = v.strip()
    probe_x = np.array([float(kv.get("x", 0.25))])

    if kind in ("adversarial-convex", "adversarial-sc"):
        problem = "convex_smooth" if kind.endswith("convex") else "strongly_convex"
        env = OracleEnvelope(
            c1=float(kv.get("c1", 1.0)), p=float(kv.get("p", 2.0)),
            c2=float(kv.get("c2", 1.0)), q=float(kv.get("q", 2.0)),
        )
        inst = HardInstance(problem, int(kv.get("v", 1)), float(kv.get("eps", 0.1)), env)
        return AdversarialOracle(inst), probe_x

    f = build_function(
        {"name": kv.get("fn", "quadratic"), "v": kv.get("v", 1), "eps": kv.get("eps", 0.1),
         "a": [float(kv.get("a", 1.0))]}
    )
    if kind == "exact":
        return ExactGradientOracle(f), probe_x
    if kind == "smoothing":
        feedback, default_scheme = "one_point", "surface"
    elif kind == "one-point":
        feedback, default_scheme = "one_point", "spsa"
    elif kind == "two-point":
        feedback, default_scheme = "two_point", "spsa"
    else:
        raise ConfigError(f"oracle_spec: unknown oracle kind {kind!r}")
    scheme = _SCHEMES.get(kv.get("scheme", default_scheme))
    if scheme is None:
        raise ConfigError(f"oracle_spec: unknown scheme {kv.get('scheme')!r}")
    sigma = float(kv.get("sigma", 1.0))
    if kv.get("noise", "uncontrolled") == "controlled":
        noise = additive_controlled(f, sigma)
    else:
        noise = UncontrolledNoise(sigma)
    oracle = EstimatorOracle(
        target=f, scheme=scheme, noise=noise, feedback=feedback,
        function_class=kv.get("class", "convex_smooth"),
    )
    return oracle, probe_x


def probe_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Probe an oracle's bias/variance over the delta grid and compare with
    its declared envelope at five standard errors of slack."""
    cfg.validate()
    if cfg.oracle_spec is None:
        raise ConfigError("oracle_spec: required for probe runs")
    oracle, x = parse_oracle_spec(cfg.oracle_spec)
    env = oracle.envelope
    experiment_id = f"probe-{cfg.oracle_spec.split(',')[0]}"
    rows = []
    all_ok = True
    for i, delta in enumerate(cfg.delta_grid):
        rng = RngStream(cfg.master_seed, (40 << 20) | i).generator()
        res = probe_bias_variance(oracle, x, delta, cfg.probe_reps, rng)
        c1_bound, c2_bound = env.c1_value(delta), env.c2_value(delta)
        bias_ok = res.bias_est <= c1_bound + 5.0 * res.bias_se
        var_ok = res.var_est <= 1.05 * c2_bound + 5.0 * res.var_se
        all_ok = all_ok and bias_ok and var_ok
        rows.append(
            (cfg.oracle_spec, delta, res.bias_est, res.bias_se, res.var_est, res.var_se,
             res.replications, c1_bound, c2_bound, int(bias_ok), int(var_ok))
        )
    header = ("oracle", "delta", "bias", "bias_se", "var", "var_se", "reps",
              "c1_bound", "c2_bound", "bias_ok", "var_ok")
    details = {"rows": [dict(zip(header, r)) for r in rows]}
    csv_path, json_path = _out_paths(cfg, experiment_id)
    if csv_path:
        write_rows(csv_path, header, rows)
        write_summary(json_path, _summary_payload(cfg, experiment_id, None, None, all_ok, details))
    return ExperimentReport(
        experiment_id, None, None, cfg.tolerance, all_ok, details,
        str(csv_path) if csv_path else None, str(json_path) if json_path else None,
    )
