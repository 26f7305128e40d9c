"""The `check` suite: fast, deterministic property verification for the
whole stack (envelopes, gradients, adversarial exactness, solver step
inequality, reproducibility).  Exit code 0 iff every check passes."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from ..adversarial import (
    bias_excess_on_grid,
    gap_deviation_on_grid,
    hard_pair,
    minimax_lower_bound,
    optimal_separation,
    scaled_hard_coordinates,
    worst_case_tolerance,
)
from ..core import Ball, Box, DomainError, RngStream, project
from ..estimators import (
    SF,
    SPSA,
    SURFACE,
    EstimatorOracle,
    UncontrolledNoise,
    additive_controlled,
)
from ..solver import (
    Regularizer,
    manual_schedule,
    prox_inequality_gap,
    run,
    schedule_opt_convex,
    schedule_opt_sc,
)
from ..testbed import (
    exp_one_d,
    finite_diff_check,
    kinked_quadratic,
    quadratic,
    softabs,
    strongly_convex_pair,
)
from .probes import probe_bias_variance

Check = tuple[str, Callable[[], str]]


def _check_projection() -> str:
    rng = RngStream(4242, 0).generator()
    for body in (Box(np.array([-1.0, -2.0]), np.array([1.0, 0.5])), Ball(np.zeros(3), 1.5)):
        for _ in range(1000):
            x = rng.normal(scale=3.0, size=body.dim)
            y = rng.normal(scale=3.0, size=body.dim)
            px, py = project(body, x), project(body, y)
            if np.linalg.norm(px - py) > np.linalg.norm(x - y) + 1e-12:
                raise AssertionError("projection expanded a pair")
            if not np.allclose(project(body, px), px):
                raise AssertionError("projection is not idempotent")
    return "nonexpansive and idempotent on 2000 random pairs"


def _check_finite_differences() -> str:
    rng = RngStream(4242, 1).generator()
    worst = 0.0
    for f in (
        quadratic([1.0]),
        quadratic([2.0, 0.5], [0.3, -0.1]),
        softabs(+1, 0.1),
        softabs(-1, 0.05),
        strongly_convex_pair(+1, 0.2),
        kinked_quadratic(),
        exp_one_d(),
    ):
        worst = max(worst, finite_diff_check(f, 100, rng))
    if worst > 1e-4:
        raise AssertionError(f"finite-difference mismatch {worst:.2e}")
    return f"all testbeds match central differences (worst {worst:.1e})"


def _check_estimator_envelopes() -> str:
    rng = RngStream(4242, 2).generator()
    f = quadratic([1.0])
    cells = [
        EstimatorOracle(f, SPSA, UncontrolledNoise(1.0), "one_point"),
        EstimatorOracle(f, SURFACE, UncontrolledNoise(1.0), "one_point"),
        EstimatorOracle(f, SPSA, UncontrolledNoise(1.0), "two_point"),
        EstimatorOracle(f, SF, UncontrolledNoise(1.0), "two_point"),
        EstimatorOracle(f, SPSA, additive_controlled(f, 1.0), "two_point"),
    ]
    x = np.array([0.3])
    for oracle in cells:
        env = oracle.envelope
        for delta in (0.5, 0.1):
            res = probe_bias_variance(oracle, x, delta, 50_000, rng)
            if res.bias_est > env.c1_value(delta) + 5 * res.bias_se:
                raise AssertionError(f"bias envelope violated for {oracle.scheme.kind}/{oracle.feedback}")
            if res.var_est > 1.05 * env.c2_value(delta) + 5 * res.var_se:
                raise AssertionError(f"variance envelope violated for {oracle.scheme.kind}/{oracle.feedback}")
    return "bias/variance inside declared envelopes for 5 cells x 2 deltas"


def _check_adversarial_grid() -> str:
    for problem, eps in (("convex_smooth", 0.1), ("strongly_convex", 0.2)):
        for p, q in ((1.0, 2.0), (2.0, 2.0)):
            plus, minus = hard_pair(problem, p, q, 1.0, 1.0, eps)
            excess = max(bias_excess_on_grid(plus), bias_excess_on_grid(minus))
            if excess > 1e-12:
                raise AssertionError(f"type-I bias excess {excess:.2e} for {problem}")
            gap_excess, gap_defect = gap_deviation_on_grid(plus, minus)
            if gap_excess > 1e-12:
                raise AssertionError(f"gap bound violated by {gap_excess:.2e}")
            if problem == "strongly_convex" and gap_defect > 1e-12:
                raise AssertionError(f"gap identity defect {gap_defect:.2e}")
    return "closed-form bias and gap identities exact on the 401x25 grid"


def _check_separable_arithmetic() -> str:
    oracle = scaled_hard_coordinates("strongly_convex", 1.0, 2.0, 1.0, 1.0, 0.2, [+1, -1, +1, -1])
    env = oracle.envelope
    if abs(env.c1 - 1.0) > 1e-12 or abs(env.c2 - 1.0) > 1e-12:
        raise AssertionError("separable composition does not recover the declared envelope")
    delta = 0.3
    per_coord = oracle.instances[0].envelope
    total_var = sum(inst.envelope.c2_value(delta) for inst in oracle.instances)
    if abs(total_var - env.c2_value(delta)) > 1e-12:
        raise AssertionError("coordinate variances do not add up")
    bias = np.linalg.norm(oracle.mean_response(np.zeros(4), delta) - oracle.target.gradient_at(np.zeros(4)))
    if bias > env.c1_value(delta) + 1e-12:
        raise AssertionError("composed bias escapes the d-dimensional envelope")
    if per_coord.c1 * math.sqrt(4) != env.c1:
        raise AssertionError("per-coordinate bias scale is not C1/sqrt(d)")
    return "envelope arithmetic exact for the d=4 composition"


def _check_prox_inequality() -> str:
    f = quadratic([1.0])
    oracle = EstimatorOracle(f, SPSA, UncontrolledNoise(1.0), "two_point")
    schedule = schedule_opt_convex(1.0, 2.0, oracle.envelope.c1, oracle.envelope.c2, 2.0, 1.0, 1.0, 500)
    reg = Regularizer()
    rng = RngStream(4242, 3).generator()
    trace = run(oracle, schedule, 500, f.domain, reg, rng=rng, record=True)
    probes = RngStream(4242, 4).generator().uniform(-1.0, 1.0, size=(100, 1))
    worst = -math.inf
    for t in range(trace.n - 1):
        gap = prox_inequality_gap(trace.xs[t], trace.gs[t], trace.etas[t], trace.xs[t + 1], probes, reg)
        worst = max(worst, gap)
    if worst > 1e-8:
        raise AssertionError(f"prox inequality violated by {worst:.2e}")
    return f"step optimality inequality holds at every iteration (worst gap {worst:.1e})"


def _check_schedules() -> str:
    s = schedule_opt_convex(2.0, 2.0, 1.0, 1.0, 2.0, 1.0, 1.0, 1000)
    if abs(s.params["r"] - 2.0 / 3.0) > 1e-12:
        raise AssertionError("opt_convex r mismatch")
    try:
        schedule_opt_sc(2.0, 2.0, 1.0, 1.0, 2.0, 1.0, 1.0, 1.0, 1000)
    except DomainError:
        pass
    else:
        raise AssertionError("opt_sc accepted alpha*mu <= 2L")
    d_star = worst_case_tolerance(1.0, 1.0, 2.0, 2.0)
    if abs(d_star - math.sqrt(1.0 / 3.0)) > 1e-12:
        raise AssertionError("worst-case tolerance closed form broke")
    lb = minimax_lower_bound("convex_smooth", 2.0, 2.0, 1.0, 1.0, 10_000)
    eps = optimal_separation("convex_smooth", 2.0, 2.0, 1.0, 1.0, 10_000)
    if abs(lb - eps * 6.0 / 40.0) > 1e-12 * lb:
        raise AssertionError("floor and separation are inconsistent")
    return "schedule constants and closed forms self-consistent"


def _check_determinism() -> str:
    f = quadratic([1.0])
    oracle = EstimatorOracle(f, SURFACE, UncontrolledNoise(1.0), "one_point")
    schedule = manual_schedule(0.3, ("poly", 1.0, 0.75, 1.0, 1.0))
    traces = [
        run(oracle, schedule, 2000, f.domain, Regularizer(),
            rng=RngStream(7, 5).generator())
        for _ in range(2)
    ]
    if traces[0].x_hat[0] != traces[1].x_hat[0] or traces[0].error != traces[1].error:
        raise AssertionError("equal streams produced different runs")
    return "equal RNG streams reproduce runs bitwise"


ALL_CHECKS: list[Check] = [
    ("projection", _check_projection),
    ("finite-differences", _check_finite_differences),
    ("estimator-envelopes", _check_estimator_envelopes),
    ("adversarial-grid", _check_adversarial_grid),
    ("separable-arithmetic", _check_separable_arithmetic),
    ("prox-inequality", _check_prox_inequality),
    ("schedule-constants", _check_schedules),
    ("determinism", _check_determinism),
]


def run_checks(verbose: bool = True) -> int:
    failures = 0
    for name, fn in ALL_CHECKS:
        try:
            detail = fn()
            status = "PASS"
        except AssertionError as exc:
            detail = str(exc)
            status = "FAIL"
            failures += 1
        if verbose:
            print(f"[{status}] {name}: {detail}")
    return 0 if failures == 0 else 1
