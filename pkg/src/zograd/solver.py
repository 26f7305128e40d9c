"""Mirror descent against a biased noisy gradient oracle, with the tuned
tolerance/step-size schedules for all four regimes: optimization or regret,
convex or strongly convex.

The regularizer is the squared Euclidean norm, so the update is projected
gradient descent: X_{t+1} = project(X_t - eta_t * G_t).  The schedule
constructors take the envelope (p, q, C1, C2), the divergence diameter D,
the strong-convexity scale alpha of the regularizer bookkeeping, and the
horizon n, and return the closed-form (delta, eta_t) pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import Ball, Box, ConvexBody, DomainError, project

_DELTA_FLOOR = 1e-9


# ---------------------------------------------------------------------------
# Regularizer
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Regularizer:
    """Squared-Euclidean mirror map (alpha = 1): D(x, y) = ||x - y||^2 / 2."""

    kind: str = "squared_euclidean"

    def __post_init__(self) -> None:
        if self.kind != "squared_euclidean":
            raise DomainError("only the squared-Euclidean regularizer is supported")

    def divergence(self, x: np.ndarray, y: np.ndarray) -> float:
        diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        return 0.5 * float(np.dot(diff, diff))

    def diameter(self, body: ConvexBody) -> float:
        """sup_{x,y in K} D(x, y): half the squared diameter."""
        if isinstance(body, Box):
            side = body.upper - body.lower
            return 0.5 * float(np.dot(side, side))
        if isinstance(body, Ball):
            return 2.0 * body.radius**2
        raise DomainError(f"unsupported body {type(body)!r}")


def md_step(
    x_t: np.ndarray,
    g_t: np.ndarray,
    eta_t: float,
    reg: Regularizer,
    body: ConvexBody,
) -> np.ndarray:
    """One mirror-descent update; for the squared-Euclidean map this is the
    projected gradient step."""
    if eta_t <= 0:
        raise DomainError("step size must be positive")
    return project(body, np.asarray(x_t, dtype=float) - eta_t * np.asarray(g_t, dtype=float))


def prox_inequality_gap(
    x_t: np.ndarray,
    g_t: np.ndarray,
    eta_t: float,
    x_next: np.ndarray,
    probes: np.ndarray,
    reg: Regularizer,
) -> float:
    """max over probe points x of
        <g, x_next - x> - (D(x, x_t) - D(x, x_next) - D(x_next, x_t)) / eta;
    nonpositive (up to roundoff) whenever x_next is the prox point."""
    worst = -math.inf
    for x in probes:
        lhs = float(np.dot(g_t, x_next - x))
        rhs = (
            reg.divergence(x, x_t) - reg.divergence(x, x_next) - reg.divergence(x_next, x_t)
        ) / eta_t
        worst = max(worst, lhs - rhs)
    return worst


# ---------------------------------------------------------------------------
# Schedules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Schedule:
    """A tolerance delta plus a step-size rule.

    ``eta_form`` is one of
      ("poly", a, r, L, alpha)  ->  eta_t = alpha / (a * t**r + L)
      ("inv_t", mu)             ->  eta_t = 2 / (mu * t)
      ("const", c)              ->  eta_t = c
    """

    mode: str
    delta: float
    eta_form: tuple
    params: dict = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not (0.0 < self.delta <= 1.0):
            raise DomainError(f"schedule delta must be in (0, 1], got {self.delta}")

    def eta(self, t: int) -> float:
        kind = self.eta_form[0]
        if kind == "poly":
            _, a, r, L, alpha = self.eta_form
            return alpha / (a * t**r + L)
        if kind == "inv_t":
            return 2.0 / (self.eta_form[1] * t)
        return self.eta_form[1]

    def eta_array(self, n: int) -> np.ndarray:
        """eta_1 .. eta_{n-1} as one vector."""
        t = np.arange(1, max(n, 1), dtype=float)
        kind = self.eta_form[0]
        if kind == "poly":
            _, a, r, L, alpha = self.eta_form
            return alpha / (a * t**r + L)
        if kind == "inv_t":
            return 2.0 / (self.eta_form[1] * t)
        return np.full(t.shape, self.eta_form[1])


def manual_schedule(delta: float, eta_form: tuple, mode: str = "manual") -> Schedule:
    return Schedule(mode=mode, delta=delta, eta_form=eta_form)


def _clamp_delta(delta: float, notes: list[str]) -> float:
    if not math.isfinite(delta) or delta <= 0.0:
        notes.append(f"delta {delta} floored to {_DELTA_FLOOR}")
        return _DELTA_FLOOR
    if delta > 1.0:
        notes.append(f"delta {delta:.6g} clamped to 1.0")
        return 1.0
    return delta


def schedule_opt_convex(
    p: float,
    q: float,
    c1: float,
    c2: float,
    D: float,
    alpha: float,
    L: float,
    n: int,
    oracle_type: str = "type_I",
) -> Schedule:
    """Tuned schedule for smooth convex optimization: eta_t = alpha/(a t^r + L)
    with r = (p+q)/(2p+q) and the (a, delta) pair balancing the bias, step and
    variance terms of the error bound."""
    if min(p, D, alpha, L) <= 0 or q < 0 or n < 1 or c1 < 0 or c2 < 0:
        raise DomainError("schedule inputs must be positive (c1, c2 nonnegative)")
    notes: list[str] = []
    two_pq = 2.0 * p + q
    r = (p + q) / two_pq

    if c1 == 0.0 and c2 == 0.0:
        a, delta = 0.0, 1.0
        notes.append("exact oracle: constant step alpha/L")
    elif c2 == 0.0:
        a = 0.0
        delta = _clamp_delta(0.0, notes)  # bias-only: drive delta down
    elif c1 == 0.0:
        # no bias: delta = 1 minimizes variance; balance step vs variance terms
        delta = 1.0
        a = math.sqrt(alpha * c2 / (2.0 * (1.0 - r) * D)) * n ** ((1.0 - 2.0 * r) / 2.0)
        notes.append("unbiased oracle: delta pinned at 1")
    elif oracle_type == "type_I":
        a = (
            2.0 ** (q / (2.0 * two_pq))
            * (two_pq / (2.0 * p)) ** (p / two_pq)
            * D**-0.5
            * c1 ** (q / two_pq)
            * c2 ** (p / two_pq)
        )
        delta = _clamp_delta(
            alpha ** (1.0 / (2.0 * (p + q)))
            * (two_pq / (4.0 * p)) ** (1.0 / two_pq)
            * c1 ** (-2.0 / two_pq)
            * c2 ** (1.0 / two_pq)
            * n ** (-1.0 / two_pq),
            notes,
        )
    elif oracle_type == "type_II":
        lead = 2.0 + 2.0 / n
        a = (
            lead ** (q / two_pq)
            * (two_pq / (2.0 * p)) ** (p / two_pq)
            * (D / alpha) ** (-(p + q) / two_pq)
            * c1 ** (q / two_pq)
            * c2 ** (p / two_pq)
        )
        delta = _clamp_delta(
            lead ** (-2.0 / two_pq)
            * (two_pq / (2.0 * p)) ** (1.0 / two_pq)
            * (D / alpha) ** (1.0 / two_pq)
            * c1 ** (-2.0 / two_pq)
            * c2 ** (1.0 / two_pq)
            * n ** (-1.0 / two_pq),
            notes,
        )
    else:
        raise DomainError(f"unknown oracle type {oracle_type!r}")

    return Schedule(
        mode="opt_convex",
        delta=delta,
        eta_form=("poly", a, r, L, alpha),
        params={"p": p, "q": q, "c1": c1, "c2": c2, "D": D, "alpha": alpha, "L": L, "n": n,
                "r": r, "a": a, "oracle_type": oracle_type},
        notes=tuple(notes),
    )


def schedule_opt_sc(
    p: float,
    q: float,
    c1: float,
    c2: float,
    D: float,
    alpha: float,
    mu: float,
    L: float,
    n: int,
    oracle_type: str = "type_I",
) -> Schedule:
    """Strongly convex optimization schedule: eta_t = 2/(mu t), requiring
    alpha*mu > 2L so the per-step bookkeeping a_t = alpha*mu*t/2 - L stays
    positive from t = 1."""
    if min(p, q, D, alpha, mu, L) <= 0 or n < 1 or c1 < 0 or c2 < 0:
        raise DomainError("schedule inputs must be positive (c1, c2 nonnegative)")
    if alpha * mu <= 2.0 * L:
        raise DomainError(f"need alpha*mu > 2L, got alpha*mu={alpha * mu} vs 2L={2 * L}")
    notes: list[str] = []
    log_factor = math.log(n) + 1.0 + alpha * mu / (alpha * mu - 2.0 * L)
    if c1 == 0.0:
        delta = 1.0 if c2 > 0 else _DELTA_FLOOR
        notes.append("degenerate bias coefficient: delta pinned")
    elif oracle_type == "type_I":
        delta = _clamp_delta(
            (c2 * log_factor / (math.sqrt(2.0 * D * alpha) * mu * c1 * n)) ** (1.0 / (p + q)),
            notes,
        )
    elif oracle_type == "type_II":
        delta = _clamp_delta(
            (c2 * log_factor / (2.0 * alpha * mu * c1 * (n + 1.0))) ** (1.0 / (p + q)),
            notes,
        )
    else:
        raise DomainError(f"unknown oracle type {oracle_type!r}")
    return Schedule(
        mode="opt_sc",
        delta=delta,
        eta_form=("inv_t", mu),
        params={"p": p, "q": q, "c1": c1, "c2": c2, "D": D, "alpha": alpha, "mu": mu,
                "L": L, "n": n, "oracle_type": oracle_type},
        notes=tuple(notes),
    )


def regret_bias_coefficient(p: float, c1: float, L: float, oracle_type: str, r_sup: float) -> float:
    """Coefficient of the dominating delta-power in the regret bound: the
    declared bias C1 (scaled by sup||x|| for type-I) while p <= 2, plus the
    L/4 vicinity-loss term once p >= 2."""
    coeff = 0.0
    if p <= 2.0:
        coeff += (r_sup * c1) if oracle_type == "type_I" else c1
    if p >= 2.0:
        coeff += L / 4.0
    return coeff


def schedule_regret(
    p: float,
    q: float,
    c1: float,
    c2: float,
    D: float,
    alpha: float,
    L: float,
    mu: float,
    n: int,
    oracle_type: str = "type_II",
    r_sup: float = 1.0,
    strongly_convex: bool = False,
) -> Schedule:
    """Regret schedules: constant eta for the convex case, eta_t = 2/(mu t)
    for the strongly convex case, with delta tuned against the capped bias
    exponent p_hat = min(p, 2)."""
    if min(p, D, alpha, L) <= 0 or q < 0 or n < 1 or c1 < 0 or c2 <= 0:
        raise DomainError("schedule inputs must be positive (c1 nonnegative)")
    notes: list[str] = []
    p_hat = min(p, 2.0)
    c1_hat = regret_bias_coefficient(p, c1, L, oracle_type, r_sup)
    if strongly_convex:
        if mu <= 0:
            raise DomainError("strongly convex regret requires mu > 0")
        if q == 0.0:
            delta = _clamp_delta(0.0, notes)
        else:
            delta = _clamp_delta(
                (c2 * q * (1.0 + math.log(n)) / (alpha * mu * c1_hat * p_hat * n)) ** (1.0 / (p_hat + q)),
                notes,
            )
        return Schedule(
            mode="regret_sc",
            delta=delta,
            eta_form=("inv_t", mu),
            params={"p": p, "q": q, "c1": c1, "c2": c2, "p_hat": p_hat, "c1_hat": c1_hat,
                    "D": D, "alpha": alpha, "mu": mu, "L": L, "n": n, "oracle_type": oracle_type},
            notes=tuple(notes),
        )
    two_pq = 2.0 * p_hat + q
    if q == 0.0:
        delta = _clamp_delta(0.0, notes)
    else:
        delta = _clamp_delta(
            (q / (2.0 * p_hat)) ** (2.0 / two_pq)
            * (c2 * D / (alpha * c1_hat**2)) ** (1.0 / two_pq)
            * n ** (-1.0 / two_pq),
            notes,
        )
    eta = (
        D ** ((p_hat + q) / two_pq)
        * (q / (2.0 * p_hat)) ** (q / two_pq)
        * (c2 / alpha) ** (-p_hat / two_pq)
        * c1_hat ** (-q / two_pq)
        * n ** (-(p_hat + q) / two_pq)
    )
    return Schedule(
        mode="regret_convex",
        delta=delta,
        eta_form=("const", eta),
        params={"p": p, "q": q, "c1": c1, "c2": c2, "p_hat": p_hat, "c1_hat": c1_hat,
                "D": D, "alpha": alpha, "L": L, "n": n, "oracle_type": oracle_type},
        notes=tuple(notes),
    )


def optimization_rate_exponent(problem_class: str, p: float, q: float) -> float:
    """Predicted decay exponent of the optimization error in n."""
    if problem_class == "convex_smooth":
        return p / (2.0 * p + q)
    if problem_class == "strongly_convex":
        return p / (p + q)
    raise DomainError(f"unknown problem class {problem_class!r}")


def regret_rate_exponent(problem_class: str, p: float, q: float) -> float:
    """Predicted decay exponent of the per-round regret R_n / n."""
    p_hat = min(p, 2.0)
    if problem_class == "convex_smooth":
        return p_hat / (2.0 * p_hat + q)
    if problem_class == "strongly_convex":
        return p_hat / (p_hat + q)
    raise DomainError(f"unknown problem class {problem_class!r}")


# ---------------------------------------------------------------------------
# The run loop
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RunTrace:
    """What one mirror-descent run produced."""

    n: int
    mode: str
    delta: float
    x_hat: np.ndarray
    error: Optional[float]
    regret: Optional[float]
    warnings: tuple[str, ...] = ()
    xs: Optional[np.ndarray] = None
    ys: Optional[np.ndarray] = None
    losses_x: Optional[np.ndarray] = None
    losses_y: Optional[np.ndarray] = None
    etas: Optional[np.ndarray] = None
    gs: Optional[np.ndarray] = None


def run(
    oracle,
    schedule: Schedule,
    n: int,
    body: ConvexBody,
    reg: Regularizer,
    x1: Optional[np.ndarray] = None,
    rng: Optional[np.random.Generator] = None,
    mode: str = "optimization",
    record: bool = False,
) -> RunTrace:
    """Run n-1 mirror-descent steps against the oracle and average.

    In regret mode the loss of round t is charged at the oracle's evaluation
    point; for two-point oracles that report the + probe arm, both arms
    (x +- delta*u, recoverable as y and 2x - y) are averaged.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    if rng is None:
        rng = np.random.default_rng(0)
    if mode not in ("optimization", "regret"):
        raise DomainError(f"unknown mode {mode!r}")
    f = oracle.target
    d = oracle.dim
    warnings = list(schedule.notes)
    if mode == "regret" and not getattr(oracle, "unbiased", False):
        warnings.append("regret bound not guaranteed: oracle is biased in Y")

    x0 = np.asarray(x1, dtype=float) if x1 is not None else body.center
    x0 = np.atleast_1d(x0)
    if not body.contains(x0):
        raise DomainError("x1 must lie in the feasible set")

    delta = schedule.delta
    stepper = oracle.make_stepper(max(n - 1, 1), delta, rng)
    etas = schedule.eta_array(n)
    two_point = getattr(oracle, "feedback", "") == "two_point"

    want_regret = mode == "regret"
    if d == 1 and not record:
        x_hat, regret = _loop_scalar(stepper, etas, x0, body, f, n, want_regret, two_point)
        error = f.value_at(x_hat) - f.f_star
        return RunTrace(
            n=n, mode=mode, delta=delta, x_hat=x_hat, error=error,
            regret=regret, warnings=tuple(warnings),
        )
    return _loop_recorded(
        stepper, etas, x0, body, f, n, mode, delta, tuple(warnings), record, two_point
    )


def _loop_scalar(stepper, etas, x0, body, f, n, want_regret, two_point):
    if isinstance(body, Box):
        lo, hi = float(body.lower[0]), float(body.upper[0])
    else:
        lo, hi = float(body.center[0] - body.radius), float(body.center[0] + body.radius)
    fs = f.value_scalar or (lambda x: float(f.value(x)))
    f_min = f.f_star
    x = float(x0[0])
    sum_x = x
    regret = 0.0
    eta_list = etas.tolist()
    for t in range(n - 1):
        g, y = stepper(t, x)
        if want_regret:
            if two_point and y != x:
                regret += 0.5 * (fs(y) + fs(2.0 * x - y)) - f_min
            else:
                regret += fs(y) - f_min
        x = x - eta_list[t] * g
        if x > hi:
            x = hi
        elif x < lo:
            x = lo
        sum_x += x
    x_hat = np.array([sum_x / n])
    return x_hat, (regret if want_regret else None)


def _loop_recorded(stepper, etas, x0, body, f, n, mode, delta, warnings, record, two_point):
    d = x0.size
    x = x0.astype(float).copy()
    sum_x = x.copy()
    regret = 0.0
    want_regret = mode == "regret"
    xs = np.empty((n, d)) if record else None
    ys = np.empty((max(n - 1, 0), d)) if record else None
    gs = np.empty((max(n - 1, 0), d)) if record else None
    losses_x = np.empty(n) if record else None
    losses_y = np.empty(max(n - 1, 0)) if record else None
    if record:
        xs[0] = x
        losses_x[0] = f.value_at(x)
    for t in range(n - 1):
        g, y = stepper(t, x if d > 1 else float(x[0]))
        g_vec = np.atleast_1d(np.asarray(g, dtype=float))
        y_vec = np.atleast_1d(np.asarray(y, dtype=float))
        loss_y = f.value_at(y_vec)
        if want_regret:
            if two_point and not np.array_equal(y_vec, x):
                loss_y = 0.5 * (loss_y + f.value_at(2.0 * x - y_vec))
            regret += loss_y - f.f_star
        x = project(body, x - etas[t] * g_vec)
        sum_x += x
        if record:
            gs[t] = g_vec
            ys[t] = y_vec
            losses_y[t] = loss_y
            xs[t + 1] = x
            losses_x[t + 1] = f.value_at(x)
    x_hat = sum_x / n
    error = f.value_at(x_hat) - f.f_star
    return RunTrace(
        n=n, mode=mode, delta=delta, x_hat=x_hat, error=error,
        regret=(regret if want_regret else None), warnings=warnings,
        xs=xs, ys=ys, losses_x=losses_x, losses_y=losses_y,
        etas=etas if record else None, gs=gs,
    )
