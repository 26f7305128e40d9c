"""Constructive hard instances and the closed-form minimax floor.

Each hard instance is a pair: a target function indexed by a sign ``v`` and
a gradient oracle whose mean is shifted *toward* the opposite sign's
gradient by ``min(eps, C1*delta^p)``, then clipped so the two means never
cross.  The shift spends the full bias budget on hiding ``v``, which is what
makes the sign statistically hard to identify; Gaussian noise of variance
``C2*delta^-q`` exhausts the variance budget.  The oracle returns ``Y = x``.

The closed-form quantities (worst-case tolerance, the KL bound it induces,
the optimizing separation, and the resulting floor on any algorithm's
error) are exposed for the experiment harness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    DomainError,
    OracleEnvelope,
    OracleQuery,
    OracleResponse,
    checked_response,
)
from .testbed import ObjectiveFunction, separable, softabs, strongly_convex_pair

EPS_CAP_CONVEX = 1.0 / (4.0 * math.log(2.0))


# ---------------------------------------------------------------------------
# Oracle means (deterministic part; noise is added by the oracle object)
# ---------------------------------------------------------------------------


def _softabs_grad(x, v: float, eps: float):
    return eps * np.tanh(0.5 * (np.asarray(x, dtype=float) - v) / eps)


def mean_response_convex(v: int, x, delta: float, eps: float, c1: float, p: float):
    """Mean gradient reply for the smooth-convex pair: the true slope shifted
    toward the other sign's slope by min(eps, c1*delta^p), clipped so the two
    shifted curves never cross."""
    x = np.asarray(x, dtype=float)
    shift = min(eps, c1 * delta**p)
    g_plus = _softabs_grad(x, +1.0, eps)
    g_minus = _softabs_grad(x, -1.0, eps)
    if v == +1:
        raised = g_plus + shift
        return np.where(x < 0, raised, np.minimum(raised, g_minus - shift))
    if v == -1:
        lowered = g_minus - shift
        return np.where(x > 0, lowered, np.maximum(lowered, g_plus + shift))
    raise DomainError("v must be +1 or -1")


def mean_response_strongly_convex(v: int, x, delta: float, eps: float, c1: float, p: float):
    """Mean gradient reply for the strongly convex pair: x - v*eps shifted
    back toward zero by v*min(eps, c1*delta^p)."""
    if v not in (+1, -1):
        raise DomainError("v must be +1 or -1")
    x = np.asarray(x, dtype=float)
    shift = min(eps, c1 * delta**p)
    return x - v * eps + v * shift


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------


def worst_case_tolerance(eps: float, c1: float, p: float, q: float) -> float:
    """The delta maximizing the per-query distinguishability
    ((eps - c1*d^p)+)^2 * d^q.  Degenerate at q = 0, where the supremum is
    attained only in the limit d -> 0; 0.0 is returned to signal that."""
    if eps <= 0 or c1 <= 0 or p <= 0 or q < 0:
        raise DomainError("eps, c1, p must be positive and q nonnegative")
    if q == 0.0:
        return 0.0
    return (eps * q / (c1 * (2.0 * p + q))) ** (1.0 / p)


def kl_divergence_bound(n: int, eps: float, env: OracleEnvelope) -> float:
    """Upper bound on the divergence between the n-round observation laws of
    the two instances: (2n/C2) * (eps - c1(d*))^2 * d*^q."""
    if n < 0:
        raise DomainError("n must be nonnegative")
    if n == 0:
        return 0.0
    d_star = worst_case_tolerance(eps, env.c1, env.p, env.q)
    gap = eps - env.c1 * d_star**env.p
    return 2.0 * n / env.c2 * gap * gap * d_star**env.q


def optimal_separation(problem_class: str, p: float, q: float, c1: float, c2: float, n: int) -> float:
    """The separation eps at which the hardest pair maximizes the error floor
    for horizon n."""
    if min(p, c1, c2) <= 0 or q < 0 or n <= 0:
        raise DomainError("need positive p, c1, c2, n and nonnegative q")
    if problem_class == "convex_smooth":
        k1 = (2.0 * p / (math.sqrt(c2) * (2.0 * p + q))) * (q / (c1 * (2.0 * p + q))) ** (q / (2.0 * p))
        return (2.0 * p / (math.sqrt(n) * k1 * (4.0 * p + q))) ** (2.0 * p / (2.0 * p + q))
    if problem_class == "strongly_convex":
        k1 = (p / (math.sqrt(c2) * (p + q / 2.0))) * (q / (2.0 * c1 * (p + q / 2.0))) ** (q / (2.0 * p))
        return (4.0 * p / ((6.0 * p + q) * math.sqrt(n) * k1)) ** (2.0 * p / (2.0 * p + q))
    raise DomainError(f"unknown problem class {problem_class!r}")


def minimax_lower_bound(
    problem_class: str, p: float, q: float, c1: float, c2: float, n: int, d: int = 1
) -> float:
    """Closed-form floor on the optimization error of any algorithm that sees
    n replies from a (C1 d^p, C2 d^-q) biased-gradient oracle."""
    if min(p, c1, c2) <= 0 or q < 0 or n <= 0 or d < 1:
        raise DomainError("need positive p, c1, c2, n, d and nonnegative q")
    two_pq = 2.0 * p + q
    if problem_class == "convex_smooth":
        powers = c1 ** (q / two_pq) * c2 ** (p / two_pq) * n ** (-p / two_pq)
        if d == 1:
            k = two_pq**2 / (4.0 * q ** (q / two_pq) * (4.0 * p + q) ** ((4.0 * p + q) / two_pq))
            return k * powers
        k = two_pq**2 / (2.0 * q ** (q / two_pq) * (4.0 * p + q) ** ((4.0 * p + q) / two_pq))
        return math.sqrt(d) * k * powers
    if problem_class == "strongly_convex":
        k = (
            2.0 ** ((2.0 * p - q) / two_pq)
            * two_pq**3
            / (q ** (2.0 * q / two_pq) * (6.0 * p + q) ** ((6.0 * p + q) / two_pq))
        )
        return k * c1 ** (2.0 * q / two_pq) * c2 ** (2.0 * p / two_pq) * n ** (-2.0 * p / two_pq)
    raise DomainError(f"unknown problem class {problem_class!r}")


# ---------------------------------------------------------------------------
# Hard instance + oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class HardInstance:
    """One arm of a 1-d hard pair: the function for sign v plus the envelope
    of the adversarial oracle attached to it."""

    problem_class: str  # "convex_smooth" | "strongly_convex"
    v: int
    eps: float
    envelope: OracleEnvelope

    def __post_init__(self) -> None:
        if self.problem_class not in ("convex_smooth", "strongly_convex"):
            raise DomainError(f"unknown problem class {self.problem_class!r}")
        if self.v not in (+1, -1):
            raise DomainError("v must be +1 or -1")
        if self.eps <= 0:
            raise DomainError("eps must be positive")
        if self.problem_class == "convex_smooth" and self.eps >= EPS_CAP_CONVEX:
            raise DomainError(
                f"eps must stay below 1/(4 ln 2) ~ {EPS_CAP_CONVEX:.4f} for the convex pair"
            )
        if self.envelope.oracle_type != "type_I":
            raise DomainError("hard instances use type-I envelopes")
        if self.envelope.p <= 0 or self.envelope.c1 <= 0:
            raise DomainError("degenerate bias envelope (p or C1 zero) is not supported")

    def objective(self) -> ObjectiveFunction:
        if self.problem_class == "convex_smooth":
            return softabs(self.v, self.eps)
        return strongly_convex_pair(self.v, self.eps)

    def mean_response(self, x, delta: float):
        if self.problem_class == "convex_smooth":
            return mean_response_convex(self.v, x, delta, self.eps, self.envelope.c1, self.envelope.p)
        return mean_response_strongly_convex(self.v, x, delta, self.eps, self.envelope.c1, self.envelope.p)

    def oracle(self) -> "AdversarialOracle":
        return AdversarialOracle(instance=self)


@dataclass(frozen=True, eq=False)
class AdversarialOracle:
    """The biased, clipped, Gaussian-noise oracle of a hard instance.

    The reply mean is closed-form; noise is N(0, C2*delta^-q), drawn fresh
    per query; the evaluation point is always the query point itself.
    """

    instance: HardInstance

    dim = 1
    unbiased = True  # Y = x deterministically

    @property
    def target(self) -> ObjectiveFunction:
        cached = getattr(self, "_target", None)
        if cached is None:
            cached = self.instance.objective()
            object.__setattr__(self, "_target", cached)
        return cached

    @property
    def envelope(self) -> OracleEnvelope:
        return self.instance.envelope

    def query(self, x, delta: float, rng: np.random.Generator) -> OracleResponse:
        q = OracleQuery(x, delta)
        mean = float(self.instance.mean_response(float(q.x[0]), delta))
        sd = math.sqrt(self.envelope.c2_value(delta))
        g = mean + sd * rng.standard_normal()
        return checked_response(np.array([g]), q.x, q)

    def sample_gradients(self, x, delta, m, rng, antithetic: bool = False) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        mean = float(self.instance.mean_response(float(x[0]), delta))
        sd = math.sqrt(self.envelope.c2_value(delta))
        return (mean + sd * rng.standard_normal(m)).reshape(m, 1)

    def make_stepper(self, n: int, delta: float, rng: np.random.Generator):
        sd = math.sqrt(self.envelope.c2_value(delta))
        noise = (sd * rng.standard_normal(n)).tolist()
        inst = self.instance
        eps = inst.eps
        shift = min(eps, inst.envelope.c1 * delta**inst.envelope.p)
        if inst.problem_class == "strongly_convex":
            offset = -inst.v * eps + inst.v * shift

            def step(t: int, x: float):
                return x + offset + noise[t], x

            return step

        tanh = math.tanh
        inv2e = 0.5 / eps
        v = inst.v

        def step(t: int, x: float):
            gp = eps * tanh((x - 1.0) * inv2e)
            gm = eps * tanh((x + 1.0) * inv2e)
            if v == +1:
                mean = gp + shift if x < 0 else min(gp + shift, gm - shift)
            else:
                mean = gm - shift if x > 0 else max(gm - shift, gp + shift)
            return mean + noise[t], x

        return step


def hard_pair(
    problem_class: str,
    p: float,
    q: float,
    c1: float,
    c2: float,
    eps: float,
) -> tuple[HardInstance, HardInstance]:
    env = OracleEnvelope(c1=c1, p=p, c2=c2, q=q, oracle_type="type_I")
    return (
        HardInstance(problem_class, +1, eps, env),
        HardInstance(problem_class, -1, eps, env),
    )


# ---------------------------------------------------------------------------
# Separable d-dimensional composition
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SeparableAdversarialOracle:
    """Coordinatewise composition of 1-d hard-instance oracles.

    With per-coordinate envelopes scaled to (C1/sqrt(d), C2/d), the composed
    oracle satisfies the d-dimensional (C1, C2) envelope under the Euclidean
    norm: squared biases and variances add across coordinates.
    """

    instances: tuple[HardInstance, ...]

    def __post_init__(self) -> None:
        classes = {inst.problem_class for inst in self.instances}
        if len(classes) != 1:
            raise DomainError("separable composition requires a single problem class")

    @property
    def dim(self) -> int:
        return len(self.instances)

    unbiased = True

    @property
    def envelope(self) -> OracleEnvelope:
        first = self.instances[0].envelope
        c1 = math.sqrt(sum(inst.envelope.c1**2 for inst in self.instances))
        c2 = sum(inst.envelope.c2 for inst in self.instances)
        return OracleEnvelope(c1=c1, p=first.p, c2=c2, q=first.q, oracle_type="type_I")

    @property
    def target(self) -> ObjectiveFunction:
        cached = getattr(self, "_target", None)
        if cached is None:
            cached = separable([inst.objective() for inst in self.instances])
            object.__setattr__(self, "_target", cached)
        return cached

    def mean_response(self, x: np.ndarray, delta: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.array(
            [float(inst.mean_response(float(x[i]), delta)) for i, inst in enumerate(self.instances)]
        )

    def query(self, x, delta: float, rng: np.random.Generator) -> OracleResponse:
        q = OracleQuery(x, delta)
        mean = self.mean_response(q.x, delta)
        sds = np.array([math.sqrt(inst.envelope.c2_value(delta)) for inst in self.instances])
        g = mean + sds * rng.standard_normal(self.dim)
        return checked_response(g, q.x, q)

    def sample_gradients(self, x, delta, m, rng, antithetic: bool = False) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        mean = self.mean_response(x, delta)
        sds = np.array([math.sqrt(inst.envelope.c2_value(delta)) for inst in self.instances])
        return mean + sds * rng.standard_normal((m, self.dim))

    def make_stepper(self, n: int, delta: float, rng: np.random.Generator):
        sds = np.array([math.sqrt(inst.envelope.c2_value(delta)) for inst in self.instances])
        noise = sds * rng.standard_normal((n, self.dim))

        def step(t: int, x: np.ndarray):
            return self.mean_response(x, delta) + noise[t], x

        return step


def compose_separable(instances: Sequence[HardInstance]) -> SeparableAdversarialOracle:
    """Compose 1-d hard instances into a d-dimensional separable oracle;
    mixing problem classes is an error."""
    if not instances:
        raise DomainError("compose_separable needs at least one instance")
    return SeparableAdversarialOracle(instances=tuple(instances))


def scaled_hard_coordinates(
    problem_class: str, p: float, q: float, c1: float, c2: float, eps: float, v: Sequence[int]
) -> SeparableAdversarialOracle:
    """Build the d-dim separable oracle whose coordinates carry the scaled
    envelopes (c1/sqrt(d), c2/d), so the composition meets (c1, c2)."""
    d = len(v)
    env = OracleEnvelope(c1=c1 / math.sqrt(d), p=p, c2=c2 / d, q=q, oracle_type="type_I")
    return compose_separable([HardInstance(problem_class, vi, eps, env) for vi in v])


# ---------------------------------------------------------------------------
# Deterministic validation grids
# ---------------------------------------------------------------------------

GRID_X = np.linspace(-2.0, 2.0, 401)
GRID_DELTA = np.logspace(-3.0, 0.0, 25)


def bias_excess_on_grid(instance: HardInstance) -> float:
    """max over the (x, delta) grid of |mean - f'| - c1*delta^p; analytically
    <= 0, so anything above float roundoff is a violation."""
    f = instance.objective()
    worst = -math.inf
    for delta in GRID_DELTA:
        mean = instance.mean_response(GRID_X, delta)
        true_grad = np.asarray(f.gradient(GRID_X), dtype=float)
        excess = np.abs(mean - true_grad) - instance.envelope.c1_value(delta)
        worst = max(worst, float(np.max(excess)))
    return worst


def convex_gap_slack(eps: float) -> float:
    """Exact crossing residual of the smooth-convex pair at the clip point.

    The two shifted slopes meet everywhere except at the branch point x = 0,
    where the sign conventions clip on opposite sides; the leftover gap is
    2*eps*(1 - tanh(1/(2*eps))), exponentially small in 1/eps.  The nominal
    bound 2*(eps - c1*d^p)+ holds everywhere else.
    """
    return 2.0 * eps * (1.0 - math.tanh(0.5 / eps))


def gap_deviation_on_grid(plus: HardInstance, minus: HardInstance) -> tuple[float, float]:
    """(max excess of |mean+ - mean-| over the gap bound including the
       branch-point slack, max |identity defect| for the strongly convex
       family, whose gap identity is exact)."""
    slack = convex_gap_slack(plus.eps) if plus.problem_class == "convex_smooth" else 0.0
    worst_excess = -math.inf
    worst_defect = 0.0
    for delta in GRID_DELTA:
        target = 2.0 * max(plus.eps - plus.envelope.c1_value(delta), 0.0)
        gap = np.abs(
            plus.mean_response(GRID_X, delta) - minus.mean_response(GRID_X, delta)
        )
        worst_excess = max(worst_excess, float(np.max(gap - target)) - slack)
        if plus.problem_class == "strongly_convex":
            worst_defect = max(worst_defect, float(np.max(np.abs(gap - target))))
    return worst_excess, worst_defect
