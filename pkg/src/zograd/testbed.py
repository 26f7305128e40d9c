"""Objective functions with exact gradients and known optima.

Every function is evaluable on a margin-dilated copy of its domain so that
estimators probing ``x + delta*u`` with ``delta <= 1`` stay inside.  The 1-d
factories expose both vectorized (numpy) and scalar (math) evaluation paths;
the scalar path feeds the solver's hot loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import Box, ConvexBody, DomainError, Norm, EUCLIDEAN, interval


@dataclass(frozen=True, eq=False)
class ObjectiveFunction:
    """An evaluatable convex objective with exact gradient and known optimum.

    ``smoothness`` and ``strong_convexity`` are the usual Euclidean constants
    (gradient Lipschitz constant L, curvature lower bound mu).  For 1-d
    functions ``value``/``gradient`` broadcast over numpy arrays, and
    ``value_scalar``/``gradient_scalar`` are plain-float fast paths.
    """

    name: str
    dim: int
    domain: ConvexBody
    smoothness: float
    strong_convexity: float
    value: Callable
    gradient: Callable
    f_star: float
    x_star: Optional[np.ndarray]
    third_derivative_bound: Optional[float] = None
    value_scalar: Optional[Callable[[float], float]] = None
    gradient_scalar: Optional[Callable[[float], float]] = None
    margin: float = 1.0

    def value_at(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        if self.dim == 1:
            return float(self.value(float(x.reshape(()) if x.ndim == 0 else x[0])))
        return float(self.value(x))

    def gradient_at(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.dim == 1:
            g = self.gradient(float(x.reshape(()) if x.ndim == 0 else x[0]))
            return np.array([float(g)])
        return np.asarray(self.gradient(x), dtype=float)

    # -- sups over the margin-dilated domain (envelope bookkeeping) --------

    def _search_points(self, dilated: bool, n_random: int = 100_000) -> np.ndarray:
        body = self.domain.dilate(self.margin) if dilated and isinstance(self.domain, Box) else self.domain
        if isinstance(body, Box):
            if self.dim == 1:
                return np.linspace(body.lower[0], body.upper[0], 10_000)
            if self.dim == 2:
                side = np.linspace(0.0, 1.0, 300)
                g1, g2 = np.meshgrid(
                    body.lower[0] + side * (body.upper[0] - body.lower[0]),
                    body.lower[1] + side * (body.upper[1] - body.lower[1]),
                )
                return np.stack([g1.ravel(), g2.ravel()], axis=1)
            rng = np.random.default_rng(711)
            u = rng.random((n_random, self.dim))
            return body.lower + u * (body.upper - body.lower)
        # ball: random directions at random radii (plus the center)
        rng = np.random.default_rng(711)
        z = rng.standard_normal((n_random, self.dim))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        r = body.radius * rng.random((n_random, 1)) ** (1.0 / self.dim)
        return body.center + z * r

    def sup_abs(self) -> float:
        """sup |f| over the margin-dilated domain (grid / random search)."""
        pts = self._search_points(dilated=True)
        vals = self._eval_many(pts)
        return float(np.max(np.abs(vals)))

    def span(self) -> float:
        """sup f - inf f over the margin-dilated domain."""
        vals = self._eval_many(self._search_points(dilated=True))
        return float(np.max(vals) - np.min(vals))

    def sup_gradient_dual(self, norm: Norm = EUCLIDEAN, dilated: bool = False) -> float:
        pts = self._search_points(dilated=dilated)
        if self.dim == 1:
            g = np.asarray(self.gradient(pts), dtype=float)
            return float(np.max(np.abs(g)))
        return max(norm.dual_value(self.gradient_at(p)) for p in pts[:20_000])

    def _eval_many(self, pts: np.ndarray) -> np.ndarray:
        if self.dim == 1:
            return np.asarray(self.value(pts), dtype=float)
        return np.array([self.value_at(p) for p in pts[:20_000]])


# ---------------------------------------------------------------------------
# 1-d families
# ---------------------------------------------------------------------------


def softabs(v: int, eps: float, domain: ConvexBody | None = None) -> ObjectiveFunction:
    """Smooth surrogate of ``eps*|x - v|`` with curvature capped at 1/2.

    f(x) = eps*(x - v) + 2*eps^2*log(1 + exp(-(x - v)/eps)), minimized at
    x = v with value 2*eps^2*log(2).  The gradient is eps*tanh((x-v)/(2*eps)),
    so |f'| < eps and 0 <= f'' <= 1/2 everywhere.
    """
    if eps <= 0:
        raise DomainError("eps must be positive")
    if v not in (+1, -1):
        raise DomainError("v must be +1 or -1")
    dom = domain if domain is not None else interval(-1.0, 1.0)
    e = float(eps)
    vf = float(v)

    def value(x):
        u = (np.asarray(x, dtype=float) - vf) / e
        return e * (x - vf) + 2.0 * e * e * np.logaddexp(0.0, -u)

    def grad(x):
        u = (np.asarray(x, dtype=float) - vf) / e
        return e * np.tanh(0.5 * u)

    def value_s(x: float) -> float:
        u = (x - vf) / e
        # log(1 + e^-u) without overflow for |u| > 700
        log_term = -min(u, 0.0) + math.log1p(math.exp(-abs(u)))
        return e * (x - vf) + 2.0 * e * e * log_term

    def grad_s(x: float) -> float:
        return e * math.tanh(0.5 * (x - vf) / e)

    return ObjectiveFunction(
        name=f"softabs(v={v:+d},eps={eps})",
        dim=1,
        domain=dom,
        smoothness=0.5,
        strong_convexity=0.0,
        value=value,
        gradient=grad,
        f_star=2.0 * e * e * math.log(2.0),
        x_star=np.array([vf]),
        third_derivative_bound=1.0 / (3.0 * math.sqrt(3.0) * e),
        value_scalar=value_s,
        gradient_scalar=grad_s,
    )


def strongly_convex_pair(v: int, eps: float, domain: ConvexBody | None = None) -> ObjectiveFunction:
    """Unit-curvature parabola with minimizer nudged to ``v*eps``:
    f(x) = x^2/2 - v*eps*x, f* = -eps^2/2."""
    if eps <= 0:
        raise DomainError("eps must be positive")
    if v not in (+1, -1):
        raise DomainError("v must be +1 or -1")
    dom = domain if domain is not None else interval(-1.0, 1.0)
    ve = float(v) * float(eps)

    return ObjectiveFunction(
        name=f"sc_pair(v={v:+d},eps={eps})",
        dim=1,
        domain=dom,
        smoothness=1.0,
        strong_convexity=1.0,
        value=lambda x: 0.5 * np.asarray(x, dtype=float) ** 2 - ve * np.asarray(x, dtype=float),
        gradient=lambda x: np.asarray(x, dtype=float) - ve,
        f_star=-0.5 * ve * ve,
        x_star=np.array([ve]),
        third_derivative_bound=0.0,
        value_scalar=lambda x: 0.5 * x * x - ve * x,
        gradient_scalar=lambda x: x - ve,
    )


def kinked_quadratic(
    a_neg: float = 0.5, a_pos: float = 1.5, domain: ConvexBody | None = None
) -> ObjectiveFunction:
    """Strictly convex, L-smooth, but not C^2: curvature jumps at the origin.

    f(x) = a(x)*x^2/2 with a(x) = a_neg for x < 0 and a_pos otherwise.  The
    gradient a(x)*x is continuous and Lipschitz; the one-sided curvatures
    differ, which is what gives single-evaluation estimators their
    first-order bias at the kink.
    """
    if a_neg <= 0 or a_pos <= 0:
        raise DomainError("curvatures must be positive")
    dom = domain if domain is not None else interval(-1.0, 1.0)
    an, ap = float(a_neg), float(a_pos)

    def value(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.where(x < 0, an, ap) * x * x

    def grad(x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0, an, ap) * x

    return ObjectiveFunction(
        name=f"kinked({a_neg},{a_pos})",
        dim=1,
        domain=dom,
        smoothness=max(an, ap),
        strong_convexity=min(an, ap),
        value=value,
        gradient=grad,
        f_star=0.0,
        x_star=np.array([0.0]),
        third_derivative_bound=None,
        value_scalar=lambda x: 0.5 * (an if x < 0 else ap) * x * x,
        gradient_scalar=lambda x: (an if x < 0 else ap) * x,
    )


def exp_one_d(domain: ConvexBody | None = None) -> ObjectiveFunction:
    """f(x) = exp(x) - x: strictly convex, C^infinity, nonvanishing third
    derivative (the workhorse for quadratic-bias slope measurements)."""
    dom = domain if domain is not None else interval(-1.0, 1.0)
    if not isinstance(dom, Box):
        raise DomainError("exp_one_d expects an interval domain")
    hi = dom.upper[0] + 1.0
    lo = dom.lower[0] - 1.0

    return ObjectiveFunction(
        name="exp_minus_linear",
        dim=1,
        domain=dom,
        smoothness=math.exp(hi),
        strong_convexity=math.exp(lo),
        value=lambda x: np.exp(np.asarray(x, dtype=float)) - np.asarray(x, dtype=float),
        gradient=lambda x: np.exp(np.asarray(x, dtype=float)) - 1.0,
        f_star=1.0,
        x_star=np.array([0.0]),
        third_derivative_bound=math.exp(hi),
        value_scalar=lambda x: math.exp(x) - x,
        gradient_scalar=lambda x: math.exp(x) - 1.0,
    )


# ---------------------------------------------------------------------------
# d-dimensional families
# ---------------------------------------------------------------------------


def quadratic(
    a_diag: Sequence[float],
    b: Sequence[float] | None = None,
    domain: ConvexBody | None = None,
    offset: float = 0.0,
) -> ObjectiveFunction:
    """Diagonal quadratic f(x) = sum a_i x_i^2 / 2 + b.x + offset with
    L = max a_i and mu = min a_i; the minimizer is the unconstrained vertex
    projected into the domain (exact for boxes by separability).

    The constant offset does not move gradients or errors, but it does set
    the absolute evaluation level that single-evaluation estimators divide
    by delta, so it is part of the instance.
    """
    a = np.atleast_1d(np.asarray(a_diag, dtype=float))
    if np.any(a < 0):
        raise DomainError("curvatures must be nonnegative")
    d = a.size
    bvec = np.zeros(d) if b is None else np.atleast_1d(np.asarray(b, dtype=float))
    if bvec.size != d:
        raise DomainError("b must match the dimension of a_diag")
    dom = domain if domain is not None else Box(-np.ones(d), np.ones(d))
    if dom.dim != d:
        raise DomainError("domain dimension mismatch")
    c0 = float(offset)

    if d == 1:
        a0, b0 = float(a[0]), float(bvec[0])
        value = lambda x: 0.5 * a0 * np.asarray(x, dtype=float) ** 2 + b0 * np.asarray(x, dtype=float) + c0
        grad = lambda x: a0 * np.asarray(x, dtype=float) + b0
        value_s = lambda x: 0.5 * a0 * x * x + b0 * x + c0
        grad_s = lambda x: a0 * x + b0
    else:
        value = lambda x: float(0.5 * np.dot(a * x, x) + np.dot(bvec, x)) + c0
        grad = lambda x: a * np.asarray(x, dtype=float) + bvec
        value_s = grad_s = None

    x_star = _quadratic_minimizer(a, bvec, dom)
    if d == 1:
        f_star = float(value(float(x_star[0])))
    else:
        f_star = float(value(x_star))
    return ObjectiveFunction(
        name=f"quadratic(d={d})",
        dim=d,
        domain=dom,
        smoothness=float(np.max(a)),
        strong_convexity=float(np.min(a)),
        value=value,
        gradient=grad,
        f_star=f_star,
        x_star=x_star,
        third_derivative_bound=0.0,
        value_scalar=value_s,
        gradient_scalar=grad_s,
    )


def _quadratic_minimizer(a: np.ndarray, b: np.ndarray, dom: ConvexBody) -> np.ndarray:
    if isinstance(dom, Box):
        x = np.empty_like(a)
        for i in range(a.size):
            if a[i] > 0:
                x[i] = -b[i] / a[i]
            elif b[i] > 0:
                x[i] = dom.lower[i]
            elif b[i] < 0:
                x[i] = dom.upper[i]
            else:
                x[i] = dom.center[i]
        return dom.project(x)
    if np.all(a == a[0]) and a[0] > 0:
        return dom.project(-b / a[0])
    # ball with nonuniform curvature: deterministic projected-gradient refine
    lam = float(np.max(a)) if np.max(a) > 0 else 1.0
    x = dom.project(np.zeros_like(a))
    for _ in range(100_000):
        x_new = dom.project(x - (a * x + b) / lam)
        if float(np.max(np.abs(x_new - x))) < 1e-15:
            return x_new
        x = x_new
    return x


def separable(components: Sequence[ObjectiveFunction]) -> ObjectiveFunction:
    """Coordinatewise sum of 1-d objectives: diagonal Hessian, so the smooth
    and strongly-convex constants are the max/min of the components'."""
    comps = list(components)
    if not comps:
        raise DomainError("separable needs at least one component")
    for c in comps:
        if c.dim != 1 or not isinstance(c.domain, Box):
            raise DomainError("separable components must be 1-d with interval domains")
    d = len(comps)
    lower = np.array([c.domain.lower[0] for c in comps])
    upper = np.array([c.domain.upper[0] for c in comps])
    dom = Box(lower, upper)

    def value(x):
        x = np.asarray(x, dtype=float)
        return float(sum(float(c.value(x[i])) for i, c in enumerate(comps)))

    def grad(x):
        x = np.asarray(x, dtype=float)
        return np.array([float(c.gradient(x[i])) for i, c in enumerate(comps)])

    b3s = [c.third_derivative_bound for c in comps]
    x_stars = [c.x_star for c in comps]
    return ObjectiveFunction(
        name=f"separable[{','.join(c.name for c in comps)}]",
        dim=d,
        domain=dom,
        smoothness=max(c.smoothness for c in comps),
        strong_convexity=min(c.strong_convexity for c in comps),
        value=value,
        gradient=grad,
        f_star=float(sum(c.f_star for c in comps)),
        x_star=None if any(x is None for x in x_stars) else np.array([float(x[0]) for x in x_stars]),
        third_derivative_bound=None if any(v is None for v in b3s) else max(b3s),
        margin=min(c.margin for c in comps),
    )


# ---------------------------------------------------------------------------
# Gradient validation
# ---------------------------------------------------------------------------


def finite_diff_check(
    f: ObjectiveFunction,
    samples: int,
    rng: np.random.Generator,
    step: float = 1e-5,
) -> float:
    """Worst relative error of the exact gradient against central differences
    at random interior points; denominators fall back to 1 for flat regions."""
    if samples < 1:
        raise DomainError("samples must be >= 1")
    worst = 0.0
    for _ in range(samples):
        x = _random_interior_point(f.domain, rng)
        g = f.gradient_at(x)
        fd = np.empty_like(g)
        for i in range(f.dim):
            e = np.zeros(f.dim)
            e[i] = step
            fd[i] = (f.value_at(x + e) - f.value_at(x - e)) / (2.0 * step)
        err = float(np.linalg.norm(fd - g)) / max(float(np.linalg.norm(g)), 1.0)
        worst = max(worst, err)
    return worst


def _random_interior_point(body: ConvexBody, rng: np.random.Generator) -> np.ndarray:
    if isinstance(body, Box):
        u = rng.random(body.dim)
        return body.lower + u * (body.upper - body.lower)
    z = rng.standard_normal(body.dim)
    z /= np.linalg.norm(z)
    r = body.radius * rng.random() ** (1.0 / body.dim)
    return body.center + r * z
