"""Zeroth-order gradient oracles built from noisy function evaluations.

Three estimator families are provided behind one interface:

* one-point:  G = (f(x + d*U) + noise) * V / d
* two-point:  G = (Z+ - Z-) * V / (2*d) with Z± evaluated at x ± d*U
* smoothing:  the one-point estimator with surface sampling of the unit
  ball (V = d*U, U uniform on the sphere), which is unbiased for the
  ball-averaged surrogate of f.

Perturbation laws (U, V) satisfy E[V U^T] = I; supported choices are
symmetric +-1 coordinates with reciprocal weights, the uniform sphere of
radius sqrt(d), the standard Gaussian, and uniform surface sampling.
Each oracle exports the bias/variance envelope of its (class, noise) cell
with constants assembled from Monte Carlo moments of (U, V).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import (
    DomainError,
    EUCLIDEAN,
    MAX_NORM,
    Norm,
    OracleEnvelope,
    OracleQuery,
    OracleResponse,
    checked_response,
)
from .testbed import ObjectiveFunction

SCHEME_KINDS = ("spsa", "rdsa", "sf", "surface")


@dataclass(frozen=True)
class PerturbationScheme:
    """A joint law for the probe direction U and the weight vector V."""

    kind: str

    def __post_init__(self) -> None:
        if self.kind not in SCHEME_KINDS:
            raise DomainError(f"unknown perturbation scheme {self.kind!r}")

    def sample_u(self, d: int, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` directions, shape (size, d)."""
        if self.kind == "spsa":
            return rng.integers(0, 2, size=(size, d)).astype(float) * 2.0 - 1.0
        if self.kind == "sf":
            return rng.standard_normal((size, d))
        z = rng.standard_normal((size, d))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        if self.kind == "rdsa":
            return z * math.sqrt(d)
        return z  # surface: uniform on the unit sphere

    def v_of(self, u: np.ndarray) -> np.ndarray:
        if self.kind == "spsa":
            return 1.0 / u
        if self.kind == "surface":
            return u.shape[-1] * u
        return u

    def vicinity_norm(self, d: int) -> Norm:
        return MAX_NORM if self.kind == "spsa" else EUCLIDEAN

    def u_bound(self, d: int) -> float:
        """sup ||U|| under the vicinity norm (inf for the Gaussian scheme)."""
        if self.kind == "spsa":
            return 1.0
        if self.kind == "surface":
            return 1.0
        if self.kind == "rdsa":
            return math.sqrt(d)
        return math.inf


SPSA = PerturbationScheme("spsa")
RDSA = PerturbationScheme("rdsa")
SF = PerturbationScheme("sf")
SURFACE = PerturbationScheme("surface")


# ---------------------------------------------------------------------------
# Noise models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UncontrolledNoise:
    """Additive Gaussian evaluation noise, independent per evaluation."""

    sigma: float = 0.0

    kind = "uncontrolled"

    def __post_init__(self) -> None:
        if self.sigma < 0:
            raise DomainError("sigma must be nonnegative")


@dataclass(frozen=True, eq=False)
class ControlledNoise:
    """Common-random-numbers observation model Z = observe(x, psi).

    The algorithm owns the seed psi, reusing one draw for both evaluations of
    a two-point query; f(x) must equal the psi-average of observe(x, psi).
    ``smoothness_bound`` bounds sqrt(E[L_psi^2]) for observe(., psi);
    ``grad_sq_bound`` bounds sup_x E_psi ||grad_x observe(x, psi)||_*^2 (falls
    back to the target's squared gradient bound when None); ``residual_sq``
    bounds E[(xi+ - xi-)^2] of the non-cancelling noise part (zero for purely
    additive noise).
    """

    observe: Callable  # (x, psi) -> float, vectorized over x and psi in 1-d
    psi_sample: Callable  # (rng, size) -> np.ndarray
    smoothness_bound: float
    residual_sq: float = 0.0
    grad_sq_bound: Optional[float] = None
    observe_scalar: Optional[Callable[[float, float], float]] = None

    kind = "controlled"


def additive_controlled(
    f: ObjectiveFunction, sigma: float, slope: float = 0.0
) -> ControlledNoise:
    """Z = f(x) + sigma*psi*(1 + slope*x) with psi ~ N(0, 1), for 1-d targets.

    With slope = 0 this is the canonical common-random-numbers model where a
    two-point query cancels the noise exactly.  A nonzero slope keeps the
    cancellation of the common level but leaves a state-independent residual
    sigma*psi*slope*u*v in the two-point estimate, i.e. the constant-variance
    regime that cannot be averaged away by shrinking delta.
    """
    if f.dim != 1:
        raise DomainError("additive_controlled is a 1-d observation model")
    if f.value_scalar is not None:
        fs = f.value_scalar
        obs_s = lambda x, psi: fs(x) + sigma * psi * (1.0 + slope * x)
    else:
        obs_s = None
    b1 = f.sup_gradient_dual()
    return ControlledNoise(
        observe=lambda x, psi: f.value(x) + sigma * psi * (1.0 + slope * x),
        psi_sample=lambda rng, size: rng.standard_normal(size),
        smoothness_bound=f.smoothness,
        residual_sq=4.0 * sigma**2 * slope**2,  # |x+ - x-| <= 2 delta <= 2
        grad_sq_bound=b1**2 + sigma**2 * slope**2,
        observe_scalar=obs_s,
    )


NoiseModel = UncontrolledNoise | ControlledNoise


# ---------------------------------------------------------------------------
# Monte Carlo moments of (U, V), cached per (scheme, d, norm)
# ---------------------------------------------------------------------------

_MOMENT_SAMPLES = 1_000_000
_MOMENT_SEED = 852_654_618
_moment_cache: dict[tuple[str, int, str], dict[str, float]] = {}


def scheme_moments(scheme: PerturbationScheme, d: int, norm: Norm = EUCLIDEAN) -> dict[str, float]:
    """E[|V|* |U|^k] moments used by the envelope constants; the draw is
    seeded per cache key so envelopes are bit-reproducible."""
    key = (scheme.kind, d, norm.kind)
    if key in _moment_cache:
        return _moment_cache[key]
    stream = np.random.default_rng(
        np.random.SeedSequence(_MOMENT_SEED, spawn_key=(SCHEME_KINDS.index(scheme.kind), d, 0 if norm.kind == "euclidean" else 1))
    )
    sums = np.zeros(4)
    block = 200_000
    done = 0
    while done < _MOMENT_SAMPLES:
        m = min(block, _MOMENT_SAMPLES - done)
        u = scheme.sample_u(d, stream, m)
        v = scheme.v_of(u)
        if norm.kind == "euclidean":
            v_dual = np.linalg.norm(v, axis=1)
            u_norm = np.linalg.norm(u, axis=1)
        else:
            v_dual = np.sum(np.abs(v), axis=1)
            u_norm = np.max(np.abs(u), axis=1)
        sums += np.array(
            [
                np.sum(v_dual * u_norm**2),
                np.sum(v_dual**2),
                np.sum(v_dual * u_norm**3),
                np.sum(v_dual**2 * u_norm**4),
            ]
        )
        done += m
    moments = {
        "v_u2": sums[0] / _MOMENT_SAMPLES,
        "v2": sums[1] / _MOMENT_SAMPLES,
        "v_u3": sums[2] / _MOMENT_SAMPLES,
        "v2_u4": sums[3] / _MOMENT_SAMPLES,
    }
    _moment_cache[key] = moments
    return moments


def ball_mean_square_radius(d: int) -> float:
    """E||w||^2 for w uniform in the unit ball: d / (d + 2)."""
    return d / (d + 2.0)


# ---------------------------------------------------------------------------
# Envelope table
# ---------------------------------------------------------------------------


def envelope_for(
    function_class: str,
    noise: NoiseModel,
    feedback: str,
    scheme: PerturbationScheme,
    f: ObjectiveFunction,
    norm: Norm = EUCLIDEAN,
) -> OracleEnvelope:
    """Bias/variance envelope of the (class, noise, feedback) cell.

    Unsupported combinations (controlled one-point, surface two-point,
    C^3 constants for functions without a third-derivative bound) raise
    DomainError.
    """
    if function_class not in ("convex_smooth", "c3"):
        raise DomainError(f"unknown function class {function_class!r}")
    if feedback not in ("one_point", "two_point"):
        raise DomainError(f"unknown feedback {feedback!r}")
    m = scheme_moments(scheme, f.dim, norm)
    L = f.smoothness

    if function_class == "c3":
        if f.third_derivative_bound is None:
            raise DomainError(f"{f.name} carries no third-derivative bound")
        c1, p = f.third_derivative_bound / 6.0 * m["v_u3"], 2.0
    elif feedback == "one_point" and scheme.kind == "surface":
        # ball-averaged surrogate: unbiased for the smoothed function
        c1, p = L / 2.0 * ball_mean_square_radius(f.dim), 2.0
    else:
        smooth = noise.smoothness_bound if isinstance(noise, ControlledNoise) else L
        c1, p = smooth / 2.0 * m["v_u2"], 1.0

    if isinstance(noise, UncontrolledNoise):
        if feedback == "one_point":
            c2 = 4.0 * m["v2"] * (noise.sigma**2 + f.sup_abs() ** 2)
        else:
            c2 = 4.0 * m["v2"] * (2.0 * noise.sigma**2 + f.span())
        q = 2.0
    else:
        if feedback == "one_point":
            raise DomainError("controlled noise requires two-point feedback")
        if function_class == "convex_smooth":
            b1_sq = noise.grad_sq_bound if noise.grad_sq_bound is not None else f.sup_gradient_dual(norm) ** 2
            c2 = 2.0 * b1_sq + noise.smoothness_bound**2 / 2.0 * m["v2_u4"]
            q = 0.0
        else:
            c2 = 4.0 * m["v2"] * (noise.residual_sq + f.span())
            q = 2.0

    oracle_type = "type_II" if (feedback == "one_point" and scheme.kind == "surface") else "type_I"
    return OracleEnvelope(c1=c1, p=p, c2=c2, q=q, oracle_type=oracle_type)


# ---------------------------------------------------------------------------
# The estimator oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EstimatorOracle:
    """A gradient oracle realized by noisy point evaluations of ``target``."""

    target: ObjectiveFunction
    scheme: PerturbationScheme
    noise: NoiseModel
    feedback: str  # "one_point" | "two_point"
    function_class: str = "convex_smooth"
    norm: Norm = EUCLIDEAN
    _envelope: list = field(default_factory=list, repr=False)

    def __post_init__(self) -> None:
        if self.feedback not in ("one_point", "two_point"):
            raise DomainError(f"unknown feedback {self.feedback!r}")
        if isinstance(self.noise, ControlledNoise) and self.feedback == "one_point":
            raise DomainError("controlled noise requires two-point feedback")
        if self.scheme.kind == "surface" and self.feedback == "two_point":
            raise DomainError("surface sampling is a one-point construction")

    @property
    def dim(self) -> int:
        return self.target.dim

    @property
    def unbiased(self) -> bool:
        """E[Y] = x: true for every scheme here (symmetric U, or Y = x)."""
        return True

    @property
    def envelope(self) -> OracleEnvelope:
        if not self._envelope:
            self._envelope.append(
                envelope_for(
                    self.function_class, self.noise, self.feedback, self.scheme, self.target, self.norm
                )
            )
        return self._envelope[0]

    def _reports_eval_point(self) -> bool:
        return self.scheme.u_bound(self.dim) <= 1.0

    # -- single query -------------------------------------------------------

    def query(self, x: np.ndarray, delta: float, rng: np.random.Generator) -> OracleResponse:
        q = OracleQuery(x, delta)
        if not self.target.domain.contains(q.x):
            raise DomainError(f"query point {q.x} escapes the domain")
        u = self.scheme.sample_u(self.dim, rng, 1)
        v = self.scheme.v_of(u)
        if self.dim == 1:
            g = np.atleast_1d(self._kernel_1d(float(q.x[0]), delta, u[:, 0], v[:, 0], rng, False))
        else:
            g = self._kernel_nd(q.x, delta, u[0], v[0], rng, False)
        y = q.x + delta * u[0] if self._reports_eval_point() else q.x
        return checked_response(g, y, q, self.scheme.vicinity_norm(self.dim))

    # -- vectorized sampling (probes) ----------------------------------------

    def sample_gradients(
        self,
        x: np.ndarray,
        delta: float,
        m: int,
        rng: np.random.Generator,
        antithetic: bool = False,
    ) -> np.ndarray:
        """Draw ``m`` independent gradient estimates at (x, delta).

        With ``antithetic=True`` each row is the average of the estimates at
        +U and -U (same noise law); the mean is unchanged, the spread of the
        mean estimate collapses, so bias probes converge far faster.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        d = self.dim
        u = self.scheme.sample_u(d, rng, m)
        v = self.scheme.v_of(u)
        if d == 1:
            g = self._kernel_1d(float(x[0]), delta, u[:, 0], v[:, 0], rng, antithetic)
            return g.reshape(m, 1)
        rows = np.empty((m, d))
        for i in range(m):
            rows[i] = self._kernel_nd(x, delta, u[i], v[i], rng, antithetic)
        return rows

    def _kernel_1d(self, x, delta, u, v, rng, antithetic):
        f = self.target.value
        m = u.shape[0]
        if self.feedback == "one_point":
            assert isinstance(self.noise, UncontrolledNoise)
            sig = self.noise.sigma
            zp = f(x + delta * u) + (sig * rng.standard_normal(m) if sig > 0 else 0.0)
            if not antithetic:
                return zp * v / delta
            zm = f(x - delta * u) + (sig * rng.standard_normal(m) if sig > 0 else 0.0)
            return 0.5 * (zp * v + zm * (-v)) / delta
        if isinstance(self.noise, UncontrolledNoise):
            sig = self.noise.sigma
            zp = f(x + delta * u) + (sig * rng.standard_normal(m) if sig > 0 else 0.0)
            zm = f(x - delta * u) + (sig * rng.standard_normal(m) if sig > 0 else 0.0)
            return (zp - zm) * v / (2.0 * delta)
        psi = self.noise.psi_sample(rng, m)
        zp = self.noise.observe(x + delta * u, psi)
        zm = self.noise.observe(x - delta * u, psi)
        return (zp - zm) * v / (2.0 * delta)

    def _kernel_nd(self, x, delta, u, v, rng, antithetic):
        f = self.target
        if self.feedback == "one_point":
            assert isinstance(self.noise, UncontrolledNoise)
            sig = self.noise.sigma
            zp = f.value_at(x + delta * u) + (sig * rng.standard_normal() if sig > 0 else 0.0)
            if not antithetic:
                return zp * v / delta
            zm = f.value_at(x - delta * u) + (sig * rng.standard_normal() if sig > 0 else 0.0)
            return 0.5 * (zp * v - zm * v) / delta
        if isinstance(self.noise, UncontrolledNoise):
            sig = self.noise.sigma
            zp = f.value_at(x + delta * u) + (sig * rng.standard_normal() if sig > 0 else 0.0)
            zm = f.value_at(x - delta * u) + (sig * rng.standard_normal() if sig > 0 else 0.0)
            return (zp - zm) * v / (2.0 * delta)
        psi = float(self.noise.psi_sample(rng, 1)[0])
        zp = self.noise.observe(x + delta * u, psi)
        zm = self.noise.observe(x - delta * u, psi)
        return (zp - zm) * v / (2.0 * delta)

    # -- solver hot path ------------------------------------------------------

    def make_stepper(self, n: int, delta: float, rng: np.random.Generator):
        """Precompute n steps of randomness and return step(t, x) -> (g, y).

        For 1-d targets the closure works on plain floats; the returned y is
        the evaluation point when the scheme keeps ||x - y|| <= delta under
        its vicinity norm, and x itself otherwise.
        """
        d = self.dim
        if d != 1:
            return self._make_stepper_nd(n, delta, rng)
        u_arr = self.scheme.sample_u(1, rng, n)[:, 0]
        v_arr = self.scheme.v_of(u_arr.reshape(-1, 1))[:, 0]
        U = (delta * u_arr).tolist()
        V = v_arr.tolist()
        fs = self.target.value_scalar or (lambda x: float(self.target.value(x)))
        reports_eval = self._reports_eval_point()

        if self.feedback == "one_point":
            sig = self.noise.sigma
            XI = (sig * rng.standard_normal(n)).tolist() if sig > 0 else [0.0] * n
            inv = 1.0 / delta

            def step(t: int, x: float):
                du = U[t]
                y = x + du
                g = (fs(y) + XI[t]) * V[t] * inv
                return g, (y if reports_eval else x)

            return step

        inv2 = 1.0 / (2.0 * delta)
        if isinstance(self.noise, UncontrolledNoise):
            sig = self.noise.sigma
            if sig > 0:
                XI = (sig * rng.standard_normal((n, 2)))
                XP, XM = XI[:, 0].tolist(), XI[:, 1].tolist()
            else:
                XP = XM = [0.0] * n

            def step(t: int, x: float):
                du = U[t]
                yp = x + du
                g = (fs(yp) + XP[t] - fs(x - du) - XM[t]) * V[t] * inv2
                return g, (yp if reports_eval else x)

            return step

        PSI = np.asarray(self.noise.psi_sample(rng, n), dtype=float).tolist()
        obs = self.noise.observe_scalar or (lambda x, p: float(self.noise.observe(x, p)))

        def step(t: int, x: float):
            du = U[t]
            psi = PSI[t]
            yp = x + du
            g = (obs(yp, psi) - obs(x - du, psi)) * V[t] * inv2
            return g, (yp if reports_eval else x)

        return step

    def _make_stepper_nd(self, n: int, delta: float, rng: np.random.Generator):
        u_all = self.scheme.sample_u(self.dim, rng, n)
        v_all = self.scheme.v_of(u_all)
        reports_eval = self._reports_eval_point()
        noise = self.noise
        f = self.target
        if self.feedback == "one_point":
            xi = noise.sigma * rng.standard_normal(n) if noise.sigma > 0 else np.zeros(n)

            def step(t: int, x: np.ndarray):
                y = x + delta * u_all[t]
                g = (f.value_at(y) + xi[t]) / delta * v_all[t]
                return g, (y if reports_eval else x)

            return step
        if isinstance(noise, UncontrolledNoise):
            xi = noise.sigma * rng.standard_normal((n, 2)) if noise.sigma > 0 else np.zeros((n, 2))

            def step(t: int, x: np.ndarray):
                yp = x + delta * u_all[t]
                ym = x - delta * u_all[t]
                g = (f.value_at(yp) + xi[t, 0] - f.value_at(ym) - xi[t, 1]) / (2 * delta) * v_all[t]
                return g, (yp if reports_eval else x)

            return step
        psi = np.asarray(noise.psi_sample(rng, n), dtype=float)

        def step(t: int, x: np.ndarray):
            yp = x + delta * u_all[t]
            ym = x - delta * u_all[t]
            g = (noise.observe(yp, psi[t]) - noise.observe(ym, psi[t])) / (2 * delta) * v_all[t]
            return g, (yp if reports_eval else x)

        return step


@dataclass(frozen=True, eq=False)
class ExactGradientOracle:
    """Noise- and bias-free reference oracle: G = grad f(x), Y = x."""

    target: ObjectiveFunction

    @property
    def dim(self) -> int:
        return self.target.dim

    unbiased = True

    @property
    def envelope(self) -> OracleEnvelope:
        return OracleEnvelope(c1=0.0, p=1.0, c2=0.0, q=0.0)

    def query(self, x: np.ndarray, delta: float, rng: np.random.Generator) -> OracleResponse:
        q = OracleQuery(x, delta)
        return checked_response(self.target.gradient_at(q.x), q.x, q)

    def sample_gradients(self, x, delta, m, rng, antithetic=False) -> np.ndarray:
        g = self.target.gradient_at(np.atleast_1d(x))
        return np.tile(g, (m, 1))

    def make_stepper(self, n: int, delta: float, rng: np.random.Generator):
        if self.dim == 1:
            gs = self.target.gradient_scalar or (lambda x: float(self.target.gradient(x)))
            return lambda t, x: (gs(x), x)
        return lambda t, x: (self.target.gradient_at(x), x)


# ---------------------------------------------------------------------------
# Named operations
# ---------------------------------------------------------------------------


def one_point_estimate(oracle: EstimatorOracle, query: OracleQuery, rng: np.random.Generator) -> OracleResponse:
    if oracle.feedback != "one_point":
        raise DomainError("oracle is not a one-point estimator")
    return oracle.query(query.x, query.delta, rng)


def two_point_estimate(oracle: EstimatorOracle, query: OracleQuery, rng: np.random.Generator) -> OracleResponse:
    if oracle.feedback != "two_point":
        raise DomainError("oracle is not a two-point estimator")
    return oracle.query(query.x, query.delta, rng)


def smoothing_estimate(oracle: EstimatorOracle, query: OracleQuery, rng: np.random.Generator) -> OracleResponse:
    if oracle.feedback != "one_point" or oracle.scheme.kind != "surface":
        raise DomainError("smoothing requires one-point surface sampling")
    return oracle.query(query.x, query.delta, rng)


def smoothing_oracle(
    f: ObjectiveFunction, sigma: float = 0.0, function_class: str = "convex_smooth"
) -> EstimatorOracle:
    return EstimatorOracle(
        target=f,
        scheme=SURFACE,
        noise=UncontrolledNoise(sigma),
        feedback="one_point",
        function_class=function_class,
    )


def smoothed_eval(
    f: ObjectiveFunction,
    x: np.ndarray,
    delta: float,
    samples: int,
    rng: np.random.Generator,
) -> float:
    """Monte Carlo value of the unit-ball average of f around x, the surrogate
    the smoothing estimator is unbiased for. Test-side instrument only."""
    if samples < 1:
        raise DomainError("samples must be >= 1")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = f.dim
    if d == 1:
        w = rng.uniform(-1.0, 1.0, size=samples)
        return float(np.mean(f.value(x[0] + delta * w)))
    z = rng.standard_normal((samples, d))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    r = rng.random(samples) ** (1.0 / d)
    pts = x + delta * z * r[:, None]
    return float(np.mean([f.value_at(p) for p in pts]))
