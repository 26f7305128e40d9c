"""Domains, norms, randomness contract, and the gradient-oracle interface.

The conventions shared by every estimator and adversarial instance live here:

* queries carry a point ``x`` and a tolerance ``delta`` in ``(0, 1]``;
* responses carry a gradient estimate ``g`` and an evaluation point ``y``
  with ``||x - y|| <= delta`` under the oracle's vicinity norm;
* an oracle declares its bias/variance envelope ``c1(d) = C1 * d**p`` and
  ``c2(d) = C2 * d**-q``.

All types here are immutable value objects and safe to share across workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np


class DomainError(ValueError):
    """An argument escaped the contract it was declared under."""


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------

_DUAL_KIND = {"euclidean": "euclidean", "max": "one", "one": "max"}


@dataclass(frozen=True)
class Norm:
    """A norm on R^d. ``euclidean`` and ``max`` are the primal choices;
    ``one`` arises as the dual of ``max``."""

    kind: str = "euclidean"

    def __post_init__(self) -> None:
        if self.kind not in _DUAL_KIND:
            raise DomainError(f"unknown norm kind {self.kind!r}")

    def value(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        if self.kind == "euclidean":
            return float(np.sqrt(np.sum(x * x)))
        if self.kind == "max":
            return float(np.max(np.abs(x))) if x.size else 0.0
        return float(np.sum(np.abs(x)))

    def dual(self) -> "Norm":
        return Norm(_DUAL_KIND[self.kind])

    def dual_value(self, g: np.ndarray) -> float:
        return self.dual().value(g)


EUCLIDEAN = Norm("euclidean")
MAX_NORM = Norm("max")


def dual_norm(norm: Norm, g: np.ndarray) -> float:
    """Value of the dual norm: euclidean -> l2, max -> l1."""
    return norm.dual_value(g)


# ---------------------------------------------------------------------------
# Convex bodies
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned box ``[lower, upper]`` with nonempty interior."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        up = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != up.shape or lo.ndim != 1:
            raise DomainError("box bounds must be 1-d arrays of equal length")
        if not np.all(lo < up):
            raise DomainError("box must have a nonempty interior (lower < upper)")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def project(self, x: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)

    def contains(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def dilate(self, margin: float) -> "Box":
        return Box(self.lower - margin, self.upper + margin)

    def sup_norm(self, norm: Norm = EUCLIDEAN) -> float:
        """sup over the box of ||x||; attained at a vertex."""
        corner = np.maximum(np.abs(self.lower), np.abs(self.upper))
        return norm.value(corner)


@dataclass(frozen=True, eq=False)
class Ball:
    """Euclidean ball of positive radius."""

    center: np.ndarray
    radius: float

    def __post_init__(self) -> None:
        c = np.atleast_1d(np.asarray(self.center, dtype=float))
        if self.radius <= 0:
            raise DomainError("ball must have a nonempty interior (radius > 0)")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:
        return self.center.size

    def project(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        offset = x - self.center
        dist = float(np.sqrt(np.sum(offset * offset)))
        if dist <= self.radius:
            return x.copy()
        return self.center + offset * (self.radius / dist)

    def contains(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        return float(np.linalg.norm(x - self.center)) <= self.radius + tol

    def sup_norm(self, norm: Norm = EUCLIDEAN) -> float:
        return norm.value(self.center) + self.radius * (
            1.0 if norm.kind != "one" else np.sqrt(self.dim)
        )


ConvexBody = Union[Box, Ball]


def project(body: ConvexBody, x: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the body: componentwise clamp for boxes,
    radial scaling for balls. Total and idempotent."""
    return body.project(x)


def interval(lower: float, upper: float) -> Box:
    """Convenience constructor for a 1-d box."""
    return Box(np.array([lower]), np.array([upper]))


# ---------------------------------------------------------------------------
# Queries, responses, envelopes
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OracleQuery:
    """A point in the domain plus the bias/variance tolerance knob."""

    x: np.ndarray
    delta: float

    def __post_init__(self) -> None:
        if not (0.0 < self.delta <= 1.0):
            raise DomainError(f"delta must lie in (0, 1], got {self.delta}")
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, dtype=float)))
        object.__setattr__(self, "delta", float(self.delta))


@dataclass(frozen=True, eq=False)
class OracleResponse:
    """Gradient estimate ``g`` and the evaluation point ``y`` charged for it."""

    g: np.ndarray
    y: np.ndarray


def checked_response(
    g: np.ndarray,
    y: np.ndarray,
    query: OracleQuery,
    vicinity_norm: Norm = EUCLIDEAN,
) -> OracleResponse:
    """Build a response, asserting ``||x - y|| <= delta`` (up to roundoff)."""
    g = np.atleast_1d(np.asarray(g, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    dist = vicinity_norm.value(y - query.x)
    if dist > query.delta * (1.0 + 1e-12) + 1e-15:
        raise DomainError(
            f"evaluation point escaped the delta-vicinity: ||x-y||={dist} > {query.delta}"
        )
    return OracleResponse(g=g, y=y)


@dataclass(frozen=True)
class OracleEnvelope:
    """The declared bias/variance contract ``(C1 * d**p, C2 * d**-q)``."""

    c1: float
    p: float
    c2: float
    q: float
    oracle_type: str = "type_I"  # or "type_II"

    def __post_init__(self) -> None:
        if self.c1 < 0 or self.c2 < 0 or self.p < 0 or self.q < 0:
            raise DomainError("envelope coefficients and exponents must be nonnegative")
        if self.oracle_type not in ("type_I", "type_II"):
            raise DomainError(f"unknown oracle type {self.oracle_type!r}")

    def c1_value(self, delta: float) -> float:
        return self.c1 * delta**self.p

    def c2_value(self, delta: float) -> float:
        return self.c2 * delta ** (-self.q)

    def scaled(self, c1_factor: float, c2_factor: float) -> "OracleEnvelope":
        return OracleEnvelope(
            self.c1 * c1_factor, self.p, self.c2 * c2_factor, self.q, self.oracle_type
        )


def envelope_check(env: OracleEnvelope, delta: float) -> tuple[float, float]:
    """Evaluate ``(c1(delta), c2(delta))``; delta outside (0, 1] is an error."""
    if not (0.0 < delta <= 1.0):
        raise DomainError(f"delta must lie in (0, 1], got {delta}")
    return env.c1_value(delta), env.c2_value(delta)


# ---------------------------------------------------------------------------
# Randomness contract
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RngStream:
    """Counter-style stream derivation: the generator is a pure function of
    ``(master_seed, stream_id)``, so parallel replications are reproducible
    independent of execution order."""

    master_seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_id,))
        return np.random.default_rng(seq)

    def child(self, substream: int) -> "RngStream":
        seq_id = (self.stream_id << 20) + substream
        return RngStream(self.master_seed, seq_id)


def stream_generator(master_seed: int, stream_id: int = 0) -> np.random.Generator:
    return RngStream(master_seed, stream_id).generator()
