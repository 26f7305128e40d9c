"""Monte Carlo verification of oracle bias/variance contracts."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..core import DomainError, EUCLIDEAN, Norm
from .fitting import ols_loglog

_BATCHES = 32


def _row_dual_sq(rows: np.ndarray, norm: Norm) -> np.ndarray:
    if rows.shape[1] == 1:
        return rows[:, 0] ** 2
    dual_kind = norm.dual().kind
    if dual_kind == "euclidean":
        return np.sum(rows * rows, axis=1)
    if dual_kind == "one":
        return np.sum(np.abs(rows), axis=1) ** 2
    return np.max(np.abs(rows), axis=1) ** 2


@dataclass(frozen=True)
class ProbeResult:
    delta: float
    bias_est: float
    bias_se: float
    var_est: float
    var_se: float
    replications: int


def probe_bias_variance(
    oracle,
    x,
    delta: float,
    reps: int,
    rng: np.random.Generator,
    norm: Norm = EUCLIDEAN,
    antithetic: bool = False,
) -> ProbeResult:
    """Estimate ||E G - grad f(x)||_* and E||G - E G||_*^2 at (x, delta).

    Standard errors come from 32 batch means.  ``antithetic=True`` averages
    each draw with its mirrored perturbation; the bias estimate is unchanged
    in expectation but concentrates much faster (use it for slope fits, not
    for variance estimation).
    """
    if reps < _BATCHES:
        raise DomainError(f"need at least {_BATCHES} replications")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    g = oracle.sample_gradients(x, delta, reps, rng, antithetic=antithetic)
    grad = oracle.target.gradient_at(x)
    dual = norm.dual_value

    mean_g = g.mean(axis=0)
    bias_est = dual(mean_g - grad)
    var_est = float(np.mean(_row_dual_sq(g - mean_g, norm)))

    per = reps // _BATCHES
    biases = np.empty(_BATCHES)
    variances = np.empty(_BATCHES)
    for b in range(_BATCHES):
        chunk = g[b * per : (b + 1) * per]
        biases[b] = dual(chunk.mean(axis=0) - grad)
        variances[b] = float(np.mean(_row_dual_sq(chunk - chunk.mean(axis=0), norm)))
    return ProbeResult(
        delta=float(delta),
        bias_est=float(bias_est),
        bias_se=float(biases.std(ddof=1) / np.sqrt(_BATCHES)),
        var_est=var_est,
        var_se=float(variances.std(ddof=1) / np.sqrt(_BATCHES)),
        replications=reps,
    )


def bias_slope(
    oracle,
    x,
    deltas: Sequence[float],
    reps: int,
    rng: np.random.Generator,
    norm: Norm = EUCLIDEAN,
) -> tuple[float, list[ProbeResult]]:
    """Least-squares slope of log(bias) against log(delta), measured with
    antithetic pairs so the Monte Carlo mean is tight."""
    results = [
        probe_bias_variance(oracle, x, d, reps, rng, norm, antithetic=True) for d in deltas
    ]
    slope, _, _ = ols_loglog([r.delta for r in results], [max(r.bias_est, 1e-300) for r in results])
    return slope, results


def variance_slope(
    oracle,
    x,
    deltas: Sequence[float],
    reps: int,
    rng: np.random.Generator,
    norm: Norm = EUCLIDEAN,
) -> tuple[float, list[ProbeResult]]:
    results = [probe_bias_variance(oracle, x, d, reps, rng, norm) for d in deltas]
    slope, _, _ = ols_loglog([r.delta for r in results], [r.var_est for r in results])
    return slope, results
