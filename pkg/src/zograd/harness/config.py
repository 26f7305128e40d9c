"""Experiment configuration: one flat dataclass, JSON on disk, CLI overrides.

Validation failures name the offending field, e.g.
``ConfigError("replications: must be a positive integer")``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Optional


class ConfigError(ValueError):
    pass


DEFAULT_HORIZONS = (1_000, 3_000, 10_000, 30_000, 100_000, 300_000, 1_000_000)

ESTIMATORS = ("one-point", "smoothing", "spsa", "rdsa", "sf", "exact")
PROBLEM_CLASSES = ("convex", "sc")
NOISE_KINDS = ("uncontrolled", "controlled")


@dataclass
class ExperimentConfig:
    """Everything a rate/regret/lower-bound/probe run needs, round-trippable
    through JSON without loss."""

    experiment: str = "rate"
    problem_class: str = "convex"
    estimator: str = "smoothing"
    noise: str = "uncontrolled"
    sigma: float = 1.0
    noise_slope: float = 1.0
    function: dict = field(default_factory=lambda: {"name": "auto"})
    horizons: tuple[int, ...] = DEFAULT_HORIZONS
    replications: int = 16
    master_seed: int = 20260810
    out: Optional[str] = None
    workers: int = 1
    tolerance: float = 0.08
    # lower-bound / regret envelope parameters
    p: Optional[float] = None
    q: Optional[float] = None
    c1: Optional[float] = None
    c2: Optional[float] = None
    n: int = 10_000
    # probe parameters
    oracle_spec: Optional[str] = None
    delta_grid: tuple[float, ...] = (0.5, 0.2, 0.1, 0.05)
    probe_reps: int = 100_000

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in ("rate", "regret", "lowerbound", "probe", "check"):
            raise ConfigError(f"experiment: unknown kind {self.experiment!r}")
        if self.problem_class not in PROBLEM_CLASSES:
            raise ConfigError(f"problem_class: must be one of {PROBLEM_CLASSES}")
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"estimator: must be one of {ESTIMATORS}")
        if self.noise not in NOISE_KINDS:
            raise ConfigError(f"noise: must be one of {NOISE_KINDS}")
        if self.sigma < 0:
            raise ConfigError("sigma: must be nonnegative")
        if not isinstance(self.function, dict) or "name" not in self.function:
            raise ConfigError("function.name: required")
        if self.noise_slope < 0:
            raise ConfigError("noise_slope: must be nonnegative")
        if not self.horizons or any(int(h) < 1 for h in self.horizons):
            raise ConfigError("horizons: must be positive integers")
        if list(self.horizons) != sorted(set(int(h) for h in self.horizons)):
            raise ConfigError("horizons: must be strictly increasing")
        if self.replications < 1:
            raise ConfigError("replications: must be a positive integer")
        if self.workers < 1:
            raise ConfigError("workers: must be a positive integer")
        if self.n < 1:
            raise ConfigError("n: must be a positive integer")
        if self.tolerance <= 0:
            raise ConfigError("tolerance: must be positive")
        for name in ("p", "q", "c1", "c2"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ConfigError(f"{name}: must be nonnegative")
        if any(d <= 0 or d > 1 for d in self.delta_grid):
            raise ConfigError("delta_grid: entries must lie in (0, 1]")
        if self.probe_reps < 32:
            raise ConfigError("probe_reps: must be at least 32")
        return self

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["horizons"] = list(self.horizons)
        d["delta_grid"] = list(self.delta_grid)
        return d

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"{sorted(unknown)[0]}: unknown field")
        kwargs = dict(data)
        if "horizons" in kwargs:
            kwargs["horizons"] = tuple(int(h) for h in kwargs["horizons"])
        if "delta_grid" in kwargs:
            kwargs["delta_grid"] = tuple(float(d) for d in kwargs["delta_grid"])
        return cls(**kwargs).validate()

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json_file(cls, path: str | Path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file: invalid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file: top level must be an object")
        return cls.from_dict(data)

    def with_overrides(self, **overrides: Any) -> "ExperimentConfig":
        data = self.to_dict()
        for key, value in overrides.items():
            if value is not None:
                data[key] = value
        return ExperimentConfig.from_dict(data)
