"""Experiment configuration: validation, YAML loading and a stable hash."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any

import yaml

from .montecarlo import DEFAULT_TAU, RULES, RuleConfig
from .noise import PhenomenologicalParams


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    rule: str = "ssr"
    n: int = 9
    eps_d: float = 0.03
    eps_m: float = 0.03
    tau: int = DEFAULT_TAU
    trials: int = 100_000
    budget_flips: int | None = None
    seed: int = 0
    k_a: int = 3
    k_b: int = 3
    workers: int = 1
    words: int = 16
    code_capacity: bool = False
    periodic: bool = True
    diagonal: int = 1
    c: float = 2.0
    boundary: str = "agree"
    out: str | None = None
    snapshot_every: int = 1

    def __post_init__(self):
        if self.rule not in RULES:
            raise ConfigError(f"rule must be one of {RULES}, got {self.rule!r}")
        for name in ("n", "tau", "trials", "workers", "words", "snapshot_every"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        for name in ("eps_d", "eps_m"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not 0.0 <= v <= 1.0 or math.isnan(v):
                raise ConfigError(f"{name} must lie in [0, 1], got {v!r}")
        if self.budget_flips is not None and (not isinstance(self.budget_flips, int) or self.budget_flips < 1):
            raise ConfigError(f"budget_flips must be a positive integer, got {self.budget_flips!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")
        if self.rule in ("asr", "ssr"):
            if self.k_a < 3:
                raise ConfigError(f"k_a must be >= 3, got {self.k_a}")
            if self.k_b < 2:
                raise ConfigError(f"k_b must be >= 2, got {self.k_b}")
        if self.rule == "shearing" and (self.n % 2 or self.n < 4):
            raise ConfigError(f"the shearing rule needs an even n >= 4, got {self.n}")
        if self.rule == "toom" and math.isqrt(self.n) ** 2 != self.n:
            raise ConfigError(f"Toom's rule needs a square n, got {self.n}")
        if self.code_capacity and self.rule not in ("asr", "ssr"):
            raise ConfigError("code-capacity mode needs a signal rule")
        if self.diagonal not in (1, -1):
            raise ConfigError("diagonal must be +1 or -1")
        if self.boundary not in ("agree", "periodic"):
            raise ConfigError("boundary must be 'agree' or 'periodic'")
        if not self.c > 0:
            raise ConfigError("c must be positive")

    @classmethod
    def from_mapping(cls, data: dict[str, Any]) -> "ExperimentConfig":
        data = _normalize(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def with_overrides(self, **kw) -> "ExperimentConfig":
        """New config with the non-``None`` entries of ``kw`` replacing the current values."""
        merged = asdict(self)
        merged.update(_normalize(kw))
        return ExperimentConfig.from_mapping(merged)

    def as_dict(self) -> dict:
        return asdict(self)

    def hash(self) -> str:
        """Hash of everything that influences the results (output paths and worker count excluded)."""
        d = self.as_dict()
        for k in ("out", "workers", "snapshot_every"):
            d.pop(k)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    @property
    def rule_config(self) -> RuleConfig:
        return RuleConfig(self.rule, self.k_a, self.k_b, self.periodic, self.diagonal, self.c, self.boundary)

    @property
    def noise(self) -> PhenomenologicalParams:
        return PhenomenologicalParams(float(self.eps_d), float(self.eps_m))

    def point(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)


def _normalize(data: dict) -> dict:
    """Accept flag spellings (``eps-d``, ``ka``) and the shorthand ``eps`` for both noise rates."""
    out = {k.replace("-", "_"): v for k, v in data.items() if v is not None}
    for short, full in (("ka", "k_a"), ("kb", "k_b")):
        if short in out:
            out[full] = out.pop(short)
    if "eps" in out:
        eps = out.pop("eps")
        out.setdefault("eps_d", eps)
        out.setdefault("eps_m", eps)
    return out


def load_config_file(path) -> dict:
    """Read a YAML (or JSON) mapping of configuration keys."""
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a mapping")
    return data
