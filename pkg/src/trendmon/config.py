"""Dataclass configs for every stage; a run directory keeps a JSON snapshot of these."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from datetime import timedelta
from pathlib import Path

HOUR = timedelta(hours=1)
MONTH = timedelta(days=30)  # fixed-width rounds keep the differencing grid regular


@dataclass(frozen=True)
class GloveConfig:
    dim: int = 50
    epochs: int = 50
    x_max: float = 100.0
    alpha: float = 0.75
    learning_rate: float = 0.05
    context_window: int = 10
    min_count: int = 5
    seed: int = 0
    threads: int = 1  # >1 trades determinism for speed (lock-free updates)


@dataclass(frozen=True)
class ForecastConfig:
    p_max: int = 3
    d_max: int = 2
    q_max: int = 3
    split_fraction: float = 0.8
    horizon: int = 15
    level: float = 0.95
    trend_epsilon: float = 0.01  # log-scale slope dead-band per bucket
    min_history: int = 8


@dataclass(frozen=True)
class PolicyConfig:
    cap: int = 15
    add_limit: int = 5
    min_count: int = 10
    neighbor_k: int = 30
    stale_age: int = 3
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    delta: float = 0.0
    replace_mode: bool = False  # literal "next set = surviving candidates" ablation


@dataclass(frozen=True)
class RunConfig:
    mode: str = "replay"  # replay | live
    decision_mode: str = "semi"  # manual | semi | auto
    bucket_width_seconds: float = 3600.0
    refresh_interval_seconds: float = 900.0  # floor enforced in live mode
    window_seconds: float = 7 * 24 * 3600.0  # live pull span
    glove: GloveConfig = field(default_factory=GloveConfig)
    forecast: ForecastConfig = field(default_factory=ForecastConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    seed_keywords: tuple[str, ...] = ()

    @property
    def bucket_width(self) -> timedelta:
        return timedelta(seconds=self.bucket_width_seconds)

    @property
    def refresh_interval(self) -> timedelta:
        return timedelta(seconds=self.refresh_interval_seconds)


def _from_dict(cls, data: dict):
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**data)


def load_config(path) -> RunConfig:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    for key, sub in (("glove", GloveConfig), ("forecast", ForecastConfig), ("policy", PolicyConfig)):
        if key in raw and isinstance(raw[key], dict):
            raw[key] = _from_dict(sub, raw[key])
    if "seed_keywords" in raw:
        raw["seed_keywords"] = tuple(raw["seed_keywords"])
    return _from_dict(RunConfig, raw)


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(json.dumps(asdict(cfg), indent=2, default=list) + "\n", encoding="utf-8")
