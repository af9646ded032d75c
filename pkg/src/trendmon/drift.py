"""Seeded synthetic corpus with rotating trending hashtags.

Stands in for the proprietary historical dataset in simulations: each round a
fixed fraction of the trending set retires and newcomers take over, with the
newcomers co-occurring alongside current trends for one round before their
breakout (the bridge that lets an embedding-based monitor spot them early).
Retired tags keep posting at decayed volume so their series visibly decline.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

from .corpus import CorpusWindow, Document


@dataclass(frozen=True)
class DriftConfig:
    rounds: int = 12
    docs_per_round: int = 500
    top_size: int = 20
    rotation: float = 0.2            # fraction of the top set replaced per round
    extra_tags_min: int = 2
    extra_tags_max: int = 4
    filler_words: int = 20
    words_min: int = 2
    words_max: int = 4
    bridge_fraction: float = 0.12    # docs seeding next round's newcomers
    decay_factor: float = 0.25       # retired-tag weight multiplier per round
    decay_rounds: int = 2
    round_width: timedelta = timedelta(days=30)
    buckets_per_round: int = 4
    start: datetime = datetime(2017, 1, 1, tzinfo=timezone.utc)
    seed: int = 7


def _tag(i: int) -> str:
    return f"#topic{i:03d}"


def generate_drift_corpus(cfg: DriftConfig = DriftConfig()) -> list[CorpusWindow]:
    rng = random.Random(cfg.seed)
    k = max(1, round(cfg.rotation * cfg.top_size))
    fillers = [f"noise{i:02d}" for i in range(cfg.filler_words)]
    next_tag = cfg.top_size
    active: list[str] = [_tag(i) for i in range(cfg.top_size)]
    retired: dict[str, int] = {}     # tag -> round it retired
    windows: list[CorpusWindow] = []
    for rnd in range(cfg.rounds):
        if rnd > 0:
            for tag in active[:k]:
                retired[tag] = rnd
            active = active[k:] + [_tag(next_tag + i) for i in range(k)]
            next_tag += k
        upcoming = [_tag(next_tag + i) for i in range(k)]  # next round's newcomers
        weighted: list[tuple[str, float]] = [
            (tag, 1.0 / (rank + 3.0)) for rank, tag in enumerate(reversed(active))]
        for tag, since in list(retired.items()):
            age = rnd - since
            if age >= cfg.decay_rounds:
                del retired[tag]
                continue
            weighted.append((tag, 0.15 * cfg.decay_factor ** age))
        tags = [t for t, _ in weighted]
        weights = [w for _, w in weighted]
        start = cfg.start + rnd * cfg.round_width
        span = cfg.round_width.total_seconds()
        docs = []
        for i in range(cfg.docs_per_round):
            chosen = set(rng.choices(tags, weights=weights,
                                     k=1 + rng.randint(cfg.extra_tags_min, cfg.extra_tags_max)))
            if rnd < cfg.rounds - 1 and rng.random() < cfg.bridge_fraction:
                chosen.add(rng.choice(upcoming))
            words = rng.sample(fillers, rng.randint(cfg.words_min, cfg.words_max))
            parts = sorted(chosen) + words
            rng.shuffle(parts)
            ts = start + timedelta(seconds=rng.uniform(0, span - 1))
            docs.append(Document(id=f"r{rnd:02d}d{i:04d}", timestamp=ts,
                                 text=" ".join(parts)))
        docs.sort(key=lambda d: (d.timestamp, d.id))
        windows.append(CorpusWindow(start=start, end=start + cfg.round_width,
                                    documents=tuple(docs),
                                    bucket_width=cfg.round_width / cfg.buckets_per_round))
    return windows
