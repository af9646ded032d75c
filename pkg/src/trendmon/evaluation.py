"""Scoring monitors against ground-truth trending hashtags (Jaccard, F1) and
the multi-round replay simulation comparing Dynamic, Static, and Last-Top."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .config import ForecastConfig, GloveConfig, PolicyConfig
from .corpus import CorpusWindow, HASHTAG, document_counts, filter_window
from .errors import TrendmonError
from .pipeline import FrequencyHistory, compute_round
from .policy import (KeywordSet, PolicyWeights, RoundInputs, baseline_last_top,
                     next_keywords_auto)

logger = logging.getLogger(__name__)

MONITOR_DYNAMIC = "dynamic"
MONITOR_STATIC = "static"
MONITOR_LAST_TOP = "last-top"


def jaccard(retrieved: Iterable[str], truth: Iterable[str]) -> float:
    """|R ∩ G| / |R ∪ G|; undefined (error) when both sets are empty."""
    r, g = frozenset(retrieved), frozenset(truth)
    if not g:
        raise ValueError("truth set must be non-empty")
    union = r | g
    if not union:
        raise ValueError("jaccard undefined for two empty sets")
    return len(r & g) / len(union)


def f1(retrieved: Iterable[str], truth: Iterable[str]) -> float:
    """Harmonic mean of precision and recall over the two hashtag sets.
    An empty retrieved set scores 0 by convention."""
    r, g = frozenset(retrieved), frozenset(truth)
    if not g:
        raise ValueError("truth set must be non-empty")
    if not r:
        logger.debug("empty retrieved set scores F1=0")
        return 0.0
    hits = len(r & g)
    if hits == 0:
        return 0.0
    precision = hits / len(r)
    recall = hits / len(g)
    return 2.0 * precision * recall / (precision + recall)


def top_hashtags(window: CorpusWindow, m: int) -> tuple[str, ...]:
    """Top-m hashtags by document frequency, ties lexicographic."""
    counts = document_counts(window, kinds=[HASHTAG])
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return tuple(s for s, _ in ranked[:m])


@dataclass(frozen=True)
class GroundTruth:
    round: int
    top_hashtags: tuple[str, ...]


def ground_truth(rounds: Sequence[CorpusWindow], m: int = 20) -> list[GroundTruth]:
    """Per-round top-m hashtags of the full unfiltered corpus."""
    return [GroundTruth(round=t, top_hashtags=top_hashtags(w, m))
            for t, w in enumerate(rounds)]


@dataclass(frozen=True)
class RoundScore:
    round: int
    jaccard: float
    f1: float
    retrieved: tuple[str, ...]
    truth: tuple[str, ...]
    keywords: tuple[str, ...]


@dataclass
class EvaluationReport:
    monitor: str
    per_round: list[RoundScore]
    weights: list[float]
    weighted_f1: float = field(init=False)
    unweighted_f1: float = field(init=False)
    global_jaccard: float = field(init=False)

    def __post_init__(self):
        f1s = [s.f1 for s in self.per_round]
        jacs = [s.jaccard for s in self.per_round]
        self.weighted_f1 = sum(w * v for w, v in zip(self.weights, f1s))
        self.unweighted_f1 = sum(f1s) / len(f1s) if f1s else 0.0
        self.global_jaccard = sum(w * v for w, v in zip(self.weights, jacs))

    def to_dict(self) -> dict:
        return {
            "monitor": self.monitor,
            "global_jaccard": self.global_jaccard,
            "weighted_f1": self.weighted_f1,
            "unweighted_f1": self.unweighted_f1,
            "weights": self.weights,
            "per_round": [{"round": s.round, "jaccard": s.jaccard, "f1": s.f1,
                           "retrieved": list(s.retrieved), "truth": list(s.truth),
                           "keywords": list(s.keywords)}
                          for s in self.per_round],
        }


class _Monitor:
    def __init__(self, name: str, seed: KeywordSet):
        self.name = name
        self.keywords = seed

    def update(self, filtered: CorpusWindow, rnd: int) -> None:
        raise NotImplementedError


class _StaticMonitor(_Monitor):
    def update(self, filtered, rnd):
        pass


class _LastTopMonitor(_Monitor):
    def __init__(self, name, seed, n):
        super().__init__(name, seed)
        self.n = n

    def update(self, filtered, rnd):
        if len(filtered) == 0:
            return
        self.keywords = baseline_last_top(filtered, self.n, round=rnd + 1)


class _DynamicMonitor(_Monitor):
    def __init__(self, name, seed, glove_cfg, forecast_cfg, policy_cfg):
        super().__init__(name, seed)
        self.glove_cfg = glove_cfg
        self.forecast_cfg = forecast_cfg
        self.policy_cfg = policy_cfg
        self.history = FrequencyHistory()
        self.ages = {kw: 0 for kw in seed.keywords}

    def update(self, filtered, rnd):
        if len(filtered) == 0:
            return
        try:
            artifacts = compute_round(filtered, self.keywords, self.history,
                                      self.glove_cfg, self.forecast_cfg, self.policy_cfg)
        except TrendmonError as exc:
            logger.warning("dynamic monitor skipped update at round %d: %s", rnd, exc)
            return
        inputs = RoundInputs(round=rnd, keywords=self.keywords, model=artifacts.model,
                             forecasts=artifacts.forecasts, counts=artifacts.counts,
                             ages=self.ages)
        next_set, _ = next_keywords_auto(
            inputs, PolicyWeights.from_config(self.policy_cfg),
            add_limit=self.policy_cfg.add_limit, min_count=self.policy_cfg.min_count,
            k=self.policy_cfg.neighbor_k, stale_age=self.policy_cfg.stale_age,
            replace_mode=self.policy_cfg.replace_mode)
        self.ages = {kw: self.ages.get(kw, -1) + 1 for kw in next_set.keywords}
        self.keywords = next_set


def _make_monitor(name: str, seed: KeywordSet, n: int, glove_cfg, forecast_cfg,
                  policy_cfg) -> _Monitor:
    if name == MONITOR_STATIC:
        return _StaticMonitor(name, seed)
    if name == MONITOR_LAST_TOP:
        return _LastTopMonitor(name, seed, n)
    if name == MONITOR_DYNAMIC:
        return _DynamicMonitor(name, seed, glove_cfg, forecast_cfg, policy_cfg)
    raise ValueError(f"unknown monitor: {name}")


def simulate(rounds: Sequence[CorpusWindow],
             monitors: Sequence[str] = (MONITOR_DYNAMIC, MONITOR_STATIC, MONITOR_LAST_TOP),
             m: int = 20, n: int = 15,
             glove_cfg: GloveConfig | None = None,
             forecast_cfg: ForecastConfig | None = None,
             policy_cfg: PolicyConfig | None = None) -> dict[str, EvaluationReport]:
    """Replay the corpus round by round. Every monitor starts from the same
    seed (top-n hashtags of round 0), filters each round's corpus with its
    current keywords, and is scored on the top-m hashtags it retrieves against
    the unfiltered ground truth. The dynamic monitor updates after scoring."""
    if len(rounds) < 2:
        raise ValueError("need at least 2 rounds to simulate")
    glove_cfg = glove_cfg or GloveConfig(min_count=2, epochs=30)
    forecast_cfg = forecast_cfg or ForecastConfig(p_max=2, d_max=1, q_max=1)
    policy_cfg = policy_cfg or PolicyConfig(cap=n)
    truth = ground_truth(rounds, m)
    seed = KeywordSet(top_hashtags(rounds[0], n), round=0, cap=n)
    sizes = [len(w) for w in rounds]
    total = sum(sizes) or 1
    weights = [s / total for s in sizes]
    reports: dict[str, EvaluationReport] = {}
    for name in monitors:
        monitor = _make_monitor(name, seed, n, glove_cfg, forecast_cfg, policy_cfg)
        scores: list[RoundScore] = []
        for t, window in enumerate(rounds):
            keywords_now = monitor.keywords.keywords
            filtered = filter_window(window, keywords_now)
            retrieved = top_hashtags(filtered, m) if len(filtered) else ()
            jac = jaccard(retrieved, truth[t].top_hashtags) if retrieved else 0.0
            score = f1(retrieved, truth[t].top_hashtags)
            scores.append(RoundScore(round=t, jaccard=jac, f1=score,
                                     retrieved=retrieved, truth=truth[t].top_hashtags,
                                     keywords=keywords_now))
            monitor.update(filtered, t)
        reports[name] = EvaluationReport(monitor=name, per_round=scores, weights=weights)
    return reports


def format_table(reports: dict[str, EvaluationReport]) -> str:
    """Aligned global-comparison table (Jaccard, weighted and unweighted F1)."""
    header = f"{'Monitor':<12} {'Jaccard':>8} {'Avg. F1 Weighted':>18} {'Avg. F1 Unweighted':>20}"
    lines = [header, "-" * len(header)]
    for name, rep in reports.items():
        lines.append(f"{name:<12} {rep.global_jaccard:>8.4f} "
                     f"{rep.weighted_f1:>18.4f} {rep.unweighted_f1:>20.4f}")
    return "\n".join(lines)


def per_round_csv(reports: dict[str, EvaluationReport]) -> str:
    """Per-round scores as CSV for plotting coverage curves."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["monitor", "round", "jaccard", "f1"])
    for name, rep in reports.items():
        for s in rep.per_round:
            writer.writerow([name, s.round, f"{s.jaccard:.6f}", f"{s.f1:.6f}"])
    return buf.getvalue()


def report_json(reports: dict[str, EvaluationReport]) -> str:
    return json.dumps({name: rep.to_dict() for name, rep in reports.items()}, indent=2)
