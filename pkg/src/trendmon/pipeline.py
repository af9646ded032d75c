"""One monitor round end to end: embeddings from the filtered window, frequency
history bookkeeping, per-token forecasts, and the inputs the policy consumes.
Shared by the replay simulator and the long-running service."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from datetime import datetime, timedelta

from .config import ForecastConfig, GloveConfig, PolicyConfig
from .corpus import CorpusWindow, FrequencySeries, Token, document_counts, frequency_series
from .embedding import EmbeddingModel, build_cooccurrence, train_glove
from .errors import InsufficientDataError, TrendmonError
from .forecast import ArimaFit, Forecast, PreparedSeries, fit_and_forecast, prepare
from .policy import KeywordSet, expand_candidates

logger = logging.getLogger(__name__)


@dataclass
class FrequencyHistory:
    """Per-token document counts on a global bucket grid that grows one window
    at a time. Tokens missing from a window get zero-filled."""

    origin: datetime | None = None
    bucket_width: timedelta | None = None
    n_buckets: int = 0
    counts: dict[str, list[int]] = field(default_factory=dict)
    max_buckets: int | None = 512

    def extend(self, window: CorpusWindow, tokens) -> None:
        width = window.bucket_width
        if self.origin is None:
            self.origin = window.start
            self.bucket_width = width
        elif width != self.bucket_width:
            raise ValueError("bucket width changed mid-history")
        new = {}
        for surface in tokens:
            series = frequency_series(window, surface, width)
            new[surface] = series.counts
        added = len(next(iter(new.values()))) if new else 0
        for surface, counts in new.items():
            row = self.counts.setdefault(surface, [0] * self.n_buckets)
            row.extend(counts)
        for surface, row in self.counts.items():
            if len(row) < self.n_buckets + added:
                row.extend([0] * (self.n_buckets + added - len(row)))
        self.n_buckets += added
        if self.max_buckets and self.n_buckets > self.max_buckets:
            drop = self.n_buckets - self.max_buckets
            for row in self.counts.values():
                del row[:drop]
            self.origin = self.origin + drop * self.bucket_width
            self.n_buckets = self.max_buckets

    def series(self, surface: str) -> FrequencySeries:
        if self.origin is None or self.n_buckets == 0:
            raise InsufficientDataError("history is empty")
        row = self.counts.get(surface, [0] * self.n_buckets)
        buckets = tuple((self.origin + i * self.bucket_width, row[i])
                        for i in range(self.n_buckets))
        return FrequencySeries(token=Token.from_surface(surface),
                               bucket_width=self.bucket_width, buckets=buckets)


@dataclass
class RoundArtifacts:
    window: CorpusWindow
    model: EmbeddingModel
    counts: dict[str, int]
    candidates: list[str]
    forecasts: dict[str, Forecast | None]
    fits: dict[str, ArimaFit]
    prepared: dict[str, PreparedSeries]
    failures: dict[str, str]


def compute_round(window: CorpusWindow, keywords: KeywordSet,
                  history: FrequencyHistory, glove_cfg: GloveConfig,
                  forecast_cfg: ForecastConfig, policy_cfg: PolicyConfig) -> RoundArtifacts:
    """Train embeddings on the filtered window, expand candidates, extend the
    frequency history, and forecast every token of interest. A token whose
    forecast fails degrades to None instead of failing the round."""
    vocab, cooc = build_cooccurrence(window, vocab_min_count=glove_cfg.min_count,
                                     context_window=glove_cfg.context_window)
    model = train_glove(vocab, cooc, d=glove_cfg.dim, epochs=glove_cfg.epochs,
                        seed=glove_cfg.seed, x_max=glove_cfg.x_max,
                        alpha=glove_cfg.alpha, learning_rate=glove_cfg.learning_rate,
                        threads=glove_cfg.threads)
    candidates = expand_candidates(keywords, model, k=policy_cfg.neighbor_k)
    counts = document_counts(window)
    tracked = set(keywords.keywords) | set(candidates)
    history.extend(window, tokens=sorted(set(vocab.surfaces) | tracked))
    forecasts: dict[str, Forecast | None] = {}
    fits: dict[str, ArimaFit] = {}
    prepared: dict[str, PreparedSeries] = {}
    failures: dict[str, str] = {}
    for surface in sorted(tracked):
        try:
            series = prepare(history.series(surface))
            prepared[surface] = series
            fit, fc = fit_and_forecast(series, forecast_cfg)
            fits[surface] = fit
            forecasts[surface] = fc
        except TrendmonError as exc:
            forecasts[surface] = None
            failures[surface] = str(exc)
            logger.debug("no forecast for %r: %s", surface, exc)
    return RoundArtifacts(window=window, model=model, counts=counts,
                          candidates=candidates, forecasts=forecasts, fits=fits,
                          prepared=prepared, failures=failures)
