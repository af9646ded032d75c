"""trendmon: dynamic keyword monitoring for fast-evolving document streams.

Tracks a capped keyword set over a time-stamped corpus by retraining word
embeddings each round, forecasting keyword frequency trajectories, and
updating the tracked set automatically or through a human-in-the-loop
proposal workflow, plus a replay simulator that scores monitors against
ground-truth trending hashtags.
"""

__version__ = "0.1.0"

from .corpus import CorpusWindow, Document, FrequencySeries, Token, filter_window, ingest, tokenize
from .embedding import EmbeddingModel, build_cooccurrence, nearest_neighbors, project_2d, train_glove
from .evaluation import f1, jaccard, simulate
from .forecast import ArimaSpec, Forecast, difference, fit_grid, forecast, prepare
from .policy import (KeywordSet, PolicyWeights, baseline_last_top, baseline_static,
                     expand_candidates, next_keywords_auto, next_keywords_semi)

__all__ = [
    "ArimaSpec", "CorpusWindow", "Document", "EmbeddingModel", "Forecast",
    "FrequencySeries", "KeywordSet", "PolicyWeights", "Token",
    "baseline_last_top", "baseline_static", "build_cooccurrence", "difference",
    "expand_candidates", "f1", "filter_window", "fit_grid", "forecast", "ingest",
    "jaccard", "nearest_neighbors", "next_keywords_auto", "next_keywords_semi",
    "prepare", "project_2d", "simulate", "tokenize", "train_glove",
]
