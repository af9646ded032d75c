"""Keyword-set update policy: neighbor expansion, virality scoring, automated
and human-in-the-loop rounds, the Static / Last-Top baselines, and the
append-only round log that makes every decision replayable.

The candidate score is the linear combination
    score = alpha * slope + beta * avg_distance + gamma * frequency + delta * variance
with frequency and variance normalized to [0, 1] by the pool maximum.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .config import PolicyConfig
from .corpus import CorpusWindow, HASHTAG, MENTION, Token, document_counts
from .embedding import EmbeddingModel, cosine_similarity, nearest_neighbors
from .errors import KeywordCoverageError, ProposalValidationError, StaleProposalError
from .forecast import Forecast, TREND_DECLINING

logger = logging.getLogger(__name__)

REASON_DECLINING = "declining"
REASON_LOW_FREQUENCY = "low_frequency"
REASON_STALE = "stale"

STATUS_PENDING = "pending"
STATUS_APPROVED = "approved"
STATUS_AMENDED = "amended"
STATUS_AUTO = "auto_applied"


def normalize_keyword(raw: str) -> str:
    surface = raw.strip().lower()
    if not surface or any(c.isspace() for c in surface):
        raise ProposalValidationError("invalid keyword", [raw])
    return surface


@dataclass(frozen=True)
class KeywordSet:
    keywords: tuple[str, ...]
    round: int = 0
    cap: int = 15

    def __post_init__(self):
        if len(self.keywords) > self.cap:
            raise ValueError(f"{len(self.keywords)} keywords exceed cap {self.cap}")
        if len(set(self.keywords)) != len(self.keywords):
            raise ValueError("duplicate keywords after normalization")

    @classmethod
    def build(cls, keywords: Iterable[str], round: int = 0, cap: int = 15) -> "KeywordSet":
        seen: list[str] = []
        for raw in keywords:
            surface = normalize_keyword(raw)
            if surface not in seen:
                seen.append(surface)
        return cls(keywords=tuple(seen), round=round, cap=cap)

    def __contains__(self, surface: str) -> bool:
        return surface in self.keywords

    def __len__(self):
        return len(self.keywords)


@dataclass(frozen=True)
class PolicyWeights:
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    delta: float = 0.0

    def __post_init__(self):
        if self.alpha == self.beta == self.gamma == self.delta == 0.0:
            raise ValueError("at least one weight must be nonzero")

    @classmethod
    def from_config(cls, cfg: PolicyConfig) -> "PolicyWeights":
        return cls(cfg.alpha, cfg.beta, cfg.gamma, cfg.delta)


@dataclass(frozen=True)
class CandidateKeyword:
    token: str
    kind: str
    slope: float                 # m: slope of the projected trend line
    avg_distance: float          # dbar: mean cosine distance to current keywords
    frequency: float             # f: latest-window doc count, pool-normalized
    trend_variance: float        # v: variance around the trend line, pool-normalized
    raw_frequency: int
    score: float
    unforecast: bool = False


@dataclass
class Proposal:
    round: int
    additions: list[CandidateKeyword]
    removals: list[tuple[str, str]]          # (token, reason)
    status: str = STATUS_PENDING

    def addition_tokens(self) -> list[str]:
        return [c.token for c in self.additions]

    def removal_tokens(self) -> list[str]:
        return [t for t, _ in self.removals]

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "status": self.status,
            "additions": [{"token": c.token, "kind": c.kind, "score": c.score,
                           "slope": c.slope, "avg_distance": c.avg_distance,
                           "frequency": c.frequency, "trend_variance": c.trend_variance,
                           "raw_frequency": c.raw_frequency, "unforecast": c.unforecast}
                          for c in self.additions],
            "removals": [{"token": t, "reason": r} for t, r in self.removals],
        }


@dataclass(frozen=True)
class RoundInputs:
    round: int
    keywords: KeywordSet
    model: EmbeddingModel
    forecasts: Mapping[str, Forecast | None]
    counts: Mapping[str, int]               # latest-window document counts
    ages: Mapping[str, int]                 # rounds each incumbent has been tracked


def expand_candidates(keywords: KeywordSet, model: EmbeddingModel, k: int = 30) -> list[str]:
    """Union of each keyword's top-k neighbors, kept only when hashtag or
    mention (the automated stand-in for the human relevance pass); incumbents
    are excluded from the pool. Out-of-vocabulary keywords are skipped with a
    warning; all-out-of-vocabulary is an error."""
    if k < 1:
        raise ValueError("k must be >= 1")
    pool: set[str] = set()
    in_vocab = 0
    for surface in keywords.keywords:
        if surface not in model.vocab:
            logger.warning("keyword %r not in vocabulary; skipping expansion", surface)
            continue
        in_vocab += 1
        for nb in nearest_neighbors(model, surface, k).neighbors:
            if nb.kind in (HASHTAG, MENTION) and nb.surface not in keywords:
                pool.add(nb.surface)
    if in_vocab == 0:
        raise KeywordCoverageError("no tracked keyword is in the vocabulary")
    return sorted(pool)


def score_candidates(candidates: Sequence[str], keywords: KeywordSet,
                     model: EmbeddingModel, forecasts: Mapping[str, Forecast | None],
                     counts: Mapping[str, int], weights: PolicyWeights) -> list[CandidateKeyword]:
    """Score a pool of candidates; frequency and trend variance are normalized
    by the pool maximum so the weights mix comparable magnitudes. Returned
    sorted by score descending (ties lexicographic)."""
    anchor_vecs = [model.vector(kw) for kw in keywords.keywords if kw in model.vocab]
    raw = []
    for surface in candidates:
        fc = forecasts.get(surface)
        if fc is not None:
            slope, variance = fc.slope, fc.trend_residual_variance
            unforecast = False
        else:
            slope, variance, unforecast = 0.0, 0.0, True
        if anchor_vecs and surface in model.vocab:
            vec = model.vector(surface)
            dbar = sum(1.0 - cosine_similarity(vec, a) for a in anchor_vecs) / len(anchor_vecs)
        else:
            dbar = 0.0
        raw.append((surface, slope, dbar, counts.get(surface, 0), variance, unforecast))
    max_f = max((r[3] for r in raw), default=0)
    max_v = max((r[4] for r in raw), default=0.0)
    scored = []
    for surface, slope, dbar, count, variance, unforecast in raw:
        f_norm = count / max_f if max_f > 0 else 0.0
        v_norm = variance / max_v if max_v > 0 else 0.0
        score = (weights.alpha * slope + weights.beta * dbar
                 + weights.gamma * f_norm + weights.delta * v_norm)
        scored.append(CandidateKeyword(token=surface, kind=Token.classify(surface),
                                       slope=slope, avg_distance=dbar, frequency=f_norm,
                                       trend_variance=v_norm, raw_frequency=count,
                                       score=score, unforecast=unforecast))
    scored.sort(key=lambda c: (-c.score, c.token))
    return scored


def _is_declining(forecasts: Mapping[str, Forecast | None], surface: str) -> bool:
    fc = forecasts.get(surface)
    return fc is not None and fc.trend == TREND_DECLINING


def _build_proposal(inputs: RoundInputs, weights: PolicyWeights, add_limit: int,
                    min_count: int, k: int, stale_age: int) -> tuple[Proposal, list[CandidateKeyword]]:
    """Steps shared by the automated and the human-assisted paths:
    expand, discard declining / low-count candidates, score, and collect
    removal suggestions. Returns (proposal, full scored survivor pool)."""
    candidates = expand_candidates(inputs.keywords, inputs.model, k=k)
    survivors = [c for c in candidates
                 if not _is_declining(inputs.forecasts, c)
                 and inputs.counts.get(c, 0) >= min_count]
    pool = score_candidates(survivors, inputs.keywords, inputs.model,
                            inputs.forecasts, inputs.counts, weights)
    removals = [(kw, REASON_DECLINING) for kw in inputs.keywords.keywords
                if _is_declining(inputs.forecasts, kw)
                and inputs.ages.get(kw, 0) >= stale_age]
    proposal = Proposal(round=inputs.round, additions=pool[:add_limit], removals=removals)
    return proposal, pool


def _evict_to_cap(kept: list[str], cap: int, inputs: RoundInputs,
                  weights: PolicyWeights, min_count: int) -> list[tuple[str, str]]:
    """Evict lowest-scored incumbents (ranked within their own pool) until the
    kept set fits under the cap."""
    forced: list[tuple[str, str]] = []
    if len(kept) <= cap:
        return forced
    scored = score_candidates(kept, inputs.keywords, inputs.model,
                              inputs.forecasts, inputs.counts, weights)
    for victim in reversed(scored):          # lowest score first
        if len(kept) <= cap:
            break
        kept.remove(victim.token)
        reason = (REASON_LOW_FREQUENCY if inputs.counts.get(victim.token, 0) < min_count
                  else REASON_STALE)
        forced.append((victim.token, reason))
    return forced


def next_keywords_auto(inputs: RoundInputs, weights: PolicyWeights | None = None,
                       add_limit: int = 5, min_count: int = 10, k: int = 30,
                       stale_age: int = 3, replace_mode: bool = False) -> tuple[KeywordSet, Proposal]:
    """Fully automated round: expand, discard, score, add the top survivors
    up to the free room under the cap, and drop declining incumbents that are
    at least stale_age rounds old. With replace_mode the surviving candidates
    literally become the next set (ablation of the incremental semantics)."""
    weights = weights or PolicyWeights()
    proposal, pool = _build_proposal(inputs, weights, add_limit, min_count, k, stale_age)
    cap = inputs.keywords.cap
    if replace_mode:
        chosen = [c.token for c in pool][:cap]
        proposal.additions = pool[:cap]
        proposal.status = STATUS_AUTO
        return KeywordSet(tuple(chosen), round=inputs.round + 1, cap=cap), proposal
    removed = set(proposal.removal_tokens())
    kept = [kw for kw in inputs.keywords.keywords if kw not in removed]
    forced = _evict_to_cap(kept, cap, inputs, weights, min_count)
    room = max(0, cap - len(kept))
    additions = proposal.additions[:room]
    proposal.additions = additions
    proposal.removals = proposal.removals + forced
    proposal.status = STATUS_AUTO
    next_set = KeywordSet(tuple(kept + [c.token for c in additions]),
                          round=inputs.round + 1, cap=cap)
    return next_set, proposal


def next_keywords_semi(inputs: RoundInputs, weights: PolicyWeights | None = None,
                       add_limit: int = 5, min_count: int = 10, k: int = 30,
                       stale_age: int = 3) -> Proposal:
    """Human-assisted round: same expand/discard/score pipeline, but the
    proposal stays pending until apply_decision."""
    weights = weights or PolicyWeights()
    proposal, _ = _build_proposal(inputs, weights, add_limit, min_count, k, stale_age)
    return proposal


@dataclass(frozen=True)
class HumanDecision:
    additions: tuple[str, ...] = ()
    removals: tuple[str, ...] = ()
    forced: frozenset[str] = frozenset()     # free-form tokens accepted although out of vocabulary


def apply_decision(proposal: Proposal, decision: HumanDecision, keywords: KeywordSet,
                   model: EmbeddingModel | None = None) -> tuple[KeywordSet, "RoundRecord"]:
    """Apply the human's accepted/amended additions and removals; enforce the
    cap and normalization; mark the proposal approved or amended."""
    if proposal.status != STATUS_PENDING:
        raise StaleProposalError(f"proposal for round {proposal.round} already {proposal.status}")
    additions = [normalize_keyword(t) for t in decision.additions]
    removals = [normalize_keyword(t) for t in decision.removals]
    dupes = sorted({t for t in additions if additions.count(t) > 1 or t in keywords})
    if dupes:
        raise ProposalValidationError("duplicate", dupes)
    unknown_removals = sorted(set(removals) - set(keywords.keywords))
    if unknown_removals:
        raise ProposalValidationError("not tracked", unknown_removals)
    proposed = set(proposal.addition_tokens())
    if model is not None:
        rejected = sorted(t for t in additions
                          if t not in proposed and t not in model.vocab
                          and t not in decision.forced)
        if rejected:
            raise ProposalValidationError("unknown token (pass forced to override)", rejected)
    kept = [kw for kw in keywords.keywords if kw not in set(removals)]
    result = kept + additions
    if len(result) > keywords.cap:
        raise ProposalValidationError(
            f"cap {keywords.cap} exceeded", result[keywords.cap:])
    amended = (set(additions) != proposed
               or set(removals) != set(proposal.removal_tokens()))
    proposal.status = STATUS_AMENDED if amended else STATUS_APPROVED
    next_set = KeywordSet(tuple(result), round=proposal.round + 1, cap=keywords.cap)
    record = RoundRecord(round=proposal.round, keywords_before=keywords.keywords,
                         keywords_after=next_set.keywords, proposal=proposal.to_dict(),
                         decided_by="human", timestamp=datetime.now(timezone.utc))
    return next_set, record


def baseline_static(seed: KeywordSet, round: int) -> KeywordSet:
    """The conventional monitor: the seed set, unchanged, every round."""
    return replace(seed, round=round)


def baseline_last_top(window: CorpusWindow, n: int, round: int = 0) -> KeywordSet:
    """Top-n hashtags of the previous round's filtered window, ties lexicographic."""
    if len(window) == 0:
        raise ValueError("window must be non-empty")
    counts = document_counts(window, kinds=[HASHTAG])
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return KeywordSet(tuple(s for s, _ in ranked[:n]), round=round, cap=max(n, 1))


@dataclass(frozen=True)
class RoundRecord:
    round: int
    keywords_before: tuple[str, ...]
    keywords_after: tuple[str, ...]
    proposal: dict
    decided_by: str                      # auto | human
    timestamp: datetime

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "keywords_before": list(self.keywords_before),
            "keywords_after": list(self.keywords_after),
            "proposal": self.proposal,
            "decided_by": self.decided_by,
            "timestamp": self.timestamp.astimezone(timezone.utc).isoformat().replace("+00:00", "Z"),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RoundRecord":
        from .corpus import parse_timestamp

        return cls(round=data["round"],
                   keywords_before=tuple(data["keywords_before"]),
                   keywords_after=tuple(data["keywords_after"]),
                   proposal=data.get("proposal", {}),
                   decided_by=data["decided_by"],
                   timestamp=parse_timestamp(data["timestamp"]))


class RoundLog:
    """Append-only NDJSON log of round decisions; the system of record for
    audits, crash recovery, and replay."""

    def __init__(self, path):
        self.path = Path(path)

    def append(self, record: RoundRecord) -> None:
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record.to_dict()) + "\n")
            fh.flush()

    def read(self) -> list[RoundRecord]:
        if not self.path.exists():
            return []
        records = []
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    records.append(RoundRecord.from_dict(json.loads(line)))
        return records

    def replay(self) -> list[tuple[int, tuple[str, ...]]]:
        """Keyword-set sequence reproduced from the log; verifies the chain."""
        sequence = []
        previous: tuple[str, ...] | None = None
        for rec in self.read():
            if previous is not None and rec.keywords_before != previous:
                raise ValueError(f"round {rec.round} does not chain from the previous record")
            sequence.append((rec.round, rec.keywords_after))
            previous = rec.keywords_after
        return sequence
