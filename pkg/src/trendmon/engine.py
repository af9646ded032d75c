"""Long-running monitor runtime: refreshes rounds through a fetcher, keeps an
immutable snapshot for readers, persists windows/embeddings/decisions under a
run directory, and recovers state by replaying the round log."""

from __future__ import annotations

import json
import logging
import math
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

from .config import RunConfig, save_config
from .corpus import (CorpusWindow, Fetcher, filter_window, parse_timestamp,
                     window_from_documents, write_window)
from .embedding import nearest_neighbors, project_2d, save_vectors
from .errors import (IntervalNotElapsedError, ProposalValidationError,
                     RoundFailedError, StaleProposalError, TokenNotFoundError,
                     TrendmonError)
from .forecast import (PreparedSeries, fit_and_forecast, forecast as run_forecast,
                       forecast_record, prepare)
from .pipeline import FrequencyHistory, compute_round
from .policy import (HumanDecision, KeywordSet, PolicyWeights, Proposal,
                     RoundInputs, RoundLog, RoundRecord, apply_decision,
                     next_keywords_auto, next_keywords_semi, normalize_keyword)

logger = logging.getLogger(__name__)

MODE_MANUAL = "manual"
MODE_SEMI = "semi"
MODE_AUTO = "auto"


@dataclass(frozen=True)
class ReplayRound:
    start: datetime
    end: datetime


def load_replay_schedule(source_dir) -> list[ReplayRound]:
    """Window bounds per replay round, from manifest.json when present,
    otherwise from each file's own timestamp span."""
    source_dir = Path(source_dir)
    manifest = source_dir / "manifest.json"
    if manifest.exists():
        data = json.loads(manifest.read_text(encoding="utf-8"))
        return [ReplayRound(start=parse_timestamp(r["start"]), end=parse_timestamp(r["end"]))
                for r in data["rounds"]]
    schedule = []
    for path in sorted(source_dir.glob("*.ndjson")):
        stamps = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    try:
                        stamps.append(parse_timestamp(json.loads(line)["created_at"]))
                    except (json.JSONDecodeError, KeyError, ValueError):
                        continue
        if stamps:
            schedule.append(ReplayRound(start=min(stamps),
                                        end=max(stamps) + timedelta(seconds=1)))
    return schedule


@dataclass
class MonitorState:
    run_id: str
    current_round: int
    keyword_set: KeywordSet
    last_refresh: datetime | None
    refresh_interval: timedelta
    mode: str

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "current_round": self.current_round,
            "keywords": list(self.keyword_set.keywords),
            "cap": self.keyword_set.cap,
            "last_refresh": self.last_refresh.isoformat().replace("+00:00", "Z")
                            if self.last_refresh else None,
            "refresh_interval_seconds": self.refresh_interval.total_seconds(),
            "mode": self.mode,
        }


@dataclass
class Snapshot:
    round: int
    created_at: datetime
    keywords: list[dict]                 # token, age, frequency
    panels: dict[str, dict]              # per-keyword neighbors/projection/forecast/tail
    pending_proposal: dict | None = None
    failed: bool = False

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "created_at": self.created_at.isoformat().replace("+00:00", "Z"),
            "keywords": self.keywords,
            "panels": self.panels,
            "pending_proposal": self.pending_proposal,
            "failed": self.failed,
        }


class MonitorEngine:
    """Single logical writer over the monitor state; readers get immutable
    snapshot dicts. Mode is manual (humans drive everything), semi (proposals
    await decisions), or auto (proposals applied immediately)."""

    def __init__(self, config: RunConfig, fetcher: Fetcher, run_dir,
                 schedule: list[ReplayRound] | None = None):
        if config.mode == "live" and config.refresh_interval < timedelta(minutes=15):
            raise ValueError("live mode enforces a refresh interval of at least 15 minutes")
        self.config = config
        self.fetcher = fetcher
        self.run_dir = Path(run_dir)
        self.schedule = schedule or []
        self._lock = threading.Lock()
        self.run_dir.mkdir(parents=True, exist_ok=True)
        (self.run_dir / "rounds").mkdir(exist_ok=True)
        (self.run_dir / "embeddings").mkdir(exist_ok=True)
        save_config(config, self.run_dir / "config.json")
        self.log = RoundLog(self.run_dir / "log.ndjson")
        self.history = FrequencyHistory()
        self.snapshot: Snapshot | None = None
        self.pending: Proposal | None = None
        self.artifacts = None
        seed = KeywordSet.build(config.seed_keywords, round=0, cap=config.policy.cap)
        self.ages = {kw: 0 for kw in seed.keywords}
        self.state = MonitorState(run_id=uuid.uuid4().hex[:12], current_round=0,
                                  keyword_set=seed, last_refresh=None,
                                  refresh_interval=config.refresh_interval,
                                  mode=config.decision_mode)
        self._recover()

    # -- recovery ---------------------------------------------------------

    def _recover(self) -> None:
        records = self.log.read()
        if not records:
            return
        # seed keywords pre-exist at age 0; each round bumps survivors by 1
        ages: dict[str, int] = {kw: 0 for kw in records[0].keywords_before}
        refreshes = 0
        for rec in records:
            if rec.proposal.get("manual"):
                ages = {kw: ages.get(kw, 0) for kw in rec.keywords_after}
            else:
                refreshes = max(refreshes, rec.round + 1)
                ages = {kw: ages.get(kw, -1) + 1 for kw in rec.keywords_after}
        last = records[-1]
        self.state.keyword_set = KeywordSet(last.keywords_after, round=refreshes,
                                            cap=self.config.policy.cap)
        self.state.current_round = refreshes
        self.ages = ages
        logger.info("recovered run at round %d with %d keywords from %s",
                    refreshes, len(last.keywords_after), self.log.path)

    # -- round refresh ----------------------------------------------------

    def _window_bounds(self) -> tuple[datetime, datetime]:
        if self.config.mode == "replay":
            if self.state.current_round >= len(self.schedule):
                raise RoundFailedError("replay schedule exhausted")
            rnd = self.schedule[self.state.current_round]
            return rnd.start, rnd.end
        now = datetime.now(timezone.utc)
        return now - timedelta(seconds=self.config.window_seconds), now

    def refresh_round(self) -> Snapshot:
        """Pull the next window, retrain, refit, propose/apply, persist, and
        publish an atomic snapshot. On failure the previous snapshot stays."""
        with self._lock:
            now = datetime.now(timezone.utc)
            if (self.config.mode == "live" and self.state.last_refresh is not None
                    and now - self.state.last_refresh < self.state.refresh_interval):
                raise IntervalNotElapsedError(
                    f"next refresh allowed at {self.state.last_refresh + self.state.refresh_interval}")
            rnd = self.state.current_round
            start, end = self._window_bounds()
            try:
                docs = list(self.fetcher.pull(self.state.keyword_set.keywords, start, end))
                window = window_from_documents(docs, start, end, self.config.bucket_width)
                filtered = filter_window(window, self.state.keyword_set.keywords)
                artifacts = compute_round(filtered, self.state.keyword_set, self.history,
                                          self.config.glove, self.config.forecast,
                                          self.config.policy)
            except Exception as exc:
                logger.error("round %d failed: %s", rnd, exc)
                raise RoundFailedError(f"round {rnd} failed: {exc}") from exc
            self.artifacts = artifacts
            write_window(window, self.run_dir / "rounds" / f"round_{rnd:03d}.ndjson")
            save_vectors(artifacts.model, self.run_dir / "embeddings" / f"round_{rnd:03d}.txt")
            inputs = RoundInputs(round=rnd, keywords=self.state.keyword_set,
                                 model=artifacts.model, forecasts=artifacts.forecasts,
                                 counts=artifacts.counts, ages=self.ages)
            weights = PolicyWeights.from_config(self.config.policy)
            pcfg = self.config.policy
            if self.state.mode == MODE_AUTO:
                next_set, proposal = next_keywords_auto(
                    inputs, weights, add_limit=pcfg.add_limit, min_count=pcfg.min_count,
                    k=pcfg.neighbor_k, stale_age=pcfg.stale_age,
                    replace_mode=pcfg.replace_mode)
                record = RoundRecord(round=rnd, keywords_before=self.state.keyword_set.keywords,
                                     keywords_after=next_set.keywords,
                                     proposal=proposal.to_dict(), decided_by="auto",
                                     timestamp=datetime.now(timezone.utc))
                self.log.append(record)
                self.state.keyword_set = next_set
                self.ages = {kw: self.ages.get(kw, -1) + 1 for kw in next_set.keywords}
                self.pending = None
            elif self.state.mode == MODE_SEMI:
                self.pending = next_keywords_semi(
                    inputs, weights, add_limit=pcfg.add_limit, min_count=pcfg.min_count,
                    k=pcfg.neighbor_k, stale_age=pcfg.stale_age)
            else:
                self.pending = None
            self.state.current_round = rnd + 1
            self.state.last_refresh = now
            snapshot = self._build_snapshot(rnd)
            self.snapshot = snapshot
            return snapshot

    def _build_snapshot(self, rnd: int) -> Snapshot:
        artifacts = self.artifacts
        panels: dict[str, dict] = {}
        keywords_meta = []
        k = self.config.policy.neighbor_k
        for kw in self.state.keyword_set.keywords:
            freq = artifacts.counts.get(kw, 0)
            keywords_meta.append({"token": kw, "age": self.ages.get(kw, 0),
                                  "frequency": freq})
            panel: dict = {"frequency": freq}
            if kw in artifacts.model.vocab:
                nb = nearest_neighbors(artifacts.model, kw, k)
                panel["neighbors"] = [
                    {"token": n.surface, "kind": n.kind,
                     "similarity": n.similarity, "distance": 1.0 - n.similarity,
                     "frequency": artifacts.counts.get(n.surface, n.count)}
                    for n in nb.neighbors]
                cloud = [kw] + [n.surface for n in nb.neighbors]
                coords = project_2d(artifacts.model, cloud, seed=self.config.glove.seed,
                                    method="pca")
                panel["projection"] = [
                    {"token": s, "x": x, "y": y,
                     "frequency": artifacts.counts.get(s, 0)}
                    for s, x, y in coords]
            else:
                panel["neighbors"] = []
                panel["projection"] = []
            series = artifacts.prepared.get(kw)
            fc = artifacts.forecasts.get(kw)
            if series is not None:
                fit = artifacts.fits.get(kw)
                panel["forecast"] = forecast_record(
                    kw, series, fc, fit.validation_mse if fit else None)
            else:
                panel["forecast"] = {"keyword": kw, "unforecast": True, "trend": None,
                                     "history": [], "points": [], "ci_lower": [],
                                     "ci_upper": [], "validation_mse": None}
            tail = self.history.counts.get(kw, [])
            panel["frequency_tail"] = tail[-48:]
            panels[kw] = panel
        return Snapshot(round=rnd, created_at=datetime.now(timezone.utc),
                        keywords=keywords_meta, panels=panels,
                        pending_proposal=self.pending.to_dict() if self.pending else None)

    # -- decisions and manual edits ----------------------------------------

    def decide(self, additions, removals, forced=()) -> dict:
        with self._lock:
            if self.pending is None:
                raise StaleProposalError("no pending proposal")
            decision = HumanDecision(additions=tuple(additions), removals=tuple(removals),
                                     forced=frozenset(forced))
            model = self.artifacts.model if self.artifacts else None
            next_set, record = apply_decision(self.pending, decision,
                                              self.state.keyword_set, model=model)
            self.log.append(record)
            self.state.keyword_set = next_set
            self.ages = {kw: self.ages.get(kw, -1) + 1 for kw in next_set.keywords}
            self.pending = None
            if self.snapshot is not None:
                snap = self._build_snapshot(self.snapshot.round)
                self.snapshot = snap
            return record.to_dict()

    def _manual_record(self, before, after, change: dict) -> None:
        record = RoundRecord(round=self.state.current_round, keywords_before=before,
                             keywords_after=after,
                             proposal={"manual": True, **change,
                                       "status": "amended", "round": self.state.current_round},
                             decided_by="human", timestamp=datetime.now(timezone.utc))
        self.log.append(record)

    def add_keyword(self, token: str) -> KeywordSet:
        with self._lock:
            surface = normalize_keyword(token)
            current = self.state.keyword_set
            if surface in current:
                raise ProposalValidationError("duplicate", [surface])
            if len(current) + 1 > current.cap:
                raise ProposalValidationError(f"cap {current.cap} exceeded", [surface])
            next_set = KeywordSet(current.keywords + (surface,), round=current.round,
                                  cap=current.cap)
            self._manual_record(current.keywords, next_set.keywords, {"added": [surface]})
            self.state.keyword_set = next_set
            self.ages.setdefault(surface, 0)
            return next_set

    def remove_keyword(self, token: str) -> KeywordSet:
        with self._lock:
            surface = normalize_keyword(token)
            current = self.state.keyword_set
            if surface not in current:
                raise TokenNotFoundError(surface)
            next_set = KeywordSet(tuple(kw for kw in current.keywords if kw != surface),
                                  round=current.round, cap=current.cap)
            self._manual_record(current.keywords, next_set.keywords, {"removed": [surface]})
            self.state.keyword_set = next_set
            self.ages.pop(surface, None)
            return next_set

    # -- read-side helpers --------------------------------------------------

    def keyword_info(self) -> list[dict]:
        counts = self.artifacts.counts if self.artifacts else {}
        return [{"token": kw, "age": self.ages.get(kw, 0),
                 "frequency": counts.get(kw, 0)}
                for kw in self.state.keyword_set.keywords]

    def neighbor_rows(self, token: str, k: int, w_distance: float = 1.0,
                      w_frequency: float = 1.0) -> dict:
        if self.artifacts is None:
            raise TokenNotFoundError(token)
        model = self.artifacts.model
        nb = nearest_neighbors(model, token, k)
        counts = self.artifacts.counts
        rows = [{"token": n.surface, "kind": n.kind, "similarity": n.similarity,
                 "distance": 1.0 - n.similarity,
                 "frequency": counts.get(n.surface, n.count)}
                for n in nb.neighbors]
        max_f = max((r["frequency"] for r in rows), default=0)
        for r in rows:
            f_norm = r["frequency"] / max_f if max_f else 0.0
            r["combined"] = w_distance * r["distance"] + w_frequency * (1.0 - f_norm)
        rows.sort(key=lambda r: (r["combined"], r["token"]))
        return {"query": nb.query, "rows": rows,
                "sort_weights": {"distance": w_distance, "frequency": w_frequency}}

    def projection(self, tokens, seed=None, method="tsne") -> list[dict]:
        if self.artifacts is None:
            raise TokenNotFoundError(",".join(tokens))
        seed = self.config.glove.seed if seed is None else seed
        coords = project_2d(self.artifacts.model, tokens, seed=seed, method=method)
        counts = self.artifacts.counts
        return [{"token": s, "x": x, "y": y, "frequency": counts.get(s, 0)}
                for s, x, y in coords]

    def forecast_for(self, token: str, horizon: int) -> dict:
        surface = token.lower()
        if self.history.n_buckets == 0 or (
                surface not in self.history.counts
                and (self.artifacts is None or surface not in self.artifacts.model.vocab)):
            raise TokenNotFoundError(surface)
        series_raw = self.history.series(surface)
        try:
            series = prepare(series_raw)
            fit, fc = fit_and_forecast(series, self.config.forecast)
            if horizon != self.config.forecast.horizon:
                fc = run_forecast(fit, series, horizon=horizon,
                                  level=self.config.forecast.level,
                                  trend_epsilon=self.config.forecast.trend_epsilon)
            return forecast_record(surface, series, fc,
                                   validation_mse=fit.validation_mse)
        except TrendmonError:
            stub = PreparedSeries(values=tuple(math.log1p(c) for c in series_raw.counts),
                                  bucket_width=series_raw.bucket_width,
                                  origin=series_raw.origin, token=surface)
            return forecast_record(surface, stub, None)
