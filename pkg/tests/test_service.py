import json
from datetime import datetime, timedelta, timezone
from urllib.parse import quote

import pytest
from fastapi.testclient import TestClient

from trendmon.config import ForecastConfig, GloveConfig, PolicyConfig, RunConfig
from trendmon.corpus import FileReplayFetcher
from trendmon.drift import DriftConfig, generate_drift_corpus
from trendmon.engine import MonitorEngine, load_replay_schedule
from trendmon.errors import RoundFailedError
from trendmon.evaluation import top_hashtags
from trendmon.pipeline import FrequencyHistory, compute_round
from trendmon.policy import (HumanDecision, PolicyWeights, RoundInputs, RoundLog,
                             apply_decision, next_keywords_auto, next_keywords_semi)
from trendmon.server import create_app

from conftest import write_replay_fixture

ROUNDS = 4


@pytest.fixture(scope="module")
def replay_windows():
    return generate_drift_corpus(DriftConfig(rounds=ROUNDS, docs_per_round=300, seed=3))


@pytest.fixture(scope="module")
def replay_source(replay_windows, tmp_path_factory):
    return write_replay_fixture(replay_windows, tmp_path_factory.mktemp("replay") / "src")


def make_config(replay_windows, mode="replay", decision_mode="semi", **overrides):
    seed = top_hashtags(replay_windows[0], 15)
    base = dict(mode=mode, decision_mode=decision_mode,
                bucket_width_seconds=replay_windows[0].bucket_width.total_seconds(),
                glove=GloveConfig(min_count=2, epochs=15, dim=16),
                forecast=ForecastConfig(p_max=1, d_max=1, q_max=1),
                policy=PolicyConfig(min_count=5),
                seed_keywords=seed)
    base.update(overrides)
    return RunConfig(**base)


def make_engine(replay_windows, replay_source, run_dir, **overrides):
    cfg = make_config(replay_windows, **overrides)
    return MonitorEngine(cfg, FileReplayFetcher(replay_source), run_dir,
                         schedule=load_replay_schedule(replay_source))


def accept_all_within_cap(client):
    """Accept proposed removals, then additions up to the free room."""
    proposal = client.get("/proposal").json()["proposal"]
    keywords = client.get("/keywords").json()["keywords"]
    removals = [r["token"] for r in proposal["removals"]]
    room = 15 - (len(keywords) - len(removals))
    additions = [a["token"] for a in proposal["additions"]][:max(0, room)]
    response = client.post("/proposal/decision",
                           json={"additions": additions, "removals": removals})
    assert response.status_code == 200, response.json()
    return additions, removals


class TestEngine:
    def test_refresh_advances_rounds(self, replay_windows, replay_source, tmp_path):
        engine = make_engine(replay_windows, replay_source, tmp_path / "run",
                             decision_mode="manual")
        assert engine.state.current_round == 0
        engine.refresh_round()
        assert engine.state.current_round == 1
        engine.refresh_round()
        assert engine.state.current_round == 2

    def test_auto_mode_matches_direct_policy_call(self, replay_windows, replay_source,
                                                  tmp_path):
        engine = make_engine(replay_windows, replay_source, tmp_path / "run",
                             decision_mode="auto")
        cfg = engine.config
        seed_set = engine.state.keyword_set
        snapshot = engine.refresh_round()

        # independent: same window, fresh history, direct module calls
        from trendmon.corpus import filter_window, window_from_documents
        fetcher = FileReplayFetcher(replay_source)
        schedule = load_replay_schedule(replay_source)
        docs = list(fetcher.pull(seed_set.keywords, schedule[0].start, schedule[0].end))
        window = window_from_documents(docs, schedule[0].start, schedule[0].end,
                                       cfg.bucket_width)
        filtered = filter_window(window, seed_set.keywords)
        artifacts = compute_round(filtered, seed_set, FrequencyHistory(),
                                  cfg.glove, cfg.forecast, cfg.policy)
        inputs = RoundInputs(round=0, keywords=seed_set, model=artifacts.model,
                             forecasts=artifacts.forecasts, counts=artifacts.counts,
                             ages={kw: 0 for kw in seed_set.keywords})
        expected, _ = next_keywords_auto(
            inputs, PolicyWeights.from_config(cfg.policy),
            add_limit=cfg.policy.add_limit, min_count=cfg.policy.min_count,
            k=cfg.policy.neighbor_k, stale_age=cfg.policy.stale_age)
        assert engine.state.keyword_set.keywords == expected.keywords
        assert set(snapshot.panels) == set(expected.keywords)

    def test_fetcher_failure_keeps_previous_snapshot(self, replay_windows,
                                                     replay_source, tmp_path):
        class FlakyFetcher:
            def __init__(self, inner, fail_at):
                self.inner = inner
                self.fail_at = fail_at
                self.calls = 0

            def pull(self, keywords, start, end):
                self.calls += 1
                if self.calls == self.fail_at:
                    raise ConnectionError("stream dropped")
                return self.inner.pull(keywords, start, end)

        cfg = make_config(replay_windows, decision_mode="manual")
        flaky = FlakyFetcher(FileReplayFetcher(replay_source), fail_at=2)
        engine = MonitorEngine(cfg, flaky, tmp_path / "run",
                               schedule=load_replay_schedule(replay_source))
        first = engine.refresh_round()
        with pytest.raises(RoundFailedError):
            engine.refresh_round()
        assert engine.snapshot is first
        assert engine.state.current_round == 1
        engine.refresh_round()  # replay source is deterministic; retry succeeds
        assert engine.state.current_round == 2

    def test_live_mode_enforces_interval_floor(self, replay_windows, replay_source,
                                               tmp_path):
        with pytest.raises(ValueError):
            make_engine(replay_windows, replay_source, tmp_path / "run",
                        mode="live", refresh_interval_seconds=60.0)

    def test_crash_recovery_restores_state(self, replay_windows, replay_source,
                                           tmp_path):
        run_dir = tmp_path / "run"
        engine = make_engine(replay_windows, replay_source, run_dir,
                             decision_mode="auto")
        for _ in range(ROUNDS):
            engine.refresh_round()
        sequence = RoundLog(run_dir / "log.ndjson").replay()
        assert [r for r, _ in sequence] == list(range(ROUNDS))

        restarted = make_engine(replay_windows, replay_source, run_dir,
                                decision_mode="auto")
        assert restarted.state.current_round == engine.state.current_round
        assert restarted.state.keyword_set.keywords == engine.state.keyword_set.keywords
        assert restarted.ages == engine.ages


class TestApi:
    @pytest.fixture()
    def client(self, replay_windows, replay_source, tmp_path):
        engine = make_engine(replay_windows, replay_source, tmp_path / "run")
        app = create_app(engine)
        with TestClient(app, raise_server_exceptions=False) as client:
            client.engine = engine
            yield client

    def test_state_before_first_round(self, client):
        response = client.get("/state")
        assert response.status_code == 200
        body = response.json()
        assert body["state"]["current_round"] == 0
        assert body["snapshot"] is None

    def test_advance_and_panels(self, client):
        response = client.post("/round/advance")
        assert response.status_code == 200
        body = client.get("/state").json()
        snapshot = body["snapshot"]
        assert snapshot["round"] == 0
        assert len(snapshot["keywords"]) == 15
        some_panel = next(iter(snapshot["panels"].values()))
        assert "neighbors" in some_panel and "projection" in some_panel
        assert "forecast" in some_panel and "frequency_tail" in some_panel

    def test_duplicate_keyword_rejected(self, client):
        client.post("/round/advance")
        token = client.get("/keywords").json()["keywords"][0]["token"]
        response = client.post("/keywords", json={"token": token})
        assert response.status_code == 400
        assert response.json()["reason"] == "duplicate"

    def test_delete_absent_is_404_without_state_change(self, client):
        client.post("/round/advance")
        before = client.get("/keywords").json()
        response = client.delete(f"/keywords/{quote('#nothere', safe='')}")
        assert response.status_code == 404
        assert client.get("/keywords").json() == before
        again = client.delete(f"/keywords/{quote('#nothere', safe='')}")
        assert again.status_code == 404

    def test_manual_add_then_delete(self, client):
        client.post("/round/advance")
        client.delete(f"/keywords/{quote(client.get('/keywords').json()['keywords'][0]['token'], safe='')}")
        response = client.post("/keywords", json={"token": "#brandnew"})
        assert response.status_code == 200
        assert "#brandnew" in response.json()["keywords"]
        response = client.delete(f"/keywords/{quote('#brandnew', safe='')}")
        assert response.status_code == 200
        assert "#brandnew" not in response.json()["keywords"]

    def test_unknown_token_is_404(self, client):
        client.post("/round/advance")
        assert client.get(f"/neighbors/{quote('#bogus', safe='')}").status_code == 404
        assert client.get(f"/forecast/{quote('#bogus', safe='')}").status_code == 404

    def test_neighbors_sorted_by_combined_score(self, client):
        client.post("/round/advance")
        token = client.get("/keywords").json()["keywords"][0]["token"]
        response = client.get(f"/neighbors/{quote(token, safe='')}?k=10")
        assert response.status_code == 200
        rows = response.json()["rows"]
        combined = [r["combined"] for r in rows]
        assert combined == sorted(combined)
        assert all(r["distance"] == pytest.approx(1.0 - r["similarity"]) for r in rows)

    def test_projection_points(self, client):
        client.post("/round/advance")
        token = client.get("/keywords").json()["keywords"][0]["token"]
        rows = client.get(f"/neighbors/{quote(token, safe='')}?k=3").json()["rows"]
        tokens = ",".join(quote(t, safe="") for t in
                          [token] + [r["token"] for r in rows])
        response = client.get(f"/projection?tokens={tokens}")
        assert response.status_code == 200
        assert len(response.json()["points"]) == 4

    def test_forecast_unforecast_keyword_degrades(self, client):
        client.post("/round/advance")  # 4 history buckets < 8: no forecast yet
        token = client.get("/keywords").json()["keywords"][0]["token"]
        response = client.get(f"/forecast/{quote(token, safe='')}?h=10")
        assert response.status_code == 200
        body = response.json()
        assert body["unforecast"] is True
        assert body["trend"] is None

    def test_forecast_available_after_enough_history(self, client):
        client.post("/round/advance")
        accept_all_within_cap(client)
        client.post("/round/advance")
        token = client.get("/keywords").json()["keywords"][0]["token"]
        response = client.get(f"/forecast/{quote(token, safe='')}?h=10")
        assert response.status_code == 200
        body = response.json()
        assert body["unforecast"] is False
        assert len(body["points"]) == 10
        assert all(l <= p <= u for l, p, u in
                   zip(body["ci_lower"], body["points"], body["ci_upper"]))

    def test_decision_then_stale(self, client):
        client.post("/round/advance")
        accept_all_within_cap(client)
        response = client.post("/proposal/decision", json={"additions": [], "removals": []})
        assert response.status_code == 409
        assert response.json()["reason"] == "stale_proposal"

    def test_advance_beyond_schedule_fails_cleanly(self, client):
        for _ in range(ROUNDS):
            assert client.post("/round/advance").status_code == 200
            accept_all_within_cap(client)
        response = client.post("/round/advance")
        assert response.status_code == 502
        assert response.json()["reason"] == "round_failed"

    def test_live_mode_advance_blocked_before_interval(self, replay_windows,
                                                       replay_source, tmp_path):
        engine = make_engine(replay_windows, replay_source, tmp_path / "run",
                             mode="live", refresh_interval_seconds=900.0)
        engine.state.last_refresh = datetime.now(timezone.utc)
        client = TestClient(create_app(engine), raise_server_exceptions=False)
        response = client.post("/round/advance")
        assert response.status_code == 403
        assert response.json()["reason"] == "interval_not_elapsed"


def normalized_log(path):
    """RoundRecord log minus timestamps, for cross-run comparison."""
    out = []
    for line in path.read_text().splitlines():
        rec = json.loads(line)
        rec.pop("timestamp")
        out.append(rec)
    return out


class TestSemiLoopEquivalence:
    def test_api_loop_matches_direct_module_calls(self, replay_windows, replay_source,
                                                  tmp_path):
        # A: semi-automated workflow purely over HTTP
        api_engine = make_engine(replay_windows, replay_source, tmp_path / "api_run")
        client = TestClient(create_app(api_engine), raise_server_exceptions=False)
        for _ in range(ROUNDS):
            assert client.post("/round/advance").status_code == 200
            accept_all_within_cap(client)
        api_log = normalized_log(tmp_path / "api_run" / "log.ndjson")

        # B: the same rounds driven through the policy module directly
        from trendmon.corpus import filter_window, window_from_documents
        cfg = make_config(replay_windows)
        fetcher = FileReplayFetcher(replay_source)
        schedule = load_replay_schedule(replay_source)
        log = RoundLog(tmp_path / "direct_log.ndjson")
        keywords = api_engine.config and None
        from trendmon.policy import KeywordSet
        keywords = KeywordSet.build(cfg.seed_keywords, round=0, cap=cfg.policy.cap)
        ages = {kw: 0 for kw in keywords.keywords}
        history = FrequencyHistory()
        for rnd in range(ROUNDS):
            bounds = schedule[rnd]
            docs = list(fetcher.pull(keywords.keywords, bounds.start, bounds.end))
            window = window_from_documents(docs, bounds.start, bounds.end, cfg.bucket_width)
            filtered = filter_window(window, keywords.keywords)
            artifacts = compute_round(filtered, keywords, history,
                                      cfg.glove, cfg.forecast, cfg.policy)
            inputs = RoundInputs(round=rnd, keywords=keywords, model=artifacts.model,
                                 forecasts=artifacts.forecasts, counts=artifacts.counts,
                                 ages=ages)
            proposal = next_keywords_semi(
                inputs, PolicyWeights.from_config(cfg.policy),
                add_limit=cfg.policy.add_limit, min_count=cfg.policy.min_count,
                k=cfg.policy.neighbor_k, stale_age=cfg.policy.stale_age)
            removals = proposal.removal_tokens()
            room = cfg.policy.cap - (len(keywords) - len(removals))
            decision = HumanDecision(additions=tuple(proposal.addition_tokens()[:max(0, room)]),
                                     removals=tuple(removals))
            keywords, record = apply_decision(proposal, decision, keywords,
                                              model=artifacts.model)
            log.append(record)
            ages = {kw: ages.get(kw, -1) + 1 for kw in keywords.keywords}
        direct_log = normalized_log(tmp_path / "direct_log.ndjson")

        assert api_log == direct_log
        assert api_engine.state.keyword_set.keywords == keywords.keywords


class TestCli:
    def test_ingest_and_train_embed(self, replay_windows, replay_source, tmp_path):
        from trendmon.cli import main
        src = replay_source / "round_000.ndjson"
        out = tmp_path / "window.ndjson"
        assert main(["ingest", str(src), "--out", str(out)]) == 0
        assert out.exists()
        vecs = tmp_path / "vectors.txt"
        assert main(["train-embed", str(out), "--dim", "16", "--epochs", "3",
                     "--min-count", "2", "--out", str(vecs)]) == 0
        assert vecs.exists() and (tmp_path / "vectors.txt.meta.json").exists()

    def test_forecast_command(self, tmp_path, capsys):
        from trendmon.cli import main
        series = {"token": "#xx", "origin": "2021-01-01T00:00:00Z",
                  "bucket_width_seconds": 3600.0,
                  "counts": [int(1.5 * i) for i in range(40)]}
        path = tmp_path / "series.json"
        path.write_text(json.dumps(series))
        assert main(["forecast", str(path), "--h", "10"]) == 0
        record = json.loads(capsys.readouterr().out)
        assert record["keyword"] == "#xx"
        assert len(record["points"]) == 10
        assert record["trend"] in ("rising", "declining", "flat")

    def test_simulate_command(self, replay_source, tmp_path, capsys):
        from trendmon.cli import main
        report = tmp_path / "report.json"
        csv_path = tmp_path / "rounds.csv"
        assert main(["simulate", str(replay_source), "--monitors", "static,last-top",
                     "--report", str(report), "--csv", str(csv_path),
                     "--glove-epochs", "5", "--policy-min-count", "5"]) == 0
        assert "Jaccard" in capsys.readouterr().out
        assert report.exists() and csv_path.exists()
        parsed = json.loads(report.read_text())
        assert set(parsed) == {"static", "last-top"}
