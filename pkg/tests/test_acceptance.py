"""Acceptance suite: every criterion runs at its stated tolerance and prints a
pass/fail line (run with -s to see them). Runtime limits are asserted too."""

import json
import random
import time
from urllib.parse import quote

import numpy as np
import pytest
from fastapi.testclient import TestClient

from trendmon.config import ForecastConfig, GloveConfig, PolicyConfig, RunConfig
from trendmon.corpus import FileReplayFetcher
from trendmon.drift import DriftConfig, generate_drift_corpus
from trendmon.embedding import build_cooccurrence, train_glove
from trendmon.engine import MonitorEngine, load_replay_schedule
from trendmon.evaluation import f1, jaccard, simulate, top_hashtags
from trendmon.forecast import ArimaSpec, PreparedSeries, default_grid, fit_grid, forecast
from trendmon.pipeline import FrequencyHistory, compute_round
from trendmon.policy import (HumanDecision, KeywordSet, PolicyWeights, RoundInputs,
                             RoundLog, apply_decision, next_keywords_auto,
                             next_keywords_semi)
from trendmon.server import create_app

from conftest import T0, HOUR, make_window, write_replay_fixture
from test_embedding import (block_corpus, block_separation,
                            finite_difference_max_rel_err, random_glove_instance)
from test_policy import oracle_additions, random_instance
from test_service import accept_all_within_cap, make_config, normalized_log

PASS = "ACCEPTANCE %-28s PASS  (%.2fs)"


def elapsed_under(started, limit, name):
    took = time.monotonic() - started
    assert took < limit, f"{name} took {took:.1f}s, limit {limit}s"
    return took


def test_metric_exactness():
    started = time.monotonic()
    rng = random.Random(1234)
    universe = [f"#h{i:03d}" for i in range(120)]
    for _ in range(1000):
        retrieved = set(rng.sample(universe, rng.randint(0, 50)))
        truth = set(rng.sample(universe, rng.randint(1, 50)))
        inter = len(retrieved & truth)
        union = len(retrieved | truth)
        assert jaccard(retrieved, truth) == inter / union
        if not retrieved or inter == 0:
            expected_f1 = 0.0
        else:
            p, r = inter / len(retrieved), inter / len(truth)
            expected_f1 = 2 * p * r / (p + r)
        assert f1(retrieved, truth) == expected_f1
    took = elapsed_under(started, 1.0, "metric exactness")
    print(PASS % ("metric-exactness", took))


def test_glove_gradient_check():
    started = time.monotonic()
    W, C, b, bc, ii, jj, lx, fx = random_glove_instance(seed=42, V=5, d=8)
    err = finite_difference_max_rel_err(W, C, b, bc, ii, jj, lx, fx)
    assert err < 1e-4, f"max relative gradient error {err}"
    took = elapsed_under(started, 5.0, "gradient check")
    print(PASS % ("glove-gradient-check", took))


def test_glove_semantic_recovery():
    started = time.monotonic()
    for seed in (0, 1, 2):
        window = block_corpus(seed, block_size=20, docs=2000)
        vocab, cooc = build_cooccurrence(window, vocab_min_count=1, context_window=10)
        model = train_glove(vocab, cooc, d=50, epochs=50, seed=seed)
        within, cross = block_separation(model)
        assert within - cross >= 0.3, f"seed {seed}: gap {within - cross:.3f}"
    took = elapsed_under(started, 60.0, "semantic recovery")
    print(PASS % ("glove-semantic-recovery", took))


def test_arima_parameter_recovery():
    started = time.monotonic()
    rng = np.random.default_rng(0)
    n, phi, sigma = 500, 0.7, 0.1
    series = np.zeros(n)
    for t in range(1, n):
        series[t] = phi * series[t - 1] + rng.normal(0.0, sigma)
    prepared = PreparedSeries(values=tuple(series), bucket_width=HOUR, origin=T0)
    grid = [ArimaSpec(p, d, q) for p in range(4) for d in range(2) for q in range(3)]
    fit = fit_grid(prepared, grid=grid, split_fraction=0.8)
    assert fit.spec.d == 0 and fit.spec.p >= 1
    assert 0.55 <= fit.ar_coeffs[0] <= 0.85, f"leading AR {fit.ar_coeffs[0]:.3f}"

    ramp = PreparedSeries(values=tuple(np.arange(1.0, 101.0)), bucket_width=HOUR,
                          origin=T0)
    ramp_fit = fit_grid(ramp, grid=[ArimaSpec(p, d, q) for p in range(3)
                                    for d in range(2) for q in range(2)])
    assert ramp_fit.spec.d == 1
    assert ramp_fit.validation_mse < 1e-6
    took = elapsed_under(started, 10.0, "arima recovery")
    print(PASS % ("arima-parameter-recovery", took))


def test_forecast_contract():
    started = time.monotonic()
    rng = np.random.default_rng(99)
    grid = default_grid(2, 1, 2)
    checked = 0
    for _ in range(50):
        kind = rng.integers(0, 3)
        n = int(rng.integers(30, 60))
        if kind == 0:
            values = rng.normal(rng.uniform(-2, 2), rng.uniform(0.05, 1.0), size=n)
        elif kind == 1:
            slope = rng.uniform(-0.3, 0.3)
            values = slope * np.arange(n) + rng.normal(0, 0.2, size=n)
        else:
            x = np.zeros(n)
            phi = rng.uniform(-0.8, 0.8)
            for t in range(1, n):
                x[t] = phi * x[t - 1] + rng.normal(0, 0.3)
            values = x
        prepared = PreparedSeries(values=tuple(values), bucket_width=HOUR, origin=T0)
        fit = fit_grid(prepared, grid=grid)
        fc = forecast(fit, prepared, horizon=15)
        widths = [u - l for u, l in zip(fc.ci_upper, fc.ci_lower)]
        assert all(l <= p <= u for l, p, u in zip(fc.ci_lower, fc.points, fc.ci_upper))
        assert all(widths[i] <= widths[i + 1] + 1e-12 for i in range(len(widths) - 1))
        checked += 1
    assert checked == 50
    took = elapsed_under(started, 30.0, "forecast contract")
    print(PASS % ("forecast-contract", took))


def test_policy_correctness():
    started = time.monotonic()
    weights = PolicyWeights(1.0, 1.0, 1.0, 0.5)
    for seed in range(100):
        inputs = random_instance(seed, n_vocab=30, n_keywords=3)
        next_set, proposal = next_keywords_auto(inputs, weights, add_limit=4,
                                                min_count=5, k=10, stale_age=99)
        assert len(next_set) <= 15
        assert len(set(next_set.keywords)) == len(next_set.keywords)
        for cand in proposal.additions:
            fc = inputs.forecasts.get(cand.token)
            assert fc is None or fc.trend != "declining"
            assert inputs.counts.get(cand.token, 0) >= 5
        base = oracle_additions(inputs, weights, 4, 5, 10, affine=(1.0, 0.0))
        rescaled = oracle_additions(inputs, weights, 4, 5, 10, affine=(2.5, 7.0))
        assert base == rescaled
        assert [c.token for c in proposal.additions] == base
    took = elapsed_under(started, 10.0, "policy correctness")
    print(PASS % ("policy-correctness", took))


def test_directional_reproduction_on_drift():
    started = time.monotonic()
    rounds = generate_drift_corpus(DriftConfig(rounds=12, docs_per_round=500,
                                               rotation=0.2, seed=7))
    reports = simulate(rounds)
    dynamic = reports["dynamic"]
    static = reports["static"]
    last_top = reports["last-top"]
    round0 = {r.per_round[0].f1 for r in (dynamic, static, last_top)}
    round0_j = {r.per_round[0].jaccard for r in (dynamic, static, last_top)}
    assert len(round0) == 1 and len(round0_j) == 1, "round-0 scores must be identical"
    assert static.unweighted_f1 > 0
    gain = (dynamic.unweighted_f1 - static.unweighted_f1) / static.unweighted_f1
    assert gain >= 0.20, f"dynamic gain over static is {gain:.1%}, need >= 20%"
    took = elapsed_under(started, 300.0, "drift reproduction")
    print(PASS % ("drift-directional (+%.0f%%)" % (gain * 100), took))


@pytest.fixture(scope="module")
def replay_setup(tmp_path_factory):
    windows = generate_drift_corpus(DriftConfig(rounds=4, docs_per_round=300, seed=3))
    source = write_replay_fixture(windows,
                                  tmp_path_factory.mktemp("acceptance") / "src")
    return windows, source


def test_event_sourced_replay(replay_setup, tmp_path):
    started = time.monotonic()
    windows, source = replay_setup
    cfg = make_config(windows, decision_mode="auto")
    run_dir = tmp_path / "run"
    engine = MonitorEngine(cfg, FileReplayFetcher(source), run_dir,
                           schedule=load_replay_schedule(source))
    observed = []
    for _ in range(4):
        engine.refresh_round()
        observed.append(list(engine.state.keyword_set.keywords))

    replayed = RoundLog(run_dir / "log.ndjson").replay()
    replayed_sets = [list(after) for _, after in replayed]
    assert json.dumps(replayed_sets) == json.dumps(observed), "log replay must be byte-equal"

    restarted = MonitorEngine(cfg, FileReplayFetcher(source), run_dir,
                              schedule=load_replay_schedule(source))
    assert restarted.state.keyword_set.keywords == engine.state.keyword_set.keywords
    assert restarted.state.current_round == engine.state.current_round
    took = time.monotonic() - started
    print(PASS % ("event-sourced-replay", took))


def test_end_to_end_api_loop(replay_setup, tmp_path):
    started = time.monotonic()
    windows, source = replay_setup
    cfg = make_config(windows)

    api_run = tmp_path / "api_run"
    engine = MonitorEngine(cfg, FileReplayFetcher(source), api_run,
                           schedule=load_replay_schedule(source))
    client = TestClient(create_app(engine), raise_server_exceptions=False)
    for _ in range(4):
        assert client.post("/round/advance").status_code == 200
        accept_all_within_cap(client)
    api_log = normalized_log(api_run / "log.ndjson")

    from trendmon.corpus import filter_window, window_from_documents
    fetcher = FileReplayFetcher(source)
    schedule = load_replay_schedule(source)
    log = RoundLog(tmp_path / "direct.ndjson")
    keywords = KeywordSet.build(cfg.seed_keywords, round=0, cap=cfg.policy.cap)
    ages = {kw: 0 for kw in keywords.keywords}
    history = FrequencyHistory()
    for rnd in range(4):
        bounds = schedule[rnd]
        docs = list(fetcher.pull(keywords.keywords, bounds.start, bounds.end))
        window = window_from_documents(docs, bounds.start, bounds.end, cfg.bucket_width)
        filtered = filter_window(window, keywords.keywords)
        artifacts = compute_round(filtered, keywords, history, cfg.glove,
                                  cfg.forecast, cfg.policy)
        inputs = RoundInputs(round=rnd, keywords=keywords, model=artifacts.model,
                             forecasts=artifacts.forecasts, counts=artifacts.counts,
                             ages=ages)
        proposal = next_keywords_semi(inputs, PolicyWeights.from_config(cfg.policy),
                                      add_limit=cfg.policy.add_limit,
                                      min_count=cfg.policy.min_count,
                                      k=cfg.policy.neighbor_k,
                                      stale_age=cfg.policy.stale_age)
        removals = proposal.removal_tokens()
        room = cfg.policy.cap - (len(keywords) - len(removals))
        decision = HumanDecision(additions=tuple(proposal.addition_tokens()[:max(0, room)]),
                                 removals=tuple(removals))
        keywords, record = apply_decision(proposal, decision, keywords,
                                          model=artifacts.model)
        log.append(record)
        ages = {kw: ages.get(kw, -1) + 1 for kw in keywords.keywords}
    direct_log = normalized_log(tmp_path / "direct.ndjson")

    assert api_log == direct_log, "HTTP loop and direct policy calls must agree"
    took = time.monotonic() - started
    print(PASS % ("end-to-end-api-loop", took))
