#!/usr/bin/env python3
"""Capture real API payloads into JSON fixtures for the frontend test suite.

Spins the replay engine through enough rounds that forecasts exist, then dumps
/state, /keywords, /neighbors, /projection, /forecast, and /proposal bodies.
The frontend tests replay these against a fixture server so the client and the
service can never drift apart silently.
"""

import argparse
import json
import logging
from pathlib import Path
from urllib.parse import quote

from fastapi.testclient import TestClient

from trendmon.config import ForecastConfig, GloveConfig, PolicyConfig, RunConfig
from trendmon.corpus import FileReplayFetcher, write_window
from trendmon.drift import DriftConfig, generate_drift_corpus
from trendmon.engine import MonitorEngine, load_replay_schedule
from trendmon.evaluation import top_hashtags
from trendmon.server import create_app


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="frontend/tests/fixtures")
    parser.add_argument("--rounds", type=int, default=3)
    parser.add_argument("--seed", type=int, default=3)
    args = parser.parse_args()
    logging.disable(logging.WARNING)

    rounds = generate_drift_corpus(DriftConfig(rounds=max(args.rounds, 3),
                                               docs_per_round=300, seed=args.seed))
    work = Path("build") / "api_fixture"
    src = work / "src"
    src.mkdir(parents=True, exist_ok=True)
    manifest = {"rounds": [],
                "bucket_width_seconds": rounds[0].bucket_width.total_seconds()}
    for i, window in enumerate(rounds):
        name = f"round_{i:03d}.ndjson"
        write_window(window, src / name)
        manifest["rounds"].append({"file": name, "start": window.start.isoformat(),
                                   "end": window.end.isoformat()})
    (src / "manifest.json").write_text(json.dumps(manifest))

    # cap 20 leaves room so an accept-all decision is always valid
    cfg = RunConfig(mode="replay", decision_mode="semi",
                    bucket_width_seconds=manifest["bucket_width_seconds"],
                    glove=GloveConfig(min_count=2, epochs=15, dim=16),
                    forecast=ForecastConfig(p_max=1, d_max=1, q_max=1),
                    policy=PolicyConfig(min_count=5, cap=20, add_limit=3),
                    seed_keywords=top_hashtags(rounds[0], 15))
    engine = MonitorEngine(cfg, FileReplayFetcher(src), work / "run",
                           schedule=load_replay_schedule(src))
    client = TestClient(create_app(engine))
    for _ in range(args.rounds - 1):
        client.post("/round/advance")
        proposal = client.get("/proposal").json()["proposal"]
        client.post("/proposal/decision",
                    json={"additions": [a["token"] for a in proposal["additions"]],
                          "removals": [r["token"] for r in proposal["removals"]]})
    client.post("/round/advance")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    state = client.get("/state").json()
    keywords = client.get("/keywords").json()
    token = keywords["keywords"][0]["token"]
    fixtures = {
        "state.json": state,
        "keywords.json": keywords,
        "neighbors.json": client.get(f"/neighbors/{quote(token, safe='')}?k=30").json(),
        "projection.json": client.get(
            "/projection?tokens=" + ",".join(
                quote(t, safe="") for t in
                [token] + [r["token"] for r in
                           client.get(f"/neighbors/{quote(token, safe='')}?k=8").json()["rows"]])).json(),
        "forecast.json": client.get(f"/forecast/{quote(token, safe='')}?h=15").json(),
        "proposal.json": client.get("/proposal").json(),
    }
    for name, body in fixtures.items():
        (out / name).write_text(json.dumps(body, indent=2), encoding="utf-8")
        print(f"wrote {out / name}")


if __name__ == "__main__":
    main()
