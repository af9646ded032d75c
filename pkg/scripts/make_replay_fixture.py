#!/usr/bin/env python3
"""Write a replay fixture directory (per-round NDJSON + manifest.json) from the
synthetic drift generator, ready for `trendmon serve --mode replay --source <dir>`."""

import argparse
import json
from pathlib import Path

from trendmon.corpus import write_window
from trendmon.drift import DriftConfig, generate_drift_corpus
from trendmon.evaluation import top_hashtags


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir")
    parser.add_argument("--rounds", type=int, default=6)
    parser.add_argument("--docs-per-round", type=int, default=400)
    parser.add_argument("--seed", type=int, default=3)
    args = parser.parse_args()

    rounds = generate_drift_corpus(DriftConfig(rounds=args.rounds,
                                               docs_per_round=args.docs_per_round,
                                               seed=args.seed))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"rounds": [],
                "bucket_width_seconds": rounds[0].bucket_width.total_seconds()}
    for i, window in enumerate(rounds):
        name = f"round_{i:03d}.ndjson"
        write_window(window, out / name)
        manifest["rounds"].append({"file": name,
                                   "start": window.start.isoformat(),
                                   "end": window.end.isoformat()})
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2), encoding="utf-8")

    seeds = top_hashtags(rounds[0], 15)
    config = {
        "mode": "replay",
        "decision_mode": "semi",
        "bucket_width_seconds": manifest["bucket_width_seconds"],
        "glove": {"min_count": 2, "epochs": 25},
        "forecast": {"p_max": 2, "d_max": 1, "q_max": 1},
        "policy": {"min_count": 5},
        "seed_keywords": list(seeds),
    }
    (out / "config.json").write_text(json.dumps(config, indent=2), encoding="utf-8")
    print(f"wrote {args.rounds} rounds to {out}")
    print(f"serve with: trendmon serve --config {out / 'config.json'} "
          f"--source {out} --run-dir run")


if __name__ == "__main__":
    main()
