"""Command-line entry points: ingest, simulate, forecast, serve, train-embed."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import datetime, timedelta, timezone
from pathlib import Path

from .config import ForecastConfig, GloveConfig, PolicyConfig, RunConfig, load_config
from .corpus import (CorpusWindow, FileReplayFetcher, FrequencySeries, Token,
                     ingest, parse_timestamp, write_window)
from .engine import MonitorEngine, load_replay_schedule
from .evaluation import format_table, per_round_csv, report_json, simulate
from .forecast import fit_and_forecast, forecast_record, prepare

logger = logging.getLogger(__name__)


def load_round_windows(corpus_dir, bucket_seconds: float | None = None) -> list[CorpusWindow]:
    """Per-round windows from a directory of NDJSON files, using manifest.json
    bounds when present."""
    corpus_dir = Path(corpus_dir)
    manifest_path = corpus_dir / "manifest.json"
    manifest = json.loads(manifest_path.read_text(encoding="utf-8")) if manifest_path.exists() else None
    windows = []
    if manifest:
        width = timedelta(seconds=bucket_seconds or manifest.get("bucket_width_seconds", 3600.0))
        for entry in manifest["rounds"]:
            start = parse_timestamp(entry["start"])
            end = parse_timestamp(entry["end"])
            result = ingest(corpus_dir / entry["file"], start, end, bucket_width=width)
            windows.append(result.window)
    else:
        for path in sorted(corpus_dir.glob("*.ndjson")):
            result = ingest(path, datetime.min.replace(tzinfo=timezone.utc),
                            datetime.max.replace(tzinfo=timezone.utc) - timedelta(days=1),
                            bucket_width=timedelta(seconds=bucket_seconds or 3600.0))
            w = result.window
            if len(w) == 0:
                continue
            start = w.documents[0].timestamp
            end = w.documents[-1].timestamp + timedelta(seconds=1)
            windows.append(CorpusWindow(start=start, end=end, documents=w.documents,
                                        bucket_width=w.bucket_width))
    return windows


def cmd_ingest(args) -> int:
    start = parse_timestamp(args.start) if args.start else datetime.min.replace(tzinfo=timezone.utc)
    end = parse_timestamp(args.end) if args.end else datetime.max.replace(tzinfo=timezone.utc) - timedelta(days=1)
    result = ingest(args.path, start, end, bucket_width=timedelta(seconds=args.bucket_seconds))
    write_window(result.window, args.out)
    print(f"ingested {len(result.window)} documents "
          f"({result.malformed} malformed, {result.out_of_range} out of range, "
          f"{result.duplicates} duplicates) -> {args.out}")
    return 0


def cmd_simulate(args) -> int:
    windows = load_round_windows(args.corpus_dir, args.bucket_seconds)
    if args.rounds:
        windows = windows[:args.rounds]
    monitors = [m.strip() for m in args.monitors.split(",") if m.strip()]
    glove_cfg = GloveConfig(min_count=args.glove_min_count, epochs=args.glove_epochs,
                            seed=args.seed)
    forecast_cfg = ForecastConfig(p_max=2, d_max=1, q_max=1)
    policy_cfg = PolicyConfig(cap=args.keywords, min_count=args.policy_min_count)
    reports = simulate(windows, monitors=monitors, m=args.truth_size, n=args.keywords,
                       glove_cfg=glove_cfg, forecast_cfg=forecast_cfg,
                       policy_cfg=policy_cfg)
    print(format_table(reports))
    if args.report:
        Path(args.report).write_text(report_json(reports), encoding="utf-8")
        print(f"report written to {args.report}")
    if args.csv:
        Path(args.csv).write_text(per_round_csv(reports), encoding="utf-8")
        print(f"per-round scores written to {args.csv}")
    return 0


def cmd_forecast(args) -> int:
    data = json.loads(Path(args.series).read_text(encoding="utf-8"))
    origin = parse_timestamp(data["origin"])
    width = timedelta(seconds=data.get("bucket_width_seconds", 3600.0))
    counts = data["counts"]
    buckets = tuple((origin + i * width, int(c)) for i, c in enumerate(counts))
    series = FrequencySeries(token=Token.from_surface(data.get("token", "series")),
                             bucket_width=width, buckets=buckets)
    prepared = prepare(series)
    cfg = ForecastConfig(horizon=args.horizon)
    fit, fc = fit_and_forecast(prepared, cfg)
    record = forecast_record(prepared.token, prepared, fc, fit.validation_mse)
    record["spec"] = {"p": fit.spec.p, "d": fit.spec.d, "q": fit.spec.q}
    print(json.dumps(record, indent=2))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    cfg = load_config(args.config) if args.config else RunConfig()
    if args.mode:
        cfg = RunConfig(**{**cfg.__dict__, "mode": args.mode})
    fetcher = FileReplayFetcher(Path(args.source)) if args.source else None
    schedule = load_replay_schedule(args.source) if (args.source and cfg.mode == "replay") else None
    if fetcher is None:
        print("serve needs --source (live platform clients plug in via the fetcher API)",
              file=sys.stderr)
        return 2
    engine = MonitorEngine(cfg, fetcher, args.run_dir, schedule=schedule)
    app = create_app(engine)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def cmd_train_embed(args) -> int:
    from .corpus import ingest as _ingest
    from .embedding import build_cooccurrence, save_vectors, train_glove

    result = _ingest(args.window, datetime.min.replace(tzinfo=timezone.utc),
                     datetime.max.replace(tzinfo=timezone.utc) - timedelta(days=1))
    vocab, cooc = build_cooccurrence(result.window, vocab_min_count=args.min_count,
                                     context_window=args.context_window)
    model = train_glove(vocab, cooc, d=args.dim, epochs=args.epochs, seed=args.seed)
    save_vectors(model, args.out)
    print(f"trained {len(vocab)} x {args.dim} vectors in {args.epochs} epochs, "
          f"final loss {model.final_loss:.4f} -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trendmon",
                                     description="dynamic keyword monitor toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="normalize an NDJSON document file into a window")
    p.add_argument("path")
    p.add_argument("--out", required=True)
    p.add_argument("--start", default=None)
    p.add_argument("--end", default=None)
    p.add_argument("--bucket-seconds", type=float, default=3600.0)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("simulate", help="replay a multi-round corpus and score monitors")
    p.add_argument("corpus_dir")
    p.add_argument("--monitors", default="dynamic,static,last-top")
    p.add_argument("--rounds", type=int, default=None)
    p.add_argument("--report", default=None)
    p.add_argument("--csv", default=None)
    p.add_argument("--keywords", type=int, default=15, help="keyword cap n")
    p.add_argument("--truth-size", type=int, default=20, help="ground-truth size m")
    p.add_argument("--bucket-seconds", type=float, default=None)
    p.add_argument("--glove-epochs", type=int, default=30)
    p.add_argument("--glove-min-count", type=int, default=2)
    p.add_argument("--policy-min-count", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("forecast", help="fit and forecast one frequency series")
    p.add_argument("series", help="JSON file: {token, origin, bucket_width_seconds, counts}")
    p.add_argument("--h", dest="horizon", type=int, default=15)
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config", default=None)
    p.add_argument("--mode", choices=["replay", "live"], default=None)
    p.add_argument("--source", default=None, help="replay corpus file or directory")
    p.add_argument("--run-dir", default="run")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("train-embed", help="train vectors on a window file")
    p.add_argument("window")
    p.add_argument("--dim", type=int, default=50)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--min-count", type=int, default=5)
    p.add_argument("--context-window", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_embed)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
