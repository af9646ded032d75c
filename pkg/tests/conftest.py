import json
import logging
from datetime import datetime, timedelta, timezone

import pytest

from trendmon.corpus import CorpusWindow, Document, write_window

logging.getLogger("trendmon").setLevel(logging.ERROR)

T0 = datetime(2021, 1, 1, tzinfo=timezone.utc)
HOUR = timedelta(hours=1)


def make_window(texts, start=T0, spacing=timedelta(minutes=1), span=None,
                bucket_width=HOUR):
    """Window with one document per text, spaced evenly from start."""
    docs = tuple(Document(id=f"d{i:04d}", timestamp=start + i * spacing, text=text)
                 for i, text in enumerate(texts))
    end = span if span is not None else (start + max(len(texts), 1) * spacing)
    return CorpusWindow(start=start, end=end, documents=docs, bucket_width=bucket_width)


def write_replay_fixture(windows, directory):
    """Per-round NDJSON files plus the manifest the replay schedule reads."""
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {"rounds": [],
                "bucket_width_seconds": windows[0].bucket_width.total_seconds()}
    for i, window in enumerate(windows):
        name = f"round_{i:03d}.ndjson"
        write_window(window, directory / name)
        manifest["rounds"].append({"file": name,
                                   "start": window.start.isoformat(),
                                   "end": window.end.isoformat()})
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return directory


@pytest.fixture
def t0():
    return T0
