"""Time-stamped document ingestion, tokenization, keyword filtering, and frequency bucketing.

Documents travel as newline-delimited JSON ({id, created_at, text}); that is both
the source format and the persistence format for collected windows.
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Iterator, Protocol, Sequence

from .errors import IngestionError

logger = logging.getLogger(__name__)

HASHTAG = "hashtag"
MENTION = "mention"
WORD = "word"

_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
# optional # / @ prefix, then alphanumeric runs joined by intra-word apostrophes
_TOKEN_RE = re.compile(r"([#@]?)([^\W_]+(?:'[^\W_]+)*)", re.UNICODE)


@dataclass(frozen=True)
class Token:
    surface: str
    kind: str

    @staticmethod
    def classify(surface: str) -> str:
        if surface.startswith("#"):
            return HASHTAG
        if surface.startswith("@"):
            return MENTION
        return WORD

    @classmethod
    def from_surface(cls, surface: str) -> "Token":
        return cls(surface, cls.classify(surface))


def tokenize(text: str) -> list[Token]:
    """Lowercase, strip URLs, keep #/@ prefixes, split on non-alphanumerics.

    Intra-word apostrophes survive; tokens whose core (prefix excluded) is
    shorter than 2 characters are dropped. Pure and deterministic.
    """
    cleaned = _URL_RE.sub(" ", text).lower()
    tokens = []
    for match in _TOKEN_RE.finditer(cleaned):
        prefix, core = match.group(1), match.group(2)
        if len(core) < 2:
            continue
        tokens.append(Token.from_surface(prefix + core))
    return tokens


@lru_cache(maxsize=65536)
def token_surfaces(text: str) -> frozenset[str]:
    """Distinct token surfaces of a text; cached because filtering and counting reuse it."""
    return frozenset(t.surface for t in tokenize(text))


@dataclass(frozen=True)
class Document:
    id: str
    timestamp: datetime
    text: str


@dataclass(frozen=True)
class CorpusWindow:
    start: datetime
    end: datetime
    documents: tuple[Document, ...]
    bucket_width: timedelta

    def __post_init__(self):
        if self.start >= self.end:
            raise ValueError("window start must precede end")
        for doc in self.documents:
            if not (self.start <= doc.timestamp < self.end):
                raise ValueError(f"document {doc.id} outside window [{self.start}, {self.end})")
        stamps = [d.timestamp for d in self.documents]
        if stamps != sorted(stamps):
            raise ValueError("documents must be sorted by timestamp")

    def __len__(self):
        return len(self.documents)


@dataclass(frozen=True)
class FrequencySeries:
    token: Token
    bucket_width: timedelta
    buckets: tuple[tuple[datetime, int], ...]

    @property
    def counts(self) -> list[int]:
        return [c for _, c in self.buckets]

    @property
    def origin(self) -> datetime:
        return self.buckets[0][0]

    def __len__(self):
        return len(self.buckets)


def parse_timestamp(raw: str) -> datetime:
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    ts = datetime.fromisoformat(raw)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def parse_document(record: dict) -> Document:
    doc_id = record.get("id")
    if not isinstance(doc_id, str) or not doc_id:
        raise ValueError("missing or empty id")
    text = record.get("text")
    if not isinstance(text, str):
        raise ValueError("missing text")
    raw_ts = record.get("created_at")
    if not isinstance(raw_ts, str):
        raise ValueError("missing created_at")
    return Document(id=doc_id, timestamp=parse_timestamp(raw_ts), text=text)


def document_to_record(doc: Document) -> dict:
    return {"id": doc.id,
            "created_at": doc.timestamp.isoformat().replace("+00:00", "Z"),
            "text": doc.text}


@dataclass
class IngestResult:
    window: CorpusWindow
    malformed: int = 0
    out_of_range: int = 0
    duplicates: int = 0


def _iter_lines(source) -> Iterator[str]:
    if isinstance(source, (str, Path)):
        try:
            with open(source, encoding="utf-8") as fh:
                yield from fh
        except OSError as exc:
            raise IngestionError(f"cannot read {source}: {exc}") from exc
    else:
        yield from source


def ingest(source, start: datetime, end: datetime,
           bucket_width: timedelta = timedelta(hours=1)) -> IngestResult:
    """Collect every well-formed document with timestamp in [start, end).

    Malformed lines and out-of-range timestamps are counted and skipped, never
    fatal; an unreadable source raises IngestionError. Zero valid documents is
    an ordinary empty window.
    """
    docs: list[Document] = []
    seen_ids: set[str] = set()
    malformed = out_of_range = duplicates = 0
    for line in _iter_lines(source):
        line = line.strip()
        if not line:
            continue
        try:
            doc = parse_document(json.loads(line))
        except (json.JSONDecodeError, ValueError) as exc:
            malformed += 1
            logger.debug("skipping malformed record: %s", exc)
            continue
        if not (start <= doc.timestamp < end):
            out_of_range += 1
            continue
        if doc.id in seen_ids:
            duplicates += 1
            continue
        seen_ids.add(doc.id)
        docs.append(doc)
    docs.sort(key=lambda d: (d.timestamp, d.id))
    window = CorpusWindow(start=start, end=end, documents=tuple(docs), bucket_width=bucket_width)
    if malformed or out_of_range or duplicates:
        logger.info("ingest skipped %d malformed, %d out-of-range, %d duplicate records",
                    malformed, out_of_range, duplicates)
    return IngestResult(window=window, malformed=malformed,
                        out_of_range=out_of_range, duplicates=duplicates)


def write_window(window: CorpusWindow, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in window.documents:
            fh.write(json.dumps(document_to_record(doc)) + "\n")


def window_from_documents(docs: Iterable[Document], start: datetime, end: datetime,
                          bucket_width: timedelta) -> CorpusWindow:
    ordered = tuple(sorted(docs, key=lambda d: (d.timestamp, d.id)))
    return CorpusWindow(start=start, end=end, documents=ordered, bucket_width=bucket_width)


def filter_window(window: CorpusWindow, keywords: Iterable[str]) -> CorpusWindow:
    """Sub-window of documents whose token set intersects the keyword set.

    Exact token match after normalization; order preserved; idempotent.
    """
    keyset = {k.lower() for k in keywords}
    if not keyset:
        raise ValueError("keyword set must be non-empty")
    kept = tuple(d for d in window.documents if token_surfaces(d.text) & keyset)
    return CorpusWindow(start=window.start, end=window.end,
                        documents=kept, bucket_width=window.bucket_width)


def n_buckets(start: datetime, end: datetime, bucket_width: timedelta) -> int:
    return max(1, math.ceil((end - start) / bucket_width))


def frequency_series(window: CorpusWindow, token, bucket_width: timedelta | None = None) -> FrequencySeries:
    """Documents-per-bucket series for one token, zero-filled over the whole window.

    Document frequency: a document counts once per bucket no matter how often
    the token repeats inside it.
    """
    width = window.bucket_width if bucket_width is None else bucket_width
    if width <= timedelta(0):
        raise ValueError("bucket_width must be positive")
    surface = token.surface if isinstance(token, Token) else str(token).lower()
    total = n_buckets(window.start, window.end, width)
    counts = [0] * total
    for doc in window.documents:
        if surface in token_surfaces(doc.text):
            counts[int((doc.timestamp - window.start) / width)] += 1
    buckets = tuple((window.start + i * width, counts[i]) for i in range(total))
    return FrequencySeries(token=Token.from_surface(surface), bucket_width=width, buckets=buckets)


def document_counts(window: CorpusWindow, kinds: Sequence[str] | None = None) -> dict[str, int]:
    """Document frequency of every token in the window, optionally limited to kinds."""
    counts: dict[str, int] = {}
    wanted = set(kinds) if kinds else None
    for doc in window.documents:
        for surface in token_surfaces(doc.text):
            if wanted is not None and Token.classify(surface) not in wanted:
                continue
            counts[surface] = counts.get(surface, 0) + 1
    return counts


class Fetcher(Protocol):
    """Pull documents for a keyword set over a time range.

    File replay implements this; a live platform API client can slot in
    without touching anything downstream.
    """

    def pull(self, keywords: Sequence[str], start: datetime, end: datetime) -> Iterator[Document]:
        ...


@dataclass
class FileReplayFetcher:
    """Replays NDJSON files from a path (file or directory of files).

    Keywords are ignored: replay filtering happens downstream exactly like it
    would after a platform API pull.
    """

    path: Path
    _docs: list[Document] = field(default_factory=list, repr=False)
    _loaded: bool = field(default=False, repr=False)

    def __post_init__(self):
        self.path = Path(self.path)

    def _load(self):
        if self._loaded:
            return
        paths = sorted(self.path.glob("*.ndjson")) if self.path.is_dir() else [self.path]
        if not paths:
            raise IngestionError(f"no .ndjson files under {self.path}")
        for p in paths:
            for line in _iter_lines(p):
                line = line.strip()
                if not line:
                    continue
                try:
                    self._docs.append(parse_document(json.loads(line)))
                except (json.JSONDecodeError, ValueError):
                    logger.debug("replay fetcher skipping malformed line in %s", p)
        self._docs.sort(key=lambda d: (d.timestamp, d.id))
        self._loaded = True

    def pull(self, keywords: Sequence[str], start: datetime, end: datetime) -> Iterator[Document]:
        self._load()
        for doc in self._docs:
            if start <= doc.timestamp < end:
                yield doc

    def span(self) -> tuple[datetime, datetime]:
        self._load()
        if not self._docs:
            raise IngestionError(f"replay source {self.path} is empty")
        return self._docs[0].timestamp, self._docs[-1].timestamp
