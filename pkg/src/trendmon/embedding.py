"""GloVe embeddings over a corpus window: co-occurrence stats, AdaGrad training,
nearest-neighbor queries, and 2D projections for the scatter view.

The trainer fits the weighted least-squares objective
    J = sum_ij f(x_ij) * (w_i . wc_j + b_i + bc_j - log x_ij)^2,
f(x) = min(1, (x/x_max)^alpha), by per-entry AdaGrad SGD. Published vector =
main + context.
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import CorpusWindow, Token, tokenize
from .errors import CorpusTooSmallError, TokenNotFoundError, TrainingDivergedError

logger = logging.getLogger(__name__)


@dataclass
class Vocabulary:
    surfaces: list[str]              # dense index -> surface
    counts: list[int]                # dense index -> corpus token count
    min_count: int = 1
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.index = {s: i for i, s in enumerate(self.surfaces)}

    def __len__(self):
        return len(self.surfaces)

    def __contains__(self, surface: str) -> bool:
        return surface in self.index

    def count_of(self, surface: str) -> int:
        return self.counts[self.index[surface]]


@dataclass
class CooccurrenceMatrix:
    entries: dict[tuple[int, int], float]
    window_size: int
    symmetric: bool = True

    @property
    def nnz(self) -> int:
        return len(self.entries)


def build_cooccurrence(window: CorpusWindow, vocab_min_count: int = 1,
                       context_window: int = 10) -> tuple[Vocabulary, CooccurrenceMatrix]:
    """Accumulate 1/offset for every token pair at distance <= context_window
    within a document; entries are symmetric. Vocabulary is pruned at
    vocab_min_count before windowing, so offsets are measured over surviving
    tokens.
    """
    if context_window < 1:
        raise ValueError("context_window must be >= 1")
    if len(window) == 0:
        raise CorpusTooSmallError("empty corpus window")
    token_lists = [[t.surface for t in tokenize(d.text)] for d in window.documents]
    counts = Counter(s for toks in token_lists for s in toks)
    keep = sorted((s for s, c in counts.items() if c >= vocab_min_count),
                  key=lambda s: (-counts[s], s))
    if not keep:
        raise CorpusTooSmallError(
            f"no token reaches min_count={vocab_min_count}; corpus too small")
    vocab = Vocabulary(surfaces=keep, counts=[counts[s] for s in keep],
                       min_count=vocab_min_count)
    entries: dict[tuple[int, int], float] = defaultdict(float)
    for toks in token_lists:
        ids = [vocab.index[s] for s in toks if s in vocab.index]
        for i, a in enumerate(ids):
            for offset in range(1, context_window + 1):
                j = i + offset
                if j >= len(ids):
                    break
                b = ids[j]
                w = 1.0 / offset
                entries[(a, b)] += w
                entries[(b, a)] += w
    return vocab, CooccurrenceMatrix(entries=dict(entries), window_size=context_window)


@dataclass
class EmbeddingModel:
    vocab: Vocabulary
    vectors: np.ndarray                 # V x d, main + context summed
    dimension: int
    training_log: list[tuple[int, float]] = field(default_factory=list)
    seed: int = 0
    # raw parameters kept so a later round can warm-start
    main: np.ndarray | None = field(default=None, repr=False)
    context: np.ndarray | None = field(default=None, repr=False)
    bias_main: np.ndarray | None = field(default=None, repr=False)
    bias_context: np.ndarray | None = field(default=None, repr=False)

    @property
    def final_loss(self) -> float:
        return self.training_log[-1][1] if self.training_log else float("nan")

    def vector(self, surface: str) -> np.ndarray:
        if surface not in self.vocab:
            raise TokenNotFoundError(surface)
        return self.vectors[self.vocab.index[surface]]


def _entry_arrays(cooc: CooccurrenceMatrix, x_max: float, alpha: float):
    items = sorted(cooc.entries.items())  # deterministic iteration
    ii = np.array([k[0] for k, _ in items], dtype=np.int64)
    jj = np.array([k[1] for k, _ in items], dtype=np.int64)
    xs = np.array([v for _, v in items], dtype=np.float64)
    lx = np.log(xs)
    fx = np.minimum(1.0, (xs / x_max) ** alpha)
    return ii, jj, xs, lx, fx


def glove_loss(W, C, b, bc, ii, jj, lx, fx) -> float:
    diff = np.einsum("ij,ij->i", W[ii], C[jj]) + b[ii] + bc[jj] - lx
    return float(np.sum(fx * diff * diff))


def glove_loss_and_grad(W, C, b, bc, ii, jj, lx, fx):
    """Full-batch loss and analytic gradients, used by the finite-difference check."""
    diff = np.einsum("ij,ij->i", W[ii], C[jj]) + b[ii] + bc[jj] - lx
    weighted = 2.0 * fx * diff
    gW = np.zeros_like(W)
    gC = np.zeros_like(C)
    gb = np.zeros_like(b)
    gbc = np.zeros_like(bc)
    np.add.at(gW, ii, weighted[:, None] * C[jj])
    np.add.at(gC, jj, weighted[:, None] * W[ii])
    np.add.at(gb, ii, weighted)
    np.add.at(gbc, jj, weighted)
    return float(np.sum(fx * diff * diff)), (gW, gC, gb, gbc)


def _sgd_pass(order, ii, jj, lx, fx, W, C, b, bc, GW, GC, Gb, Gbc, lr):
    for k in order:
        i = ii[k]
        j = jj[k]
        wi = W[i]
        cj = C[j]
        g = 2.0 * fx[k] * (float(wi @ cj) + b[i] + bc[j] - lx[k])
        gw = g * cj
        gc = g * wi
        W[i] = wi - lr * gw / np.sqrt(GW[i])
        C[j] = cj - lr * gc / np.sqrt(GC[j])
        GW[i] += gw * gw
        GC[j] += gc * gc
        b[i] -= lr * g / math.sqrt(Gb[i])
        bc[j] -= lr * g / math.sqrt(Gbc[j])
        Gb[i] += g * g
        Gbc[j] += g * g


def train_glove(vocab: Vocabulary, cooc: CooccurrenceMatrix, d: int = 50,
                epochs: int = 50, seed: int = 0, x_max: float = 100.0,
                alpha: float = 0.75, learning_rate: float = 0.05,
                threads: int = 1, warm_start: EmbeddingModel | None = None) -> EmbeddingModel:
    """AdaGrad SGD over co-occurrence entries. Bit-reproducible for a given
    seed when threads == 1; with threads > 1 updates are lock-free and only
    the final loss is comparable (within a few percent)."""
    if not cooc.entries:
        raise CorpusTooSmallError("co-occurrence matrix is empty")
    if d < 2:
        raise ValueError("dimension must be >= 2")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    V = len(vocab)
    rng = np.random.default_rng(seed)
    W = (rng.random((V, d)) - 0.5) / d
    C = (rng.random((V, d)) - 0.5) / d
    b = (rng.random(V) - 0.5) / d
    bc = (rng.random(V) - 0.5) / d
    if warm_start is not None and warm_start.main is not None:
        carried = 0
        for s, i in vocab.index.items():
            if s in warm_start.vocab:
                j = warm_start.vocab.index[s]
                W[i] = warm_start.main[j]
                C[i] = warm_start.context[j]
                b[i] = warm_start.bias_main[j]
                bc[i] = warm_start.bias_context[j]
                carried += 1
        logger.debug("warm start carried %d/%d token rows", carried, V)
    GW = np.ones((V, d))
    GC = np.ones((V, d))
    Gb = np.ones(V)
    Gbc = np.ones(V)
    ii, jj, _, lx, fx = _entry_arrays(cooc, x_max, alpha)
    n = len(ii)
    log: list[tuple[int, float]] = []
    for epoch in range(epochs):
        order = rng.permutation(n)
        if threads <= 1:
            _sgd_pass(order, ii, jj, lx, fx, W, C, b, bc, GW, GC, Gb, Gbc, learning_rate)
        else:
            shards = [order[t::threads] for t in range(threads)]
            with ThreadPoolExecutor(max_workers=threads) as pool:
                futures = [pool.submit(_sgd_pass, shard, ii, jj, lx, fx,
                                       W, C, b, bc, GW, GC, Gb, Gbc, learning_rate)
                           for shard in shards]
                for fut in futures:
                    fut.result()
        loss = glove_loss(W, C, b, bc, ii, jj, lx, fx)
        if not math.isfinite(loss):
            raise TrainingDivergedError(epoch)
        log.append((epoch, loss))
    return EmbeddingModel(vocab=vocab, vectors=W + C, dimension=d, training_log=log,
                          seed=seed, main=W, context=C, bias_main=b, bias_context=bc)


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(u @ v) / (nu * nv)


@dataclass(frozen=True)
class Neighbor:
    surface: str
    kind: str
    similarity: float
    count: int


@dataclass(frozen=True)
class NeighborList:
    query: str
    neighbors: tuple[Neighbor, ...]


def nearest_neighbors(model: EmbeddingModel, query: str, k: int,
                      kind_filter: Iterable[str] | None = None) -> NeighborList:
    """Top-k vocabulary tokens by cosine similarity to the query (query itself
    excluded). Ties break by higher corpus frequency, then lexicographically."""
    if k < 1:
        raise ValueError("k must be >= 1")
    surface = query.lower()
    if surface not in model.vocab:
        raise TokenNotFoundError(surface)
    qidx = model.vocab.index[surface]
    mat = model.vectors
    norms = np.linalg.norm(mat, axis=1)
    safe = np.where(norms == 0.0, 1.0, norms)
    sims = (mat @ mat[qidx]) / (safe * max(norms[qidx], 1e-300))
    sims = np.where(norms == 0.0, 0.0, sims)
    kinds = set(kind_filter) if kind_filter else None
    candidates = []
    for idx, s in enumerate(model.vocab.surfaces):
        if idx == qidx:
            continue
        kind = Token.classify(s)
        if kinds is not None and kind not in kinds:
            continue
        candidates.append((-float(sims[idx]), -model.vocab.counts[idx], s, kind))
    candidates.sort()
    top = candidates[:k]
    return NeighborList(query=surface, neighbors=tuple(
        Neighbor(surface=s, kind=kind, similarity=-negsim, count=-negcount)
        for negsim, negcount, s, kind in top))


def project_2d(model: EmbeddingModel, tokens: Sequence[str], seed: int = 0,
               method: str = "tsne") -> list[tuple[str, float, float]]:
    """2D coordinates for the scatter view: t-SNE with PCA init by default,
    plain PCA as the fast fallback. Deterministic for a given seed."""
    if len(tokens) < 2:
        raise ValueError("need at least 2 tokens to project")
    surfaces = [t.lower() for t in tokens]
    rows = []
    for s in surfaces:
        if s not in model.vocab:
            raise TokenNotFoundError(s)
        rows.append(model.vectors[model.vocab.index[s]])
    X = np.array(rows, dtype=np.float64)
    n = len(surfaces)
    if method == "pca":
        coords = _pca_2d(X)
    elif method == "tsne":
        from sklearn.manifold import TSNE

        perplexity = min(30.0, (n - 1) / 3.0)
        tsne = TSNE(n_components=2, perplexity=perplexity, init="pca",
                    random_state=seed, max_iter=500)
        coords = tsne.fit_transform(X)
    else:
        raise ValueError(f"unknown projection method: {method}")
    return [(s, float(x), float(y)) for s, (x, y) in zip(surfaces, coords)]


def _pca_2d(X: np.ndarray) -> np.ndarray:
    centered = X - X.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    comps = vt[:2]
    if comps.shape[0] < 2:  # rank-1 data still needs a second axis
        comps = np.vstack([comps, np.zeros_like(comps[0])])
    # fix sign so projections are reproducible across BLAS builds
    signs = np.sign(comps[np.arange(comps.shape[0]), np.argmax(np.abs(comps), axis=1)])
    signs[signs == 0] = 1.0
    return centered @ (comps * signs[:, None]).T


def save_vectors(model: EmbeddingModel, path) -> None:
    """One line per token: surface then d floats (standard vector-file layout),
    plus a .meta.json sidecar with dimension/epochs/seed/loss/counts."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for idx, surface in enumerate(model.vocab.surfaces):
            vec = " ".join(repr(float(v)) for v in model.vectors[idx])
            fh.write(f"{surface} {vec}\n")
    meta = {
        "dimension": int(model.dimension),
        "epochs": len(model.training_log),
        "seed": int(model.seed),
        "final_loss": float(model.final_loss),
        "min_count": int(model.vocab.min_count),
        "counts": [int(c) for c in model.vocab.counts],
    }
    Path(f"{path}.meta.json").write_text(json.dumps(meta) + "\n", encoding="utf-8")


def load_vectors(path) -> EmbeddingModel:
    path = Path(path)
    surfaces: list[str] = []
    rows: list[list[float]] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                continue
            surfaces.append(parts[0])
            rows.append([float(v) for v in parts[1:]])
    if not rows:
        raise ValueError(f"no vectors in {path}")
    meta_path = Path(f"{path}.meta.json")
    meta = json.loads(meta_path.read_text(encoding="utf-8")) if meta_path.exists() else {}
    counts = meta.get("counts") or [1] * len(surfaces)
    vocab = Vocabulary(surfaces=surfaces, counts=list(counts),
                       min_count=meta.get("min_count", 1))
    vectors = np.array(rows, dtype=np.float64)
    log = [(meta.get("epochs", 0), meta["final_loss"])] if "final_loss" in meta else []
    return EmbeddingModel(vocab=vocab, vectors=vectors, dimension=vectors.shape[1],
                          training_log=log, seed=meta.get("seed", 0))
