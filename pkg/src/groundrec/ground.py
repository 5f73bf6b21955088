"""The grounding kernel: L2 distances from an oracle vector to every catalog
item, min-max normalization, reweighting by a per-item weight raised to gamma,
and full-catalog ranking. Also the BM25 alternative grounding strategy.

Reweighting divides the normalized distance by (1 + w)^gamma with w in [0,1],
so higher-weight items get smaller adjusted distances and better ranks.
Numerics: with w <= 1 the divisor is at most 2^gamma, so over the documented
gamma grid (<= 100) the smallest adjusted distance is ~1e-31 -- far above the
double underflow threshold (gamma would need to exceed ~1000 to underflow).
Direct division therefore stays exact and order-preserving; no log-space
fallback is needed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .ingest import ItemCatalog
from .pop import minmax
from .text import tokenize


@dataclass
class GroundingConfig:
    injection: str = "none"  # none | popularity | collaborative
    gamma: float = 0.0
    normalize_embeddings: bool = False
    strategy: str = "l2"  # l2 | bm25
    bm25_k1: float = 1.5
    bm25_b: float = 0.75

    def __post_init__(self):
        if self.injection not in ("none", "popularity", "collaborative"):
            raise ValueError(f"unknown injection mode {self.injection!r}")
        if not math.isfinite(self.gamma) or self.gamma < 0:
            raise ValueError("gamma must be finite and >= 0")


@dataclass
class RankedList:
    indices: np.ndarray  # best first, excluded items absent
    values: np.ndarray  # adjusted distance (l2) or negated score (bm25)
    strategy: str = "l2"

    def position(self, item_idx):
        """1-based rank of an item; raises if excluded."""
        where = np.nonzero(self.indices == item_idx)[0]
        if where.size == 0:
            raise DataError(f"item index {item_idx} is not in the ranked list")
        return int(where[0]) + 1


def l2_distances(matrix, oracle) -> np.ndarray:
    vectors = matrix.vectors if hasattr(matrix, "vectors") else np.asarray(matrix)
    oracle = np.asarray(oracle, dtype=np.float64)
    if vectors.shape[1] != oracle.shape[0]:
        raise DataError(
            f"dim mismatch: matrix dim {vectors.shape[1]}, oracle dim {oracle.shape[0]}"
        )
    diff = vectors.astype(np.float64) - oracle
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def normalize_distances(raw) -> np.ndarray:
    raw = np.asarray(raw, dtype=np.float64)
    if raw.size == 0:
        raise DataError("cannot normalize an empty distance vector")
    if not np.isfinite(raw).all():
        raise DataError("non-finite raw distance")
    return minmax(raw)


def inject(normalized, weights, gamma) -> np.ndarray:
    """adjusted_i = normalized_i / (1 + w_i)^gamma, w in [0,1], gamma >= 0."""
    normalized = np.asarray(normalized, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != normalized.shape:
        raise DataError("weights and normalized distances differ in length")
    if not np.isfinite(weights).all() or weights.min() < 0 or weights.max() > 1:
        raise DataError("injection weights must lie in [0,1]; normalize the score source")
    if gamma == 0:
        return normalized.copy()
    return normalized / (1.0 + weights) ** gamma


def rank(adjusted, exclusions=frozenset()) -> RankedList:
    adjusted = np.asarray(adjusted, dtype=np.float64)
    n = adjusted.shape[0]
    keep = np.ones(n, dtype=bool)
    for idx in exclusions:
        if not 0 <= idx < n:
            raise DataError(f"exclusion index {idx} out of range")
        keep[idx] = False
    candidates = np.nonzero(keep)[0]
    if candidates.size == 0:
        raise DataError("all items excluded; nothing to rank")
    vals = adjusted[candidates]
    order = np.lexsort((candidates, vals))  # value asc, canonical index asc
    return RankedList(indices=candidates[order], values=vals[order], strategy="l2")


def ground(matrix, oracle, weights=None, gamma=0.0, exclusions=frozenset()) -> RankedList:
    """Full kernel in one call: distances, normalize, inject, rank."""
    norm = normalize_distances(l2_distances(matrix, oracle))
    if weights is not None and gamma > 0:
        adjusted = inject(norm, weights, gamma)
    else:
        adjusted = norm
    return rank(adjusted, exclusions)


class BM25Index:
    """Okapi BM25 over catalog titles, tokenized with the shared tokenizer."""

    def __init__(self, catalog: ItemCatalog, k1=1.5, b=0.75):
        self.k1 = k1
        self.b = b
        self.docs = [tokenize(catalog.title(i)) for i in catalog.ids]
        self.n_docs = len(self.docs)
        self.doc_lens = np.array([len(d) for d in self.docs], dtype=np.float64)
        self.avgdl = float(self.doc_lens.mean()) if self.n_docs else 0.0
        df: dict[str, int] = {}
        self.term_freqs = []
        for doc in self.docs:
            tf: dict[str, int] = {}
            for t in doc:
                tf[t] = tf.get(t, 0) + 1
            self.term_freqs.append(tf)
            for t in tf:
                df[t] = df.get(t, 0) + 1
        # non-negative idf variant: ln(1 + (N - df + 0.5)/(df + 0.5))
        self.idf = {
            t: math.log(1.0 + (self.n_docs - n + 0.5) / (n + 0.5))
            for t, n in df.items()
        }

    def scores(self, query_tokens) -> np.ndarray:
        scores = np.zeros(self.n_docs, dtype=np.float64)
        terms = [t for t in query_tokens if t in self.idf]
        if not terms:
            return scores
        for i, tf in enumerate(self.term_freqs):
            dl = self.doc_lens[i]
            norm = self.k1 * (1.0 - self.b + self.b * dl / self.avgdl)
            s = 0.0
            for t in terms:
                f = tf.get(t)
                if f:
                    s += self.idf[t] * f * (self.k1 + 1.0) / (f + norm)
            scores[i] = s
        return scores


def bm25_rank(query_tokens, index: BM25Index, exclusions=frozenset()) -> RankedList:
    """Rank catalog items by BM25 score descending, ties by canonical index.

    Zero-score items share the tie-break and thus land after all positive-score
    items, in canonical index order.
    """
    if isinstance(query_tokens, str):
        query_tokens = tokenize(query_tokens)
    query_tokens = list(query_tokens)
    if not query_tokens:
        warnings.warn("empty BM25 query after tokenization; ranking by index order")
    scores = index.scores(query_tokens)
    n = scores.shape[0]
    keep = np.ones(n, dtype=bool)
    for idx in exclusions:
        if not 0 <= idx < n:
            raise DataError(f"exclusion index {idx} out of range")
        keep[idx] = False
    candidates = np.nonzero(keep)[0]
    if candidates.size == 0:
        raise DataError("all items excluded; nothing to rank")
    vals = -scores[candidates]  # negate: descending score == ascending value
    order = np.lexsort((candidates, vals))
    return RankedList(indices=candidates[order], values=vals[order], strategy="bm25")
