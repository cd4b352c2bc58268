"""Dictionary-lookup and tf-idf nearest-neighbor baselines.

Both operate on lowercased tokenizations. The dictionary baseline scans a
title for contiguous token subsequences found in a lexicon of known values;
the kNN baseline votes over whole-title cosine neighbors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import TokenizedTitle, TokenizerConfig, tokenize


@dataclass(frozen=True)
class Lexicon:
    """Lowercased, tokenized value surfaces known from training data."""

    entries: frozenset[tuple[str, ...]]

    def __post_init__(self) -> None:
        if any(not entry for entry in self.entries):
            raise ValueError("lexicon entries must be non-empty")

    @classmethod
    def build(
        cls, values: Iterable[str], config: TokenizerConfig = TokenizerConfig()
    ) -> "Lexicon":
        entries = set()
        for value in values:
            tokens = tuple(t.lower() for t in tokenize(value, config).tokens)
            if tokens:
                entries.add(tokens)
        return cls(frozenset(entries))

    @property
    def max_tokens(self) -> int:
        return max((len(e) for e in self.entries), default=0)


def dict_extract(
    title: TokenizedTitle, lexicon: Lexicon, strategy: str
) -> str | None:
    """Find lexicon matches in the title and resolve multiples by strategy.

    "max" prefers the match with the most characters, "first" the earliest
    match; residual ties fall back to the other criterion and then to the
    lexicographically smallest surface. No match yields None.
    """
    if strategy not in ("max", "first"):
        raise ValueError(f"unknown strategy {strategy!r}")
    lowered = tuple(t.lower() for t in title.tokens)
    matches = []
    for start in range(len(lowered)):
        for end in range(start, min(len(lowered), start + lexicon.max_tokens)):
            if lowered[start : end + 1] in lexicon.entries:
                surface = " ".join(title.tokens[start : end + 1])
                matches.append((start, len(surface), surface))
    if not matches:
        return None
    if strategy == "max":
        matches.sort(key=lambda m: (-m[1], m[0], m[2].lower()))
    else:
        matches.sort(key=lambda m: (m[0], -m[1], m[2].lower()))
    return matches[0][2]


@dataclass(frozen=True)
class TfIdfIndex:
    """Unit-norm tf-idf vectors for the training titles, with their labels.

    idf comes from the training corpus only; query tokens unseen in training
    contribute nothing.
    """

    doc_freq: dict[str, int]
    n_docs: int
    vectors: tuple[dict[str, float], ...]
    labels: tuple[str | None, ...]

    def __post_init__(self) -> None:
        if len(self.vectors) != len(self.labels):
            raise ValueError("one label per stored vector required")
        for vec in self.vectors:
            norm = math.sqrt(sum(w * w for w in vec.values()))
            if vec and abs(norm - 1.0) > 1e-10:
                raise ValueError(f"stored vector has norm {norm}, expected 1")

    @classmethod
    def build(
        cls, documents: Sequence[Sequence[str]], labels: Sequence[str | None]
    ) -> "TfIdfIndex":
        if len(documents) != len(labels):
            raise ValueError("one label per document required")
        n = len(documents)
        doc_freq: dict[str, int] = {}
        lowered_docs = [[t.lower() for t in doc] for doc in documents]
        for doc in lowered_docs:
            for token in set(doc):
                doc_freq[token] = doc_freq.get(token, 0) + 1
        vectors = tuple(_tfidf_vector(doc, doc_freq, n) for doc in lowered_docs)
        return cls(doc_freq, n, vectors, tuple(labels))


def _tfidf_vector(
    tokens: Sequence[str], doc_freq: dict[str, int], n_docs: int
) -> dict[str, float]:
    """Raw term frequency times log(N / df), L2-normalized."""
    counts: dict[str, int] = {}
    for token in tokens:
        counts[token] = counts.get(token, 0) + 1
    vec = {}
    for token, tf in counts.items():
        df = doc_freq.get(token)
        if not df:
            continue
        weight = tf * math.log(n_docs / df)
        if weight != 0.0:
            vec[token] = weight
    norm = math.sqrt(sum(w * w for w in vec.values()))
    if norm > 0:
        vec = {t: w / norm for t, w in vec.items()}
    return vec


def _cosine(a: dict[str, float], b: dict[str, float]) -> float:
    if len(b) < len(a):
        a, b = b, a
    return sum(w * b[t] for t, w in a.items() if t in b)


def knn_extract(title: TokenizedTitle, index: TfIdfIndex, k: int) -> str | None:
    """Label of the nearest training titles by cosine similarity.

    k=1 returns the nearest neighbor's label. k=3 takes a majority vote and
    falls back to the single nearest neighbor when all three labels differ.
    Similarity ties break toward earlier training-corpus insertion order.
    """
    if k not in (1, 3):
        raise ValueError("k must be 1 or 3")
    if not index.vectors:
        raise ValueError("empty tf-idf index")
    query = _tfidf_vector([t.lower() for t in title.tokens], index.doc_freq, index.n_docs)
    sims = [_cosine(query, stored) for stored in index.vectors]
    order = sorted(range(len(sims)), key=lambda i: (-sims[i], i))
    top = order[:k]
    if k == 1 or len(top) < 3:
        return index.labels[top[0]]
    votes: dict[str | None, int] = {}
    for i in top:
        votes[index.labels[i]] = votes.get(index.labels[i], 0) + 1
    best_count = max(votes.values())
    if best_count == 1:
        return index.labels[top[0]]
    for i in top:  # earliest of the majority keeps neighbor-order determinism
        if votes[index.labels[i]] == best_count:
            return index.labels[i]
    raise AssertionError("unreachable")


@dataclass(frozen=True)
class DictModel:
    """Serializable wrapper pairing a lexicon with its match strategy."""

    lexicon: Lexicon
    strategy: str
    attribute: str


@dataclass(frozen=True)
class KnnModel:
    """Serializable wrapper pairing a tf-idf index with its k."""

    index: TfIdfIndex
    k: int
    attribute: str
