"""Exact argmax decoding over the label chain, plus an enumeration oracle.

Ties are broken toward the lexicographically smallest label sequence under
the alphabet's label order (B < I < O), so decoding is fully deterministic.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .corpus import LabelAlphabet, TokenizedTitle
from .features import (
    CompiledTitle,
    FeatureIndex,
    FeatureSet,
    TransitionIds,
    compile_title,
    extract_position_features,
    global_feature_vector,
    masked_weights,
)

BRUTE_FORCE_MAX_TOKENS = 12


@dataclass
class LinearModel:
    """Dense weights over a frozen feature index, shared by SP and CRF."""

    weights: np.ndarray
    index: FeatureIndex
    alphabet: LabelAlphabet
    feature_set: FeatureSet
    kind: str  # "perceptron" | "crf"

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (self.index.d,):
            raise ValueError(
                f"weight vector of length {self.weights.shape} does not match "
                f"index size {self.index.d}"
            )
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("model weights must be finite")
        if self.kind not in ("perceptron", "crf"):
            raise ValueError(f"unknown model kind {self.kind!r}")

    def transition_ids(self) -> TransitionIds:
        return TransitionIds.build(self.index, self.alphabet)

    def compile(self, title: TokenizedTitle) -> CompiledTitle:
        return compile_title(title, self.feature_set, self.index, self.alphabet)


def score(title: TokenizedTitle, labels, model: LinearModel) -> float:
    """w . F(x, y), exactly."""
    vector = global_feature_vector(title, labels, model.feature_set, model.index)
    return vector.dot(model.weights)


def _chain_scores(
    compiled: CompiledTitle, weights: np.ndarray, trans: TransitionIds
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unary (m, L), start (L,), transition (L, L) score tables."""
    unary = compiled.unary_scores(weights)
    start = masked_weights(weights, trans.start_ids)
    pairwise = masked_weights(weights, trans.trans_ids)
    return unary, start, pairwise


def viterbi_path(
    compiled: CompiledTitle, weights: np.ndarray, trans: TransitionIds
) -> tuple[list[int], float]:
    """Argmax label indices and score for a compiled title.

    The DP runs right-to-left and the path is reconstructed left-to-right,
    choosing the smallest label index at every tied choice; this yields the
    lexicographically smallest argmax sequence.
    """
    m = compiled.n_tokens
    if m == 0:
        raise ValueError("cannot decode an empty title")
    unary, start, pairwise = _chain_scores(compiled, weights, trans)
    suffix = np.empty((m, compiled.n_labels))
    suffix[m - 1] = unary[m - 1]
    for i in range(m - 2, -1, -1):
        suffix[i] = unary[i] + np.max(pairwise + suffix[i + 1][None, :], axis=1)
    first_scores = start + suffix[0]
    best = int(np.argmax(first_scores))
    total = float(first_scores[best])
    path = [best]
    for i in range(1, m):
        step = pairwise[path[-1]] + suffix[i]
        path.append(int(np.argmax(step)))
    return path, total


def viterbi_decode(
    title: TokenizedTitle, model: LinearModel
) -> tuple[tuple[str, ...], float]:
    """Exact argmax over all label sequences for the title."""
    if not title.tokens:
        raise ValueError("cannot decode an empty title")
    compiled = model.compile(title)
    path, total = viterbi_path(compiled, model.weights, model.transition_ids())
    labels = tuple(model.alphabet.labels[j] for j in path)
    return labels, total


def brute_force_decode(
    title: TokenizedTitle, model: LinearModel
) -> tuple[tuple[str, ...], float]:
    """Exhaustive argmax with the identical tie-break; test oracle for Viterbi.

    Scores every sequence as the definitional sum of its per-position
    feature-vector dots (public extraction path), sharing no code with the
    chain DP. Enumeration order makes a strict-improvement scan keep the
    lexicographically smallest maximizer.
    """
    m = len(title.tokens)
    if m == 0:
        raise ValueError("cannot decode an empty title")
    if m > BRUTE_FORCE_MAX_TOKENS:
        raise ValueError(
            f"title has {m} tokens; brute force is capped at {BRUTE_FORCE_MAX_TOKENS}"
        )
    labels = model.alphabet.labels
    position_dot: list[dict[tuple[str | None, str], float]] = []
    for i in range(m):
        table: dict[tuple[str | None, str], float] = {}
        previous_labels: tuple[str | None, ...] = (None,) if i == 0 else labels
        for prev in previous_labels:
            for curr in labels:
                vector = extract_position_features(
                    title, prev, curr, i, model.feature_set, model.index
                )
                table[(prev, curr)] = vector.dot(model.weights)
        position_dot.append(table)
    best_labels: tuple[str, ...] | None = None
    best_score = -np.inf
    for sequence in itertools.product(labels, repeat=m):
        total = position_dot[0][(None, sequence[0])]
        for i in range(1, m):
            total += position_dot[i][(sequence[i - 1], sequence[i])]
        if total > best_score:
            best_labels = sequence
            best_score = total
    assert best_labels is not None
    return best_labels, float(best_score)
