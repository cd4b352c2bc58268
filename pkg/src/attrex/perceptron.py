"""Averaged structured perceptron training.

The trainer follows the classic algorithm literally: decode with the current
weights, update on mismatch, and accumulate the averaging sum after every
example regardless of whether an update happened. The returned weights are
the accumulated sum divided by (corpus size x epochs).
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import LabelAlphabet, TaggedTitle
from .decode import LinearModel, viterbi_path
from .features import (
    CompiledTitle,
    FeatureIndex,
    FeatureSet,
    TransitionIds,
    compile_title,
    sequence_feature_ids,
)


@dataclass(frozen=True)
class PerceptronConfig:
    epochs: int = 10
    shuffle: bool = True
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass
class SpState:
    """Mutable training state: current weights and the averaging sum."""

    weights: np.ndarray
    averaged_sum: np.ndarray
    examples_seen: int = 0


@dataclass(frozen=True)
class _CompiledExample:
    compiled: CompiledTitle
    gold_path: tuple[int, ...]
    gold_ids: np.ndarray


def _compile_example(
    tagged: TaggedTitle,
    feature_set: FeatureSet,
    index: FeatureIndex,
    alphabet: LabelAlphabet,
    trans: TransitionIds,
) -> _CompiledExample:
    if not tagged.title.tokens:
        raise ValueError(f"empty title in training corpus: {tagged.title.raw_text!r}")
    compiled = compile_title(tagged.title, feature_set, index, alphabet)
    gold_path = tuple(alphabet.index(label) for label in tagged.labels)
    gold_ids = sequence_feature_ids(compiled, gold_path, trans)
    return _CompiledExample(compiled, gold_path, gold_ids)


def _step(state: SpState, example: _CompiledExample, trans: TransitionIds) -> bool:
    predicted, _ = viterbi_path(example.compiled, state.weights, trans)
    mismatch = tuple(predicted) != example.gold_path
    if mismatch:
        predicted_ids = sequence_feature_ids(example.compiled, predicted, trans)
        np.add.at(state.weights, example.gold_ids, 1.0)
        np.add.at(state.weights, predicted_ids, -1.0)
    state.averaged_sum += state.weights
    state.examples_seen += 1
    return mismatch


def sp_update_step(
    state: SpState,
    example: TaggedTitle,
    feature_set: FeatureSet,
    index: FeatureIndex,
    alphabet: LabelAlphabet,
) -> bool:
    """Run one inner-loop body on the state; returns the mismatch flag.

    Decodes with the current weights, applies the additive update when the
    decode disagrees with the gold labels, and always accumulates the
    averaging sum.
    """
    trans = TransitionIds.build(index, alphabet)
    return _step(state, _compile_example(example, feature_set, index, alphabet, trans), trans)


def train_sp(
    corpus: Sequence[TaggedTitle],
    config: PerceptronConfig,
    feature_set: FeatureSet,
    index: FeatureIndex,
    alphabet: LabelAlphabet,
) -> LinearModel:
    """Train averaged weights over the corpus for the configured epoch count."""
    if not corpus:
        raise ValueError("training corpus is empty")
    trans = TransitionIds.build(index, alphabet)
    examples = [
        _compile_example(tagged, feature_set, index, alphabet, trans) for tagged in corpus
    ]
    state = SpState(
        weights=np.zeros(index.d, dtype=np.float64),
        averaged_sum=np.zeros(index.d, dtype=np.float64),
    )
    order = list(range(len(examples)))
    rng = random.Random(config.rng_seed)
    for _ in range(config.epochs):
        if config.shuffle:
            rng.shuffle(order)
        for i in order:
            _step(state, examples[i], trans)
    averaged = state.averaged_sum / (len(examples) * config.epochs)
    return LinearModel(averaged, index, alphabet, feature_set, kind="perceptron")


def training_sequence_errors(
    corpus: Sequence[TaggedTitle], model: LinearModel
) -> int:
    """Number of training sequences the model decodes incorrectly."""
    trans = model.transition_ids()
    errors = 0
    for tagged in corpus:
        compiled = model.compile(tagged.title)
        predicted, _ = viterbi_path(compiled, model.weights, trans)
        gold = tuple(model.alphabet.index(label) for label in tagged.labels)
        if tuple(predicted) != gold:
            errors += 1
    return errors
