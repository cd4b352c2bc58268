"""Shared builders: the toy linear model, random instances, separable corpora."""

from __future__ import annotations

import itertools
import random

import numpy as np

from attrex.corpus import (
    CorpusEntry,
    LabelAlphabet,
    Provenance,
    TaggedTitle,
    TokenizedTitle,
    encode_bio,
    tokenize,
)
from attrex.decode import LinearModel
from attrex.features import (
    FeatureIndex,
    FeatureSet,
    build_feature_index,
    conjoin,
    transition_name,
)


def toy_feature_set() -> FeatureSet:
    """Two observation templates: token identity for "acme", and a bias."""

    def tok_acme(tokens, i):
        return "tok=acme" if tokens[i] == "acme" else None

    def bias(tokens, i):
        return "bias"

    return FeatureSet.custom({"tok-acme": tok_acme, "bias": bias})


def toy_model(weights=(2.0, 1.0, 0.5)) -> tuple[LinearModel, TokenizedTitle]:
    """The worked toy: three features on the title "acme widget".

    f1 = [token == acme and y = B] (weight 2.0)
    f2 = [y = O]                    (weight 1.0)
    f3 = [y_prev = B and y = O]     (weight 0.5)
    Gold sequence (B, O) scores 3.5; (O, O) and (B, B) and (B, I) score 2.0.
    """
    alphabet = LabelAlphabet.bio("brand")
    names = [
        conjoin("tok=acme", alphabet.begin),
        conjoin("bias", alphabet.outside),
        transition_name(alphabet.begin, alphabet.outside),
    ]
    index = FeatureIndex(names)
    model = LinearModel(
        np.asarray(weights, dtype=float), index, alphabet, toy_feature_set(), "crf"
    )
    return model, tokenize("acme widget")


def enumerate_sequences(alphabet: LabelAlphabet, length: int):
    return itertools.product(alphabet.labels, repeat=length)


def random_linear_instance(
    rng: np.random.Generator,
    max_tokens: int = 6,
    vocab_size: int = 8,
    template_names: tuple[str, ...] = ("w0",),
    kind: str = "crf",
) -> tuple[LinearModel, TokenizedTitle]:
    """Random small model and title for decoder/inference oracle checks."""
    alphabet = LabelAlphabet.bio("brand")
    feature_set = FeatureSet.standard(template_names)
    vocab = [f"t{i}" for i in range(vocab_size)]
    seed_titles = []
    for _ in range(6):
        tokens = [vocab[rng.integers(len(vocab))] for _ in range(max_tokens)]
        labels = _random_valid_labels(rng, alphabet, max_tokens)
        title = tokenize(" ".join(tokens))
        seed_titles.append(TaggedTitle(title, labels))
    index = build_feature_index(seed_titles, feature_set, alphabet)
    # uniform in [-1, 1], quantized to multiples of 2^-20: sums of dyadic
    # weights are exact in float64 in any order, so exact score ties compare
    # equal in both decoders and the lexicographic tie-break is well defined
    weights = np.round(rng.uniform(-1.0, 1.0, size=index.d) * 2**20) / 2**20
    model = LinearModel(weights, index, alphabet, feature_set, kind)
    m = int(rng.integers(1, max_tokens + 1))
    tokens = [vocab[rng.integers(len(vocab))] for _ in range(m)]
    return model, tokenize(" ".join(tokens))


def _random_valid_labels(
    rng: np.random.Generator, alphabet: LabelAlphabet, m: int
) -> tuple[str, ...]:
    """A gold-shaped labeling: optional single B-run, everything else O."""
    if rng.random() < 0.2:
        return (alphabet.outside,) * m
    start = int(rng.integers(m))
    end = int(rng.integers(start, m))
    labels = [alphabet.outside] * m
    labels[start] = alphabet.begin
    for i in range(start + 1, end + 1):
        labels[i] = alphabet.inside
    return tuple(labels)


_FILLERS = (
    "replacement", "cordless", "portable", "steel", "kit", "pack", "cover",
    "light", "deluxe", "compact", "folding", "classic", "outdoor", "spare",
)

_VALUE_TOKENS = (
    "Acmeor", "Bentrix", "Corvale", "Dantor", "Elvena", "Fandor", "Gorvic",
    "Haldane", "Imbrel", "Jorvik", "Kelsor", "Lomira", "Mondor", "Nerova",
    "Opaline", "Prandel", "Quorra", "Rastel", "Sovena", "Tandor",
)


def separable_corpus(n: int = 30, seed: int = 0) -> tuple[list[TaggedTitle], LabelAlphabet]:
    """Titles where the (single-token) value is always prefixed by "by".

    The active-feature rule "previous token is by" makes the labeling
    linearly separable under the standard template set.
    """
    rng = random.Random(seed)
    alphabet = LabelAlphabet.bio("brand")
    corpus = []
    for i in range(n):
        value = _VALUE_TOKENS[i % len(_VALUE_TOKENS)]
        lead = [rng.choice(_FILLERS) for _ in range(rng.randint(1, 3))]
        tail = [rng.choice(_FILLERS) for _ in range(rng.randint(0, 3))]
        tokens = lead + ["by", value] + tail
        title = tokenize(" ".join(tokens))
        span_start = len(lead) + 1
        labels = [alphabet.outside] * len(tokens)
        labels[span_start] = alphabet.begin
        corpus.append(TaggedTitle(title, tuple(labels)))
    return corpus, alphabet


def entries_from_tagged(tagged_titles, attribute="brand") -> list[CorpusEntry]:
    entries = []
    for tagged in tagged_titles:
        span = tagged.gold_span
        entries.append(
            CorpusEntry(tagged, attribute, span.surface_text if span else None)
        )
    return entries
