"""Second-order hidden Markov model baseline.

Transition probabilities condition on the two preceding labels (with START
padding and a terminal STOP event); emissions are per-label token
distributions. Tokens below the vocabulary count threshold are replaced by
coarse morphological classes before counting, which doubles as the
unknown-token backoff at prediction time.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import LabelAlphabet, TaggedTitle, TokenizedTitle

START = "<start>"
STOP = "<stop>"

MORPH_CLASSES = (
    "all-digits",
    "digit-and-letter",
    "all-uppercase",
    "initial-uppercase",
    "contains-hyphen",
    "all-lowercase",
    "other",
)


def morph_class(token: str) -> str:
    """First matching rule wins, in the fixed order of MORPH_CLASSES."""
    if not token:
        raise ValueError("cannot classify an empty token")
    has_digit = any(ch.isdigit() for ch in token)
    has_alpha = any(ch.isalpha() for ch in token)
    if has_digit and not has_alpha and all(ch.isdigit() for ch in token):
        return "all-digits"
    if has_digit and has_alpha:
        return "digit-and-letter"
    if token.isupper():
        return "all-uppercase"
    if token[0].isupper():
        return "initial-uppercase"
    if "-" in token:
        return "contains-hyphen"
    if token.islower():
        return "all-lowercase"
    return "other"


def class_symbol(name: str) -> str:
    return f"<class:{name}>"


_CLASS_SYMBOLS = tuple(class_symbol(name) for name in MORPH_CLASSES)


@dataclass(frozen=True)
class HmmModel:
    alphabet: LabelAlphabet
    smoothing_k: float
    min_count: int
    vocabulary: frozenset[str]
    transition: dict[tuple[str, str], dict[str, float]]
    emission: dict[str, dict[str, float]]
    _log_transition: dict[tuple[str, str], dict[str, float]] = field(repr=False, default=None)  # type: ignore[assignment]
    _log_emission: dict[str, dict[str, float]] = field(repr=False, default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        for context, row in self.transition.items():
            total = sum(row.values())
            if abs(total - 1.0) > 1e-10:
                raise ValueError(f"transition row {context} sums to {total}")
        for label, row in self.emission.items():
            total = sum(row.values())
            if abs(total - 1.0) > 1e-10:
                raise ValueError(f"emission row {label!r} sums to {total}")
        object.__setattr__(
            self,
            "_log_transition",
            {c: {y: math.log(p) for y, p in row.items() if p > 0} for c, row in self.transition.items()},
        )
        object.__setattr__(
            self,
            "_log_emission",
            {l: {s: math.log(p) for s, p in row.items() if p > 0} for l, row in self.emission.items()},
        )

    def map_token(self, token: str) -> str:
        return token if token in self.vocabulary else class_symbol(morph_class(token))

    def log_transition(self, context: tuple[str, str], label: str) -> float:
        return self._log_transition.get(context, {}).get(label, -math.inf)

    def log_emission(self, label: str, token: str) -> float:
        return self._log_emission.get(label, {}).get(self.map_token(token), -math.inf)


def _contexts(labels: Sequence[str]) -> list[tuple[str, str]]:
    states = [START] + list(labels)
    contexts = [(START, START)]
    contexts.extend(zip(states, states[1:]))
    return contexts


def train_hmm(
    corpus: Sequence[TaggedTitle],
    alphabet: LabelAlphabet,
    smoothing_k: float = 0.1,
    min_count: int = 2,
) -> HmmModel:
    """Count-based maximum likelihood estimation with additive-k smoothing.

    Tokens seen fewer than min_count times are replaced by their
    morphological class symbol before counting.
    """
    if not corpus:
        raise ValueError("training corpus is empty")
    if smoothing_k < 0:
        raise ValueError("smoothing_k must be >= 0")
    token_counts: Counter[str] = Counter()
    for tagged in corpus:
        token_counts.update(tagged.title.tokens)
    vocabulary = frozenset(t for t, c in token_counts.items() if c >= min_count)

    def mapped(token: str) -> str:
        return token if token in vocabulary else class_symbol(morph_class(token))

    transition_counts: dict[tuple[str, str], Counter[str]] = {}
    emission_counts: dict[str, Counter[str]] = {label: Counter() for label in alphabet.labels}
    for tagged in corpus:
        outcomes = list(tagged.labels) + [STOP]
        for context, outcome in zip(_contexts(tagged.labels), outcomes):
            transition_counts.setdefault(context, Counter())[outcome] += 1
        for token, label in zip(tagged.title.tokens, tagged.labels):
            emission_counts[label][mapped(token)] += 1

    transition_support = list(alphabet.labels) + [STOP]
    all_contexts = [(START, START)]
    all_contexts += [(START, label) for label in alphabet.labels]
    all_contexts += [(a, b) for a in alphabet.labels for b in alphabet.labels]

    transition: dict[tuple[str, str], dict[str, float]] = {}
    for context in all_contexts:
        counts = transition_counts.get(context, Counter())
        total = sum(counts.values())
        denom = total + smoothing_k * len(transition_support)
        if denom == 0:
            continue  # unseen context with k = 0: no row, zero probability
        row = {
            outcome: (counts[outcome] + smoothing_k) / denom
            for outcome in transition_support
        }
        transition[context] = {o: p for o, p in row.items() if p > 0}

    emission_support = sorted(vocabulary) + list(_CLASS_SYMBOLS)
    emission: dict[str, dict[str, float]] = {}
    for label in alphabet.labels:
        counts = emission_counts[label]
        total = sum(counts.values())
        denom = total + smoothing_k * len(emission_support)
        if denom == 0:
            continue
        row = {
            symbol: (counts[symbol] + smoothing_k) / denom
            for symbol in emission_support
        }
        emission[label] = {s: p for s, p in row.items() if p > 0}

    return HmmModel(alphabet, smoothing_k, min_count, vocabulary, transition, emission)


def hmm_joint_log_prob(
    title: TokenizedTitle, labels: Sequence[str], model: HmmModel
) -> float:
    """log Pr(x, y): transition terms through STOP plus per-token emissions.

    Returns -inf when any required event has zero probability (possible with
    smoothing_k = 0).
    """
    if len(labels) != len(title.tokens):
        raise ValueError(f"{len(labels)} labels for {len(title.tokens)} tokens")
    total = 0.0
    outcomes = list(labels) + [STOP]
    for context, outcome in zip(_contexts(labels), outcomes):
        total += model.log_transition(context, outcome)
    for token, label in zip(title.tokens, labels):
        total += model.log_emission(label, token)
    return total


def hmm_decode(title: TokenizedTitle, model: HmmModel) -> tuple[str, ...]:
    """Exact joint-probability argmax via second-order Viterbi.

    State pairs are (previous label, current label); ties break toward the
    lexicographically smallest label sequence under the alphabet order, like
    the linear-model decoder.
    """
    m = len(title.tokens)
    if m == 0:
        raise ValueError("cannot decode an empty title")
    labels = model.alphabet.labels
    n = len(labels)
    prev_states = list(labels) + [START]
    start_idx = n

    log_t = np.full((n + 1, n + 1, n + 1), -np.inf)
    for (a, b), row in model.transition.items():
        ai = start_idx if a == START else labels.index(a)
        bi = start_idx if b == START else labels.index(b)
        for outcome, p in row.items():
            if p <= 0:
                continue
            oi = n if outcome == STOP else labels.index(outcome)
            log_t[ai, bi, oi] = math.log(p)
    log_e = np.full((m, n), -np.inf)
    for i, token in enumerate(title.tokens):
        for j, label in enumerate(labels):
            log_e[i, j] = model.log_emission(label, token)

    # suffix[i, a, b]: best completion of positions i+1.. given y[i-1]=a, y[i]=b,
    # including the terminal STOP transition.
    suffix = np.full((m, n + 1, n), -np.inf)
    suffix[m - 1] = log_t[: n + 1, :n, n]
    for i in range(m - 2, -1, -1):
        # candidate[a, b, d] = log_t[a, b, d] + log_e[i+1, d] + suffix[i+1, b, d]
        candidate = (
            log_t[: n + 1, :n, :n]
            + log_e[i + 1][None, None, :]
            + suffix[i + 1][:n][None, :, :]
        )
        suffix[i] = np.max(candidate, axis=2)
    first = log_t[start_idx, start_idx, :n] + log_e[0] + suffix[0, start_idx]
    path = [int(np.argmax(first))]
    for i in range(1, m):
        prev2 = start_idx if i == 1 else path[i - 2]
        prev1 = path[i - 1]
        step = log_t[prev2, prev1, :n] + log_e[i] + suffix[i, prev1]
        path.append(int(np.argmax(step)))
    return tuple(labels[j] for j in path)
