"""Feature templates, sparse extraction, and the frozen feature index.

Each observation template is a deterministic function of the token sequence
and a position; at extraction time its firing is conjoined with the position
label. A dedicated transition template conjoins the previous and current
labels, which keeps everything first-order so Viterbi stays exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import json
import numpy as np

from .corpus import LabelAlphabet, TaggedTitle, TokenizedTitle

TemplateFn = Callable[[Sequence[str], int], "str | None"]

START = "<start>"

_LEMMA_SUFFIXES = ("ing", "es", "ed", "s")


def lemma(token: str) -> str:
    """Lowercase and strip one common suffix when the stem keeps >= 3 chars."""
    low = token.lower()
    for suffix in _LEMMA_SUFFIXES:
        if low.endswith(suffix) and len(low) - len(suffix) >= 3:
            return low[: -len(suffix)]
    return low


def _char_count_bucket(token: str) -> str:
    return str(len(token)) if len(token) <= 5 else "6+"


def _position_bucket(i: int) -> str:
    return str(i) if i <= 3 else "4+"


def _w0(tokens, i):
    return f"w0={tokens[i]}"


def _w_prev(tokens, i):
    return f"w-1={tokens[i - 1]}" if i > 0 else None


def _bigram_prev(tokens, i):
    return f"(w-1,w0)={tokens[i - 1]}|{tokens[i]}" if i > 0 else None


def _bigram_next(tokens, i):
    return f"(w0,w1)={tokens[i]}|{tokens[i + 1]}" if i + 1 < len(tokens) else None


def _bigram_prev2(tokens, i):
    return f"(w-2,w-1)={tokens[i - 2]}|{tokens[i - 1]}" if i > 1 else None


def _lemma_w0(tokens, i):
    return f"w0-lemma={lemma(tokens[i])}"


def _lemma_prev(tokens, i):
    return f"w-1-lemma={lemma(tokens[i - 1])}" if i > 0 else None


def _next_starts_digit(tokens, i):
    if i + 1 < len(tokens) and tokens[i + 1][0].isdigit():
        return "w1[0]-is-digit"
    return None


def _letters_only(tokens, i):
    return "w0-letters-only" if tokens[i].isalpha() else None


def _digits_only(tokens, i):
    return "w0-digits-only" if tokens[i].isdigit() else None


def _all_uppercase(tokens, i):
    return "w0-all-uppercase" if tokens[i].isupper() else None


def _first_uppercase(tokens, i):
    return "w0[0]-uppercase" if tokens[i][0].isupper() else None


def _both_first_uppercase(tokens, i):
    if i + 1 < len(tokens) and tokens[i][0].isupper() and tokens[i + 1][0].isupper():
        return "w0[0]-w1[0]-uppercase"
    return None


def _contains_hyphen(tokens, i):
    return "w0-contains-hyphen" if "-" in tokens[i] else None


def _char_count(tokens, i):
    return f"w0-char-count={_char_count_bucket(tokens[i])}"


def _position(tokens, i):
    return f"token-position={_position_bucket(i)}"


def _first_token(tokens, i):
    return "first-token" if i == 0 else None


def _prev_is_by(tokens, i):
    return "w-1-is-by" if i > 0 and tokens[i - 1].lower() == "by" else None


def _prev_is_and(tokens, i):
    return "w-1-is-and" if i > 0 and tokens[i - 1].lower() == "and" else None


def _prev_first_uppercase(tokens, i):
    return "w-1[0]-uppercase" if i > 0 and tokens[i - 1][0].isupper() else None


TEMPLATES: dict[str, TemplateFn] = {
    "w0": _w0,
    "w-1": _w_prev,
    "(w-1,w0)": _bigram_prev,
    "(w0,w1)": _bigram_next,
    "(w-2,w-1)": _bigram_prev2,
    "w0-lemma": _lemma_w0,
    "w-1-lemma": _lemma_prev,
    "w1[0]-is-digit": _next_starts_digit,
    "w0-letters-only": _letters_only,
    "w0-digits-only": _digits_only,
    "w0-all-uppercase": _all_uppercase,
    "w0[0]-uppercase": _first_uppercase,
    "w0[0]-w1[0]-uppercase": _both_first_uppercase,
    "w0-contains-hyphen": _contains_hyphen,
    "w0-char-count": _char_count,
    "token-position": _position,
    "first-token": _first_token,
    "w-1-is-by": _prev_is_by,
    "w-1-is-and": _prev_is_and,
    "w-1[0]-uppercase": _prev_first_uppercase,
}


@dataclass(frozen=True)
class FeatureSet:
    """Resolved, ordered set of active observation templates."""

    templates: tuple[tuple[str, TemplateFn], ...]

    @classmethod
    def standard(cls, names: Iterable[str] | None = None) -> "FeatureSet":
        if names is None:
            names = TEMPLATES.keys()
        resolved = []
        for name in names:
            if name not in TEMPLATES:
                raise ValueError(f"unknown feature template {name!r}")
            resolved.append((name, TEMPLATES[name]))
        return cls(tuple(resolved))

    @classmethod
    def custom(cls, templates: Mapping[str, TemplateFn]) -> "FeatureSet":
        return cls(tuple(templates.items()))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.templates)

    def without(self, name: str) -> "FeatureSet":
        if name not in self.names:
            raise ValueError(f"template {name!r} not in this feature set")
        return FeatureSet(tuple(t for t in self.templates if t[0] != name))


def load_feature_config(path) -> FeatureSet:
    """Read the feature configuration file: a JSON list of template names."""
    with open(path, encoding="utf-8") as handle:
        names = json.load(handle)
    if not isinstance(names, list):
        raise ValueError(f"{path}: feature configuration must be a JSON list of names")
    return FeatureSet.standard(names)


def save_feature_config(feature_set: FeatureSet, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(list(feature_set.names), handle, indent=0)
        handle.write("\n")


def observation_names(tokens: Sequence[str], i: int, feature_set: FeatureSet) -> list[str]:
    """Label-free observation pattern names that fire at position i."""
    if not 0 <= i < len(tokens):
        raise ValueError(f"position {i} out of range for {len(tokens)} tokens")
    names = []
    for _, fn in feature_set.templates:
        fired = fn(tokens, i)
        if fired is not None:
            names.append(fired)
    return names


def conjoin(observation: str, label: str) -> str:
    return f"{observation}|y={label}"


def transition_name(prev_label: str | None, label: str) -> str:
    return f"y-1={prev_label if prev_label is not None else START}|y={label}"


class FeatureIndex:
    """Immutable name -> id map; the id order is the construction order."""

    __slots__ = ("_names", "_ids")

    def __init__(self, names: Sequence[str]):
        self._names = tuple(names)
        self._ids = {name: i for i, name in enumerate(self._names)}
        if len(self._ids) != len(self._names):
            raise ValueError("feature names must be unique")

    @property
    def d(self) -> int:
        return len(self._names)

    @property
    def names(self) -> tuple[str, ...]:
        return self._names

    def id_of(self, name: str) -> int | None:
        return self._ids.get(name)

    def __contains__(self, name: str) -> bool:
        return name in self._ids

    def __eq__(self, other) -> bool:
        return isinstance(other, FeatureIndex) and self._names == other._names

    def __repr__(self) -> str:
        return f"FeatureIndex(d={self.d})"


def build_feature_index(
    corpus: Sequence[TaggedTitle], feature_set: FeatureSet, alphabet: LabelAlphabet
) -> FeatureIndex:
    """Register every name firing on a gold pair plus all transition names.

    Names are sorted, so identical corpora always produce identical indices.
    """
    if not corpus:
        raise ValueError("cannot build a feature index from an empty corpus")
    names: set[str] = set()
    for tagged in corpus:
        tokens = tagged.title.tokens
        for i, label in enumerate(tagged.labels):
            for obs in observation_names(tokens, i, feature_set):
                names.add(conjoin(obs, label))
    for label in alphabet.labels:
        names.add(transition_name(None, label))
        for prev in alphabet.labels:
            names.add(transition_name(prev, label))
    return FeatureIndex(sorted(names))


@dataclass(frozen=True)
class FeatureVector:
    """Sparse feature vector: strictly increasing ids, nonzero values."""

    ids: tuple[int, ...]
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.ids) != len(self.values):
            raise ValueError("ids and values must have equal length")
        if any(b <= a for a, b in zip(self.ids, self.ids[1:])):
            raise ValueError("ids must be strictly increasing")
        if any(v == 0 for v in self.values):
            raise ValueError("values must be nonzero")

    @classmethod
    def from_counts(cls, counts: Mapping[int, float]) -> "FeatureVector":
        items = sorted((i, v) for i, v in counts.items() if v != 0)
        return cls(tuple(i for i, _ in items), tuple(v for _, v in items))

    def to_dict(self) -> dict[int, float]:
        return dict(zip(self.ids, self.values))

    def dot(self, weights: np.ndarray) -> float:
        total = 0.0
        for i, v in zip(self.ids, self.values):
            total += weights[i] * v
        return total


def _accumulate_position(
    counts: dict[int, float],
    tokens: Sequence[str],
    prev_label: str | None,
    label: str,
    i: int,
    feature_set: FeatureSet,
    index: FeatureIndex,
) -> None:
    for obs in observation_names(tokens, i, feature_set):
        fid = index.id_of(conjoin(obs, label))
        if fid is not None:
            counts[fid] = counts.get(fid, 0.0) + 1.0
    tid = index.id_of(transition_name(prev_label, label))
    if tid is not None:
        counts[tid] = counts.get(tid, 0.0) + 1.0


def extract_position_features(
    title: TokenizedTitle,
    prev_label: str | None,
    label: str,
    i: int,
    feature_set: FeatureSet,
    index: FeatureIndex,
) -> FeatureVector:
    """Features firing at one position for (prev_label, label).

    prev_label of None marks the sequence start. Names absent from the
    frozen index are dropped.
    """
    counts: dict[int, float] = {}
    _accumulate_position(counts, title.tokens, prev_label, label, i, feature_set, index)
    return FeatureVector.from_counts(counts)


def global_feature_vector(
    title: TokenizedTitle,
    labels: Sequence[str],
    feature_set: FeatureSet,
    index: FeatureIndex,
) -> FeatureVector:
    """Sum of the per-position feature vectors; values are firing counts."""
    if len(labels) != len(title.tokens):
        raise ValueError(f"{len(labels)} labels for {len(title.tokens)} tokens")
    counts: dict[int, float] = {}
    prev: str | None = None
    for i, label in enumerate(labels):
        _accumulate_position(counts, title.tokens, prev, label, i, feature_set, index)
        prev = label
    return FeatureVector.from_counts(counts)


@dataclass(frozen=True)
class TransitionIds:
    """Feature ids of the start and transition templates; -1 where unindexed."""

    start_ids: np.ndarray  # (L,)
    trans_ids: np.ndarray  # (L, L) indexed [prev, curr]

    @classmethod
    def build(cls, index: FeatureIndex, alphabet: LabelAlphabet) -> "TransitionIds":
        n = len(alphabet.labels)
        start = np.full(n, -1, dtype=np.int64)
        trans = np.full((n, n), -1, dtype=np.int64)
        for j, label in enumerate(alphabet.labels):
            fid = index.id_of(transition_name(None, label))
            if fid is not None:
                start[j] = fid
            for p, prev in enumerate(alphabet.labels):
                fid = index.id_of(transition_name(prev, label))
                if fid is not None:
                    trans[p, j] = fid
        return cls(start, trans)


def masked_weights(weights: np.ndarray, ids: np.ndarray) -> np.ndarray:
    """Look up weights for ids, treating -1 (unindexed) as weight 0."""
    values = weights[np.maximum(ids, 0)]
    return np.where(ids >= 0, values, 0.0)


@dataclass(frozen=True)
class CompiledTitle:
    """Per-(position, label) observation feature ids in CSR-like layout."""

    n_tokens: int
    n_labels: int
    ids: np.ndarray  # (K,) observation feature ids grouped by slot
    slots: np.ndarray  # (K,) slot = position * n_labels + label, nondecreasing
    indptr: np.ndarray  # (n_tokens * n_labels + 1,)

    def ids_for(self, position: int, label_idx: int) -> np.ndarray:
        s = position * self.n_labels + label_idx
        return self.ids[self.indptr[s] : self.indptr[s + 1]]

    def unary_scores(self, weights: np.ndarray) -> np.ndarray:
        """(n_tokens, n_labels) observation score matrix under weights."""
        flat = np.bincount(
            self.slots,
            weights=weights[self.ids],
            minlength=self.n_tokens * self.n_labels,
        )
        return flat.reshape(self.n_tokens, self.n_labels)


def compile_title(
    title: TokenizedTitle | Sequence[str],
    feature_set: FeatureSet,
    index: FeatureIndex,
    alphabet: LabelAlphabet,
) -> CompiledTitle:
    tokens = title.tokens if isinstance(title, TokenizedTitle) else tuple(title)
    n_labels = len(alphabet.labels)
    ids: list[int] = []
    counts = [0] * (len(tokens) * n_labels)
    for i in range(len(tokens)):
        obs = observation_names(tokens, i, feature_set)
        for j, label in enumerate(alphabet.labels):
            slot_ids = []
            for name in obs:
                fid = index.id_of(conjoin(name, label))
                if fid is not None:
                    slot_ids.append(fid)
            ids.extend(slot_ids)
            counts[i * n_labels + j] = len(slot_ids)
    indptr = np.zeros(len(counts) + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    id_array = np.asarray(ids, dtype=np.int64)
    slots = np.repeat(np.arange(len(counts), dtype=np.int64), counts)
    return CompiledTitle(len(tokens), n_labels, id_array, slots, indptr)


def sequence_feature_ids(
    compiled: CompiledTitle, label_indices: Sequence[int], trans: TransitionIds
) -> np.ndarray:
    """All indexed feature ids (with multiplicity) firing for a label sequence."""
    parts = [compiled.ids_for(i, l) for i, l in enumerate(label_indices)]
    extra = []
    if label_indices:
        fid = trans.start_ids[label_indices[0]]
        if fid >= 0:
            extra.append(fid)
        for prev, curr in zip(label_indices, label_indices[1:]):
            fid = trans.trans_ids[prev, curr]
            if fid >= 0:
                extra.append(fid)
    if extra:
        parts.append(np.asarray(extra, dtype=np.int64))
    if not parts:
        return np.empty(0, dtype=np.int64)
    return np.concatenate(parts)
