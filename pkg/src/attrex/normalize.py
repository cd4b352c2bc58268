"""Normalization dictionary, blacklist, and the batch feedback procedure.

Raw extractions are resolved against a curated variation-to-canonical table
keyed by key form. Unknown values are frequency-tracked per batch; values
crossing the threshold are sampled into a review queue, and analyst
decisions feed back into the table, the blacklist, or the training set.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import (
    Provenance,
    TaggedTitle,
    TokenizerConfig,
    encode_bio,
    LabelAlphabet,
    tokenize,
)
from .text import key_form

UNBRANDED = "unbranded"


class NormalizationTable:
    """Immutable variation -> canonical mapping, keyed by key form."""

    __slots__ = ("_entries", "version")

    def __init__(self, entries: Mapping[str, str] | None = None, version: int = 0):
        table: dict[str, str] = {}
        for variation, canonical in (entries or {}).items():
            if not canonical:
                raise ValueError(f"empty canonical value for variation {variation!r}")
            key = key_form(variation)
            if not key:
                raise ValueError(f"variation {variation!r} has an empty key form")
            if key in table and table[key] != canonical:
                raise ValueError(
                    f"conflicting canonical values for key {key!r}: "
                    f"{table[key]!r} vs {canonical!r}"
                )
            table[key] = canonical
        self._entries = table
        self.version = version

    def lookup(self, raw: str) -> str | None:
        return self._entries.get(key_form(raw))

    def __contains__(self, raw: str) -> bool:
        return key_form(raw) in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def items(self) -> list[tuple[str, str]]:
        return sorted(self._entries.items())

    def with_entry(self, variation: str, canonical: str) -> "NormalizationTable":
        merged = dict(self._entries)
        merged[key_form(variation)] = canonical
        table = NormalizationTable.__new__(NormalizationTable)
        table._entries = NormalizationTable(merged)._entries
        table.version = self.version + 1
        return table


class Blacklist:
    """Immutable set of key-form terms known not to be attribute values."""

    __slots__ = ("_terms", "version")

    def __init__(self, terms: Iterable[str] = (), version: int = 0):
        keys = set()
        for term in terms:
            key = key_form(term)
            if not key:
                raise ValueError(f"blacklist term {term!r} has an empty key form")
            keys.add(key)
        self._terms = frozenset(keys)
        self.version = version

    def __contains__(self, raw: str) -> bool:
        return key_form(raw) in self._terms

    def __len__(self) -> int:
        return len(self._terms)

    def terms(self) -> list[str]:
        return sorted(self._terms)

    def with_term(self, term: str) -> "Blacklist":
        return Blacklist(list(self._terms) + [term], version=self.version + 1)


def check_disjoint(table: NormalizationTable, blacklist: Blacklist) -> None:
    """Hard error when a term is both normalizable and blacklisted."""
    overlap = sorted(key for key, _ in table.items() if key in blacklist._terms)
    if overlap:
        raise ValueError(
            f"terms present in both normalization table and blacklist: {overlap}"
        )


class Resolution(str, Enum):
    CANONICAL = "canonical"
    UNBRANDED = "unbranded"
    BLACKLISTED = "blacklisted"
    UNRESOLVED = "unresolved"


@dataclass(frozen=True)
class NormalizationOutcome:
    status: Resolution
    canonical: str | None = None


def normalize_value(
    raw: str | None, table: NormalizationTable, blacklist: Blacklist
) -> NormalizationOutcome:
    """Resolve one raw extraction: no value, blacklisted, known, or unknown."""
    if raw is None:
        return NormalizationOutcome(Resolution.UNBRANDED, UNBRANDED)
    if raw in blacklist:
        return NormalizationOutcome(Resolution.BLACKLISTED)
    canonical = table.lookup(raw)
    if canonical is not None:
        return NormalizationOutcome(Resolution.CANONICAL, canonical)
    return NormalizationOutcome(Resolution.UNRESOLVED)


@dataclass(frozen=True)
class FeedbackConfig:
    frequency_threshold: int = 30
    sample_size: int = 5
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.frequency_threshold < 1:
            raise ValueError("frequency_threshold must be >= 1")
        if self.sample_size < 1:
            raise ValueError("sample_size must be >= 1")


@dataclass(frozen=True)
class Prediction:
    """One batch prediction: item id, its title, and the raw extraction."""

    item_id: str
    title: str
    value: str | None


@dataclass(frozen=True)
class ReviewEntry:
    value: str
    samples: tuple[Prediction, ...]


@dataclass(frozen=True)
class BatchResult:
    accepted: tuple[tuple[str, str], ...]  # (item_id, canonical)
    unbranded: tuple[str, ...]  # item ids
    blacklisted: tuple[tuple[str, str], ...]  # (item_id, raw value)
    review_queue: tuple[ReviewEntry, ...]
    frequency_map: dict[str, int]  # raw value -> occurrences this batch
    pending: tuple[Prediction, ...]  # unresolved predictions


def batch_postprocess(
    predictions: Sequence[Prediction],
    table: NormalizationTable,
    blacklist: Blacklist,
    config: FeedbackConfig,
) -> BatchResult:
    """Resolve a prediction batch and queue frequent unknown values.

    Table hits are accepted immediately. Unknown values are counted in a
    per-batch frequency map; each value strictly above the threshold yields
    one review entry with a seeded random sample of its predictions. Values
    at or below the threshold are dropped for this batch.
    """
    accepted: list[tuple[str, str]] = []
    unbranded: list[str] = []
    blacklisted: list[tuple[str, str]] = []
    frequency: dict[str, int] = {}
    pending: list[Prediction] = []
    by_value: dict[str, list[Prediction]] = {}
    for prediction in predictions:
        outcome = normalize_value(prediction.value, table, blacklist)
        if outcome.status is Resolution.UNBRANDED:
            unbranded.append(prediction.item_id)
        elif outcome.status is Resolution.BLACKLISTED:
            blacklisted.append((prediction.item_id, prediction.value))  # type: ignore[arg-type]
        elif outcome.status is Resolution.CANONICAL:
            accepted.append((prediction.item_id, outcome.canonical))  # type: ignore[arg-type]
        else:
            value = prediction.value
            assert value is not None
            frequency[value] = frequency.get(value, 0) + 1
            by_value.setdefault(value, []).append(prediction)
            pending.append(prediction)

    rng = random.Random(config.rng_seed)
    review: list[ReviewEntry] = []
    for value, count in frequency.items():
        if count > config.frequency_threshold:
            items = by_value[value]
            sampled = rng.sample(items, min(config.sample_size, len(items)))
            review.append(ReviewEntry(value, tuple(sampled)))
    return BatchResult(
        tuple(accepted),
        tuple(unbranded),
        tuple(blacklisted),
        tuple(review),
        frequency,
        tuple(pending),
    )


class Verdict(str, Enum):
    ACCEPT = "accept"
    BLACKLIST = "blacklist"
    RELABEL = "relabel"


@dataclass(frozen=True)
class ReviewDecision:
    value: str
    verdict: Verdict
    canonical: str | None = None  # accept: the normalized form
    title: str | None = None  # relabel: the title to annotate
    correct_value: str | None = None  # relabel: the value it contains

    def __post_init__(self) -> None:
        if self.verdict is Verdict.ACCEPT and not self.canonical:
            raise ValueError("accept decision requires a non-empty canonical form")
        if self.verdict is Verdict.RELABEL and not (self.title and self.correct_value):
            raise ValueError("relabel decision requires a title and its correct value")


@dataclass(frozen=True)
class ReviewState:
    """Everything a round of analyst decisions can touch."""

    table: NormalizationTable
    blacklist: Blacklist
    pending: tuple[Prediction, ...] = ()
    accepted: tuple[tuple[str, str], ...] = ()
    blacklisted: tuple[tuple[str, str], ...] = ()
    training_additions: tuple[TaggedTitle, ...] = ()


def apply_review_decision(
    state: ReviewState,
    decision: ReviewDecision,
    attribute_name: str,
    tokenizer_config: TokenizerConfig = TokenizerConfig(),
) -> ReviewState:
    """Apply one analyst decision, returning the updated state.

    Accepting adds the (variation, canonical) pair and resolves every pending
    prediction it now covers; blacklisting records the term and drops its
    pending predictions; relabeling appends a correctly tagged title to the
    training additions.
    """
    if decision.verdict is Verdict.ACCEPT:
        if decision.value in state.blacklist:
            raise ValueError(
                f"cannot accept {decision.value!r}: it is already blacklisted"
            )
        table = state.table.with_entry(decision.value, decision.canonical)  # type: ignore[arg-type]
        still_pending = []
        accepted = list(state.accepted)
        for prediction in state.pending:
            outcome = normalize_value(prediction.value, table, state.blacklist)
            if outcome.status is Resolution.CANONICAL:
                accepted.append((prediction.item_id, outcome.canonical))  # type: ignore[arg-type]
            else:
                still_pending.append(prediction)
        return ReviewState(
            table,
            state.blacklist,
            tuple(still_pending),
            tuple(accepted),
            state.blacklisted,
            state.training_additions,
        )
    if decision.verdict is Verdict.BLACKLIST:
        if decision.value in state.table:
            raise ValueError(
                f"cannot blacklist {decision.value!r}: the normalization table maps it"
            )
        blacklist = state.blacklist.with_term(decision.value)
        still_pending = []
        blacklisted = list(state.blacklisted)
        for prediction in state.pending:
            if prediction.value is not None and prediction.value in blacklist:
                blacklisted.append((prediction.item_id, prediction.value))
            else:
                still_pending.append(prediction)
        return ReviewState(
            state.table,
            blacklist,
            tuple(still_pending),
            state.accepted,
            tuple(blacklisted),
            state.training_additions,
        )
    # relabel
    from .weak_supervision import match_value_in_title

    title = tokenize(decision.title, tokenizer_config)  # type: ignore[arg-type]
    span = match_value_in_title(title, decision.correct_value)  # type: ignore[arg-type]
    if span is None:
        raise ValueError(
            f"correct value {decision.correct_value!r} does not appear in "
            f"title {decision.title!r}"
        )
    alphabet = LabelAlphabet.bio(attribute_name)
    tagged = TaggedTitle(
        title, encode_bio(title, span, alphabet), Provenance.ANALYST_FEEDBACK
    )
    return ReviewState(
        state.table,
        state.blacklist,
        state.pending,
        state.accepted,
        state.blacklisted,
        state.training_additions + (tagged,),
    )


def read_normalization_table(path: str | Path) -> NormalizationTable:
    """Load the two-column tab-separated variation/canonical file."""
    entries: dict[str, str] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(
                    f"{path}:{lineno}: expected 'variation<TAB>canonical', got {line!r}"
                )
            variation, canonical = parts
            key = key_form(variation)
            if key in entries and entries[key] != canonical:
                raise ValueError(
                    f"{path}:{lineno}: variation {variation!r} conflicts with an "
                    f"earlier entry mapping to {entries[key]!r}"
                )
            entries[variation] = canonical
    return NormalizationTable(entries)


def write_normalization_table(table: NormalizationTable, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for key, canonical in table.items():
            handle.write(f"{key}\t{canonical}\n")


def read_blacklist(path: str | Path) -> Blacklist:
    with open(path, encoding="utf-8") as handle:
        terms = [line.strip() for line in handle if line.strip()]
    return Blacklist(terms)


def write_blacklist(blacklist: Blacklist, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for term in blacklist.terms():
            handle.write(term + "\n")


def write_review_queue(queue: Iterable[ReviewEntry], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for entry in queue:
            handle.write(
                json.dumps(
                    {
                        "value": entry.value,
                        "samples": [
                            {"item_id": p.item_id, "title": p.title}
                            for p in entry.samples
                        ],
                    },
                    sort_keys=True,
                    ensure_ascii=False,
                )
            )
            handle.write("\n")


def read_review_decisions(path: str | Path) -> list[ReviewDecision]:
    decisions = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
                decisions.append(
                    ReviewDecision(
                        value=data["value"],
                        verdict=Verdict(data["verdict"]),
                        canonical=data.get("canonical"),
                        title=data.get("title"),
                        correct_value=data.get("correct_value"),
                    )
                )
            except (ValueError, KeyError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return decisions
