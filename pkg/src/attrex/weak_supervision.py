"""Distant-supervision training set construction from a tagged catalog.

A catalog record contributes a training example only when its attribute
value literally appears in the title, up to case, a small set of special
characters, and spacing. Per-value caps keep the heavy-tailed value
distribution from flooding the training set, and valueless records seed
all-O examples.
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import (
    AttributeSpan,
    CorpusEntry,
    LabelAlphabet,
    Provenance,
    TaggedTitle,
    TokenizedTitle,
    TokenizerConfig,
    encode_bio,
    tokenize,
)
from .text import key_form


@dataclass(frozen=True)
class CatalogRecord:
    title: str
    attribute_name: str
    value: str | None = None

    def __post_init__(self) -> None:
        if not self.title:
            raise ValueError("catalog record title must be non-empty")


@dataclass(frozen=True)
class SupervisionConfig:
    per_value_cap: int = 3
    unbranded_sample_size: int = 0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.per_value_cap < 1:
            raise ValueError("per_value_cap must be >= 1")
        if self.unbranded_sample_size < 0:
            raise ValueError("unbranded_sample_size must be >= 0")


def match_value_in_title(title: TokenizedTitle, value: str) -> AttributeSpan | None:
    """Leftmost token span whose key form equals the value's key form.

    Matching tolerates case, the characters - ' & . , and spacing
    differences. Spans may not start or end on a token whose key form is
    empty, so boundaries stay on real value tokens.
    """
    target = key_form(value)
    if not target:
        return None
    token_keys = [key_form(t) for t in title.tokens]
    for start in range(len(token_keys)):
        if not token_keys[start]:
            continue
        acc = ""
        for end in range(start, len(token_keys)):
            acc += token_keys[end]
            if len(acc) > len(target):
                break
            if acc == target and token_keys[end]:
                return AttributeSpan.of(title, start, end)
    return None


def build_training_set(
    catalog: Sequence[CatalogRecord],
    config: SupervisionConfig,
    tokenizer_config: TokenizerConfig = TokenizerConfig(),
) -> list[CorpusEntry]:
    """Annotate matching records with BIO labels, capped per distinct value.

    Records whose value does not appear in the title are excluded entirely.
    Valueless records become all-O examples, up to the configured sample
    size. Sampling is seeded and the output order follows the catalog.
    """
    if not catalog:
        raise ValueError("catalog is empty")
    attributes = {record.attribute_name for record in catalog}
    if len(attributes) > 1:
        raise ValueError(f"catalog mixes attributes: {sorted(attributes)}")
    alphabet = LabelAlphabet.bio(catalog[0].attribute_name)
    rng = random.Random(config.rng_seed)

    by_value: dict[str, list[tuple[int, CorpusEntry]]] = {}
    unbranded: list[tuple[int, CorpusEntry]] = []
    for position, record in enumerate(catalog):
        title = tokenize(record.title, tokenizer_config)
        if record.value is None:
            labels = encode_bio(title, None, alphabet)
            tagged = TaggedTitle(title, labels, Provenance.DISTANT_SUPERVISION)
            unbranded.append(
                (position, CorpusEntry(tagged, record.attribute_name, None))
            )
            continue
        span = match_value_in_title(title, record.value)
        if span is None:
            continue
        labels = encode_bio(title, span, alphabet)
        tagged = TaggedTitle(title, labels, Provenance.DISTANT_SUPERVISION)
        entry = CorpusEntry(tagged, record.attribute_name, record.value)
        by_value.setdefault(key_form(record.value), []).append((position, entry))

    selected: list[tuple[int, CorpusEntry]] = []
    for value_key in sorted(by_value):
        candidates = by_value[value_key]
        if len(candidates) > config.per_value_cap:
            candidates = rng.sample(candidates, config.per_value_cap)
        selected.extend(candidates)
    if len(unbranded) > config.unbranded_sample_size:
        unbranded = rng.sample(unbranded, config.unbranded_sample_size)
    selected.extend(unbranded)
    selected.sort(key=lambda item: item[0])
    return [entry for _, entry in selected]


def label_frequency_histogram(
    corpus: Iterable[TaggedTitle | CorpusEntry],
) -> dict[int, int]:
    """Bucket distinct gold values by how often each occurs in the corpus.

    Values are compared by key form; the catalog value is used when present,
    otherwise the decoded gold surface. All-O items carry no value and are
    not counted.
    """
    value_counts: Counter[str] = Counter()
    for item in corpus:
        if isinstance(item, CorpusEntry):
            value = item.value
            if value is None:
                span = item.tagged.gold_span
                value = span.surface_text if span else None
        else:
            span = item.gold_span
            value = span.surface_text if span else None
        if value is not None:
            value_counts[key_form(value)] += 1
    histogram: dict[int, int] = {}
    for count in value_counts.values():
        histogram[count] = histogram.get(count, 0) + 1
    return dict(sorted(histogram.items()))


def fraction_with_frequency_at_most(histogram: dict[int, int], limit: int) -> float:
    """Share of distinct values occurring at most `limit` times."""
    total = sum(histogram.values())
    if total == 0:
        return 0.0
    return sum(n for freq, n in histogram.items() if freq <= limit) / total


def read_catalog(path: str | Path) -> list[CatalogRecord]:
    """Read catalog line records: the corpus format with labels absent."""
    records = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
                records.append(
                    CatalogRecord(data["title"], data["attribute"], data.get("value"))
                )
            except (ValueError, KeyError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return records


def write_catalog(records: Iterable[CatalogRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(
                json.dumps(
                    {
                        "title": record.title,
                        "attribute": record.attribute_name,
                        "value": record.value,
                    },
                    sort_keys=True,
                    ensure_ascii=False,
                )
            )
            handle.write("\n")
