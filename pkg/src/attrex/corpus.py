"""Tokenization, the BIO label alphabet, and span encoding/decoding.

A product title is split into tokens; a gold attribute value occupies a
contiguous token span which is encoded as a B/I/O label sequence. Decoding
reverses the encoding and repairs malformed model output conservatively.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

DEFAULT_SEPARATORS = ',/()"'
OUTSIDE = "O"


@dataclass(frozen=True)
class TokenizerConfig:
    """Characters beyond whitespace that split tokens and are dropped.

    Hyphen, apostrophe, ampersand, '#' and '.' are deliberately not in the
    default set so part-number-like tokens (B4L03A#B1H, Wi-Fi) survive.
    """

    separators: str = DEFAULT_SEPARATORS


@dataclass(frozen=True)
class TokenizedTitle:
    raw_text: str
    tokens: tuple[str, ...]
    token_offsets: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        if len(self.tokens) != len(self.token_offsets):
            raise ValueError("tokens and token_offsets must have equal length")

    def __len__(self) -> int:
        return len(self.tokens)


def tokenize(raw_text: str, config: TokenizerConfig = TokenizerConfig()) -> TokenizedTitle:
    """Split a title on whitespace and the configured separator characters.

    Separator characters are dropped; empty input yields an empty token list.
    """
    separators = set(config.separators)
    tokens: list[str] = []
    offsets: list[tuple[int, int]] = []
    start: int | None = None
    for i, ch in enumerate(raw_text):
        if ch.isspace() or ch in separators:
            if start is not None:
                tokens.append(raw_text[start:i])
                offsets.append((start, i))
                start = None
        elif start is None:
            start = i
    if start is not None:
        tokens.append(raw_text[start:])
        offsets.append((start, len(raw_text)))
    return TokenizedTitle(raw_text, tuple(tokens), tuple(offsets))


@dataclass(frozen=True)
class LabelAlphabet:
    """Ordered label set for one attribute.

    The pipeline always uses the three-label BIO form built by ``bio()``;
    the label order (B < I < O) is the tie-break order used by decoders.
    """

    attribute_name: str
    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.labels:
            raise ValueError("alphabet needs at least one label")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("labels must be distinct")

    @classmethod
    def bio(cls, attribute_name: str) -> "LabelAlphabet":
        if not attribute_name:
            raise ValueError("attribute name must be non-empty")
        return cls(
            attribute_name,
            (f"B-{attribute_name}", f"I-{attribute_name}", OUTSIDE),
        )

    @property
    def is_bio(self) -> bool:
        return self.labels == (
            f"B-{self.attribute_name}",
            f"I-{self.attribute_name}",
            OUTSIDE,
        )

    @property
    def begin(self) -> str:
        self._require_bio()
        return self.labels[0]

    @property
    def inside(self) -> str:
        self._require_bio()
        return self.labels[1]

    @property
    def outside(self) -> str:
        self._require_bio()
        return self.labels[2]

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ValueError(f"unknown label {label!r} for attribute {self.attribute_name!r}")

    def _require_bio(self) -> None:
        if not self.is_bio:
            raise ValueError(f"alphabet for {self.attribute_name!r} is not BIO-shaped")


@dataclass(frozen=True)
class AttributeSpan:
    """Inclusive token span holding one attribute value."""

    start_token: int
    end_token: int
    surface: tuple[str, ...]

    def __post_init__(self) -> None:
        if not 0 <= self.start_token <= self.end_token:
            raise ValueError(f"invalid span [{self.start_token}, {self.end_token}]")
        if len(self.surface) != self.end_token - self.start_token + 1:
            raise ValueError("surface length does not match span bounds")

    @classmethod
    def of(cls, title: TokenizedTitle, start_token: int, end_token: int) -> "AttributeSpan":
        if end_token >= len(title.tokens):
            raise ValueError(
                f"span end {end_token} past last token {len(title.tokens) - 1}"
            )
        return cls(start_token, end_token, title.tokens[start_token : end_token + 1])

    @property
    def surface_text(self) -> str:
        return " ".join(self.surface)


class Provenance(str, Enum):
    DISTANT_SUPERVISION = "distant-supervision"
    ANALYST_FEEDBACK = "analyst-feedback"
    SYNTHETIC = "synthetic"
    MANUAL = "manual"


def encode_bio(
    title: TokenizedTitle, span: AttributeSpan | None, alphabet: LabelAlphabet
) -> tuple[str, ...]:
    """Encode a span as labels: B at the start, I through the rest, O elsewhere."""
    m = len(title.tokens)
    if span is None:
        return (alphabet.outside,) * m
    if span.end_token >= m:
        raise ValueError(f"span end {span.end_token} out of range for {m} tokens")
    labels = [alphabet.outside] * m
    labels[span.start_token] = alphabet.begin
    for i in range(span.start_token + 1, span.end_token + 1):
        labels[i] = alphabet.inside
    return tuple(labels)


def decode_prediction(
    title: TokenizedTitle, labels: Sequence[str]
) -> AttributeSpan | None:
    """Turn a predicted label sequence back into a raw extraction.

    All-O yields None (no value). Otherwise the first subsequence starting
    at a B label and extended through consecutive I labels wins. Orphan I
    labels (no preceding B/I) are treated as O.
    """
    m = len(title.tokens)
    if len(labels) != m:
        raise ValueError(f"{len(labels)} labels for {m} tokens")
    start = None
    for i, label in enumerate(labels):
        if label.startswith("B-"):
            start = i
            break
    if start is None:
        return None
    end = start
    while end + 1 < m and labels[end + 1].startswith("I-"):
        end += 1
    return AttributeSpan.of(title, start, end)


@dataclass(frozen=True)
class TaggedTitle:
    """A tokenized title paired with one gold or predicted-and-vetted labeling."""

    title: TokenizedTitle
    labels: tuple[str, ...]
    provenance: Provenance = Provenance.MANUAL

    def __post_init__(self) -> None:
        if len(self.labels) != len(self.title.tokens):
            raise ValueError(
                f"{len(self.labels)} labels for {len(self.title.tokens)} tokens"
            )
        seen_begin = False
        previous = OUTSIDE
        for label in self.labels:
            if label.startswith("B-"):
                if seen_begin:
                    raise ValueError("more than one B label in a single-valued sequence")
                seen_begin = True
            elif label.startswith("I-"):
                if not (previous.startswith("B-") or previous.startswith("I-")):
                    raise ValueError("I label not preceded by B or I")
                if previous[2:] != label[2:]:
                    raise ValueError("I label attribute differs from its predecessor")
            elif label != OUTSIDE:
                raise ValueError(f"label {label!r} is not B-*, I-* or O")
            previous = label

    @property
    def gold_span(self) -> AttributeSpan | None:
        return decode_prediction(self.title, self.labels)


@dataclass(frozen=True)
class CorpusEntry:
    """One corpus line: a tagged title plus the catalog attribute and value."""

    tagged: TaggedTitle
    attribute: str
    value: str | None = None


def _align_tokens(raw_text: str, tokens: Sequence[str]) -> tuple[tuple[int, int], ...]:
    offsets = []
    cursor = 0
    for token in tokens:
        pos = raw_text.find(token, cursor)
        if pos < 0:
            raise ValueError(f"token {token!r} not found in title {raw_text!r}")
        offsets.append((pos, pos + len(token)))
        cursor = pos + len(token)
    return tuple(offsets)


def entry_from_record(
    record: dict, config: TokenizerConfig = TokenizerConfig()
) -> CorpusEntry:
    """Build a corpus entry from one parsed line record.

    "tokens" and "labels" are computed when absent: tokens by the tokenizer,
    labels by matching the record value inside the title (all-O for a null
    value).
    """
    title_text = record["title"]
    attribute = record["attribute"]
    value = record.get("value")
    if record.get("tokens") is not None:
        tokens = tuple(record["tokens"])
        title = TokenizedTitle(title_text, tokens, _align_tokens(title_text, tokens))
    else:
        title = tokenize(title_text, config)
    provenance = Provenance(record.get("provenance", "manual"))
    if record.get("labels") is not None:
        labels = tuple(record["labels"])
    else:
        alphabet = LabelAlphabet.bio(attribute)
        if value is None:
            labels = encode_bio(title, None, alphabet)
        else:
            from .weak_supervision import match_value_in_title

            span = match_value_in_title(title, value)
            if span is None:
                raise ValueError(
                    f"value {value!r} does not appear in title {title_text!r}; "
                    "cannot compute labels"
                )
            labels = encode_bio(title, span, alphabet)
    return CorpusEntry(TaggedTitle(title, labels, provenance), attribute, value)


def record_from_entry(entry: CorpusEntry) -> dict:
    return {
        "title": entry.tagged.title.raw_text,
        "attribute": entry.attribute,
        "value": entry.value,
        "tokens": list(entry.tagged.title.tokens),
        "labels": list(entry.tagged.labels),
        "provenance": entry.tagged.provenance.value,
    }


def read_corpus(
    path: str | Path, config: TokenizerConfig = TokenizerConfig()
) -> list[CorpusEntry]:
    entries = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                entries.append(entry_from_record(record, config))
            except (ValueError, KeyError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return entries


def write_corpus(entries: Iterable[CorpusEntry], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for entry in entries:
            handle.write(json.dumps(record_from_entry(entry), sort_keys=True, ensure_ascii=False))
            handle.write("\n")
