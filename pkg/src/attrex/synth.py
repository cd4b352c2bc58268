"""Synthetic catalog generator for desk-scale benchmarks.

Emits product-like titles whose attribute values appear under configurable
noise (case mangling, special-character variation, abbreviation, single-edit
typos), together with the ground-truth normalization table mapping every
generated variant back to its canonical value. Same seed, same bytes.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

from .corpus import (
    AttributeSpan,
    CorpusEntry,
    Provenance,
    LabelAlphabet,
    TaggedTitle,
    TokenizerConfig,
    encode_bio,
    tokenize,
)
from .normalize import NormalizationTable
from .text import key_form
from .weak_supervision import CatalogRecord

_SYLLABLES = (
    "bran", "cor", "dal", "fen", "gar", "hol", "jas", "kel", "lor", "mar",
    "nor", "pel", "quin", "ras", "sol", "tor", "ved", "wex", "yar", "zel",
    "ash", "bel", "cran", "dun", "elm", "fair", "glen", "hart", "ives", "kron",
)

_FILLER_WORDS = (
    "replacement", "cordless", "stainless", "steel", "portable", "wireless",
    "kit", "set", "pack", "light", "cover", "case", "pro", "mini", "deluxe",
    "heavy", "duty", "compact", "rechargeable", "adjustable", "premium",
    "classic", "vintage", "outdoor", "indoor", "universal", "digital",
    "manual", "electric", "folding", "cushioned", "decorative", "assorted",
    "round", "square", "large", "small", "medium", "genuine", "original",
    "plated", "engraved", "collector", "edition", "series", "style", "piece",
    "inch", "ounce", "count", "value", "bundle", "refill", "spare", "holder",
    "mount", "bracket", "adapter", "cable", "charger", "battery", "filter",
    "blade", "handle", "strap", "pouch", "sleeve", "frame", "panel", "board",
)

_TYPO_LETTERS = "abcdefghijklmnopqrstuvwxyz"


@dataclass(frozen=True)
class GeneratorConfig:
    n_values: int = 500
    mean_titles_per_value: float = 4.0  # geometric: heavy-tailed toward 1
    unbranded_fraction: float = 0.1
    case_noise: float = 0.2
    special_char_noise: float = 0.2
    abbreviation_noise: float = 0.05
    typo_noise: float = 0.15
    by_marker_rate: float = 0.25
    start_position_bias: float = 0.6
    min_filler_tokens: int = 3
    max_filler_tokens: int = 8
    attribute_name: str = "brand"
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.n_values < 1:
            raise ValueError("n_values must be >= 1")
        if self.mean_titles_per_value < 1:
            raise ValueError("mean_titles_per_value must be >= 1")
        rates = {
            "unbranded_fraction": self.unbranded_fraction,
            "case_noise": self.case_noise,
            "special_char_noise": self.special_char_noise,
            "abbreviation_noise": self.abbreviation_noise,
            "typo_noise": self.typo_noise,
            "by_marker_rate": self.by_marker_rate,
            "start_position_bias": self.start_position_bias,
        }
        for name, rate in rates.items():
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {rate}")
        if not 1 <= self.min_filler_tokens <= self.max_filler_tokens:
            raise ValueError("need 1 <= min_filler_tokens <= max_filler_tokens")


@dataclass(frozen=True)
class SynthRecord:
    title: str
    value: str | None  # canonical value; None for unbranded titles
    variant: str | None  # the surface form actually embedded in the title
    span: tuple[int, int] | None  # inclusive token span of the variant


@dataclass(frozen=True)
class SynthCatalog:
    attribute_name: str
    records: tuple[SynthRecord, ...]
    table: NormalizationTable

    def to_catalog_records(self) -> list[CatalogRecord]:
        return [
            CatalogRecord(r.title, self.attribute_name, r.value) for r in self.records
        ]

    def to_corpus_entries(
        self, config: TokenizerConfig = TokenizerConfig()
    ) -> list[CorpusEntry]:
        alphabet = LabelAlphabet.bio(self.attribute_name)
        entries = []
        for record in self.records:
            title = tokenize(record.title, config)
            span = None
            if record.span is not None:
                span = AttributeSpan.of(title, record.span[0], record.span[1])
            labels = encode_bio(title, span, alphabet)
            tagged = TaggedTitle(title, labels, Provenance.SYNTHETIC)
            entries.append(CorpusEntry(tagged, self.attribute_name, record.value))
        return entries


def _make_value_word(rng: random.Random) -> str:
    word = "".join(rng.choice(_SYLLABLES) for _ in range(rng.randint(2, 3)))
    return word.capitalize()


def _is_subsequence(needle: tuple[str, ...], hay: tuple[str, ...]) -> bool:
    if len(needle) > len(hay):
        return False
    return any(
        hay[i : i + len(needle)] == needle for i in range(len(hay) - len(needle) + 1)
    )


def _make_value_inventory(rng: random.Random, n_values: int) -> list[tuple[str, ...]]:
    """Distinct canonical values, none a token-subsequence of another.

    The subsequence constraint keeps dictionary matches unambiguous on
    noiseless corpora. Value words are pseudo-words, disjoint from the
    filler vocabulary by construction.
    """
    filler = set(_FILLER_WORDS) | {"by"}
    values: list[tuple[str, ...]] = []
    keys: set[str] = set()
    attempts = 0
    while len(values) < n_values:
        attempts += 1
        if attempts > n_values * 200:
            raise RuntimeError("could not build a value inventory; too many collisions")
        n_words = rng.choices((1, 2, 3), weights=(45, 40, 15))[0]
        candidate = tuple(_make_value_word(rng) for _ in range(n_words))
        if any(word.lower() in filler for word in candidate):
            continue
        key = key_form(" ".join(candidate))
        if key in keys:
            continue
        lowered = tuple(w.lower() for w in candidate)
        if any(
            _is_subsequence(lowered, tuple(w.lower() for w in v))
            or _is_subsequence(tuple(w.lower() for w in v), lowered)
            for v in values
        ):
            continue
        values.append(candidate)
        keys.add(key)
    return values


def _mangle_case(tokens: list[str], rng: random.Random) -> list[str]:
    style = rng.choice(("upper", "lower"))
    if style == "upper":
        return [t.upper() for t in tokens]
    return [t.lower() for t in tokens]


def _vary_special_chars(tokens: list[str], rng: random.Random) -> list[str]:
    if len(tokens) >= 2:
        i = rng.randrange(len(tokens) - 1)
        if rng.random() < 0.5:
            return tokens[:i] + [tokens[i] + tokens[i + 1]] + tokens[i + 2 :]
        return tokens[:i] + [tokens[i] + "-" + tokens[i + 1]] + tokens[i + 2 :]
    token = tokens[0]
    if len(token) >= 4:
        cut = rng.randint(2, len(token) - 2)
        return [token[:cut] + "-" + token[cut:]]
    return tokens


def _abbreviate(tokens: list[str], rng: random.Random) -> list[str]:
    if len(tokens) >= 2:
        return ["".join(t[0] for t in tokens).upper()]
    token = tokens[0]
    return [token[: max(3, len(token) // 2)]]


def _typo(tokens: list[str], rng: random.Random) -> list[str]:
    i = rng.randrange(len(tokens))
    token = tokens[i]
    ops = ["substitute"]
    if len(token) > 1:
        ops += ["delete", "transpose"]
    op = rng.choice(ops)
    pos = rng.randrange(len(token))
    if op == "substitute":
        letter = rng.choice(_TYPO_LETTERS)
        while letter == token[pos].lower() and len(_TYPO_LETTERS) > 1:
            letter = rng.choice(_TYPO_LETTERS)
        mutated = token[:pos] + letter + token[pos + 1 :]
    elif op == "delete":
        mutated = token[:pos] + token[pos + 1 :]
    else:
        pos = min(pos, len(token) - 2)
        mutated = token[:pos] + token[pos + 1] + token[pos] + token[pos + 2 :]
    result = list(tokens)
    result[i] = mutated
    return result


def _noisy_variant(
    value: tuple[str, ...], config: GeneratorConfig, rng: random.Random
) -> list[str]:
    """Apply the noise pipeline in fixed order: case, specials, abbreviation, typo."""
    tokens = list(value)
    if rng.random() < config.case_noise:
        tokens = _mangle_case(tokens, rng)
    if rng.random() < config.special_char_noise:
        tokens = _vary_special_chars(tokens, rng)
    if rng.random() < config.abbreviation_noise:
        tokens = _abbreviate(tokens, rng)
    if rng.random() < config.typo_noise:
        tokens = _typo(tokens, rng)
    return [t for t in tokens if t]


def _filler_token(rng: random.Random) -> str:
    roll = rng.random()
    if roll < 0.12:  # part-number-like token
        letters = "".join(rng.choice("ABCDEFGHJKLMNPRSTUVWX") for _ in range(rng.randint(2, 3)))
        digits = "".join(rng.choice("0123456789") for _ in range(rng.randint(2, 4)))
        return letters + digits if rng.random() < 0.5 else f"{letters}-{digits}"
    if roll < 0.2:  # bare number or size
        number = str(rng.randint(2, 9999))
        return number if rng.random() < 0.6 else f"{number}-inch"
    word = rng.choice(_FILLER_WORDS)
    if rng.random() < 0.15:
        word = word.capitalize()
    return word


def _geometric(rng: random.Random, mean: float) -> int:
    p = 1.0 / mean
    if p >= 1.0:
        return 1
    count = 1
    while rng.random() >= p:
        count += 1
    return count


def generate_catalog(config: GeneratorConfig) -> SynthCatalog:
    """Build the synthetic catalog and its ground-truth normalization table."""
    rng = random.Random(config.rng_seed)
    inventory = _make_value_inventory(rng, config.n_values)
    table_entries: dict[str, str] = {}
    records: list[SynthRecord] = []

    for value_tokens in inventory:
        canonical = " ".join(value_tokens)
        table_entries[key_form(canonical)] = canonical
        n_titles = _geometric(rng, config.mean_titles_per_value)
        for _ in range(n_titles):
            variant_tokens = _noisy_variant(value_tokens, config, rng)
            if not variant_tokens:
                variant_tokens = list(value_tokens)
            variant = " ".join(variant_tokens)
            variant_key = key_form(variant)
            if table_entries.get(variant_key, canonical) != canonical:
                # a noise collision with another value's key: keep it clean
                variant_tokens = list(value_tokens)
                variant = canonical
                variant_key = key_form(canonical)
            table_entries[variant_key] = canonical
            records.append(
                _assemble_record(variant_tokens, variant, canonical, config, rng)
            )

    n_branded = len(records)
    if config.unbranded_fraction > 0:
        n_unbranded = round(
            n_branded * config.unbranded_fraction / (1 - config.unbranded_fraction)
        )
        for _ in range(n_unbranded):
            filler = [
                _filler_token(rng)
                for _ in range(rng.randint(config.min_filler_tokens, config.max_filler_tokens))
            ]
            records.append(SynthRecord(" ".join(filler), None, None, None))

    table = NormalizationTable(table_entries)
    catalog = SynthCatalog(config.attribute_name, tuple(records), table)
    _check_tokenization(catalog)
    return catalog


def _assemble_record(
    variant_tokens: list[str],
    variant: str,
    canonical: str,
    config: GeneratorConfig,
    rng: random.Random,
) -> SynthRecord:
    n_filler = rng.randint(config.min_filler_tokens, config.max_filler_tokens)
    filler = [_filler_token(rng) for _ in range(n_filler)]
    if rng.random() < config.start_position_bias:
        position = 0
    else:
        position = rng.randint(1, n_filler)
    tokens = filler[:position]
    if position > 0 and rng.random() < config.by_marker_rate:
        tokens.append("by")
    start = len(tokens)
    tokens.extend(variant_tokens)
    end = len(tokens) - 1
    tokens.extend(filler[position:])
    return SynthRecord(" ".join(tokens), canonical, variant, (start, end))


def _check_tokenization(catalog: SynthCatalog) -> None:
    """Generated titles must tokenize back to the constructed token lists."""
    for record in catalog.records:
        tokens = tokenize(record.title).tokens
        if " ".join(tokens) != record.title:
            raise AssertionError(f"generated title does not round-trip: {record.title!r}")
        if record.span is not None:
            start, end = record.span
            surface = " ".join(tokens[start : end + 1])
            if surface != record.variant:
                raise AssertionError(
                    f"span {record.span} of {record.title!r} is {surface!r}, "
                    f"expected {record.variant!r}"
                )
