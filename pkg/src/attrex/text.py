"""Shared key-form used to compare value surfaces across the toolkit.

Variations of the same attribute value differ in case, in a small set of
special characters, and in spacing. Folding all three away gives the exact
lookup key for normalization tables, blacklists, and the matching tolerance
used when annotating titles from a catalog.
"""

from __future__ import annotations

STRIPPED_CHARS = frozenset("-'&.,")


def key_form(text: str) -> str:
    """Casefold and drop special characters and all whitespace.

    Idempotent: key_form(key_form(s)) == key_form(s).
    """
    return "".join(
        ch for ch in text.casefold() if not ch.isspace() and ch not in STRIPPED_CHARS
    )
