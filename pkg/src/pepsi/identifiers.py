"""Canonical report/query identifiers.

An identifier is an ordered list of keywords, e.g. ``("Temperature",
"San Francisco")``.  The canonical form is NFC-normalized, lowercased,
whitespace-collapsed keywords joined by ``|``, encoded as UTF-8.
"""

from __future__ import annotations

import unicodedata

SEPARATOR = "|"


def _keyword(word: str) -> str:
    word = " ".join(unicodedata.normalize("NFC", word).split()).lower()
    if not word:
        raise ValueError("empty keyword")
    if SEPARATOR in word:
        raise ValueError(f"keyword may not contain {SEPARATOR!r}")
    return word


def canonical_id(*keywords: str) -> bytes:
    """``canonical_id("Temperature", "San  Francisco") == b"temperature|san francisco"``.

    A single argument that already contains ``|`` is split on it first.
    """
    if len(keywords) == 1 and isinstance(keywords[0], (list, tuple)):
        keywords = tuple(keywords[0])
    words: list[str] = []
    for k in keywords:
        if isinstance(k, bytes):
            k = k.decode("utf-8")
        words.extend(k.split(SEPARATOR))
    if not words:
        raise ValueError("empty identifier")
    return SEPARATOR.join(_keyword(w) for w in words).encode("utf-8")


def require_canonical(identifier) -> bytes:
    if isinstance(identifier, str):
        identifier = identifier.encode("utf-8")
    if not identifier:
        raise ValueError("empty identifier")
    try:
        canon = canonical_id(identifier.decode("utf-8"))
    except (UnicodeDecodeError, ValueError) as exc:
        raise ValueError(f"non-canonical identifier {identifier!r}: {exc}") from exc
    if canon != identifier:
        raise ValueError(f"non-canonical identifier {identifier!r}; expected {canon!r}")
    return bytes(identifier)
