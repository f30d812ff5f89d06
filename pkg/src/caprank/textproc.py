"""Tokenization, n-gram extraction, and raw-string statistics.

Every scoring stage (consensus, metric evaluation, format filtering)
shares this one tokenizer so n-gram tables are comparable everywhere.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

# Maximal runs of Unicode alphanumerics (underscore excluded). Lowercasing
# happens before matching, so tokens come out lowercase.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

NGram = tuple[str, ...]


def tokenize(raw: str) -> list[str]:
    """Lowercase, replace non-alphanumerics with spaces, split.

    Accented and other non-Latin letters are kept; punctuation and symbols
    act as separators. Empty input yields an empty list.
    """
    return _TOKEN_RE.findall(raw.lower())


@dataclass
class NGramProfile:
    """Sliding-window n-gram counts for one caption, levels 1..n_max."""

    counts_by_n: dict[int, dict[NGram, int]]
    token_length: int

    def level(self, n: int) -> dict[NGram, int]:
        return self.counts_by_n.get(n, {})


def extract_ngrams(tokens: list[str], n_max: int) -> NGramProfile:
    """Count every n-gram of each order 1..n_max with exact multiplicity.

    Sequences shorter than n simply yield an empty table at level n.
    """
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    length = len(tokens)
    counts_by_n: dict[int, dict[NGram, int]] = {}
    for n in range(1, n_max + 1):
        counts: dict[NGram, int] = {}
        for i in range(length - n + 1):
            gram = tuple(tokens[i : i + n])
            counts[gram] = counts.get(gram, 0) + 1
        counts_by_n[n] = counts
    return NGramProfile(counts_by_n=counts_by_n, token_length=length)


def profile(raw: str, n_max: int = 4) -> NGramProfile:
    """Tokenize and extract n-grams in one step."""
    return extract_ngrams(tokenize(raw), n_max)


@dataclass(frozen=True)
class RawStats:
    """Surface-form counts used by the format filter (pre-tokenization)."""

    periods: int
    commas: int
    words: int


def raw_stats(raw: str) -> RawStats:
    """Count '.' and ',' characters and whitespace-separated words.

    Word counting runs on the raw string, not on tokenizer output: the
    format filter counts surface-form words, punctuation attached.
    """
    return RawStats(
        periods=raw.count("."),
        commas=raw.count(","),
        words=len(raw.split()),
    )
