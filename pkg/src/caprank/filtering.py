"""Reference-pool construction: format filter, then ITM top-fraction filter.

The consensus score is only as good as its reference pool, so malformed
captions (sentence chains, comma pileups, fragments) are dropped first and
the survivors are cut to the top fraction by image-text-matching score.
Fallbacks guarantee the pool is never empty for a non-empty candidate set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .textproc import raw_stats

MAX_PERIODS = 2
MAX_COMMAS = 3
MIN_WORDS = 5

TOO_MANY_PERIODS = "too_many_periods"
TOO_MANY_COMMAS = "too_many_commas"
TOO_FEW_WORDS = "too_few_words"


class FallbackLevel(str, Enum):
    NONE = "none"
    FORMAT_ONLY = "format_only"
    FULL_POOL = "full_pool"


@dataclass
class FilterVerdict:
    index: int
    passed_format: bool
    format_reasons: list[str] = field(default_factory=list)
    passed_itm: bool | None = None  # None = not evaluated


@dataclass
class PoolSelection:
    reference_pool: list[int]  # strictly increasing, never empty
    fallback_level: FallbackLevel


def bad_format_filter(raw: str) -> tuple[bool, list[str]]:
    """Fail on more than two periods, more than three commas, or fewer
    than five whitespace-separated words; list every violated rule."""
    stats = raw_stats(raw)
    reasons = []
    if stats.periods > MAX_PERIODS:
        reasons.append(TOO_MANY_PERIODS)
    if stats.commas > MAX_COMMAS:
        reasons.append(TOO_MANY_COMMAS)
    if stats.words < MIN_WORDS:
        reasons.append(TOO_FEW_WORDS)
    return (not reasons, reasons)


def itm_filter(itm_scores: np.ndarray, eligible: list[int], keep_fraction: float) -> list[int]:
    """Keep the ceil(len(eligible) * keep_fraction) highest-ITM indices.

    Ties break toward the lower candidate index so runs are deterministic;
    the result is sorted ascending by index.
    """
    if not eligible:
        raise ValueError("eligible set is empty")
    if not 0.0 < keep_fraction <= 1.0:
        raise ValueError(f"keep_fraction must be in (0, 1], got {keep_fraction}")
    itm_scores = np.asarray(itm_scores, dtype=np.float64)
    for idx in eligible:
        if idx < 0 or idx >= len(itm_scores):
            raise ValueError(f"no ITM score for candidate index {idx}")
    keep = math.ceil(len(eligible) * keep_fraction)
    ranked = sorted(eligible, key=lambda i: (-itm_scores[i], i))
    return sorted(ranked[:keep])


def build_reference_pool(
    raw_captions: list[str],
    itm_scores: np.ndarray | None,
    keep_fraction: float,
    format_filter_enabled: bool = True,
    itm_filter_enabled: bool = True,
) -> tuple[PoolSelection, list[FilterVerdict]]:
    """Format filter, then ITM filter on the survivors.

    Fallbacks, in order:
      * fewer than 2 format survivors -> ITM top fraction of the full pool
        (or the full pool itself when no ITM scores exist);
      * no ITM scores -> the format survivors as-is.
    Either filter can be switched off for ablations; disabled counts as
    "scores absent" for the fallback bookkeeping.
    """
    if not raw_captions:
        raise ValueError("candidate set is empty")
    n = len(raw_captions)
    all_indices = list(range(n))

    verdicts = []
    for i, raw in enumerate(raw_captions):
        if format_filter_enabled:
            passed, reasons = bad_format_filter(raw)
        else:
            passed, reasons = True, []
        verdicts.append(FilterVerdict(index=i, passed_format=passed, format_reasons=reasons))
    survivors = [v.index for v in verdicts if v.passed_format]

    have_itm = itm_scores is not None and itm_filter_enabled

    if len(survivors) < 2:
        if have_itm:
            pool = itm_filter(itm_scores, all_indices, keep_fraction)
            for v in verdicts:
                if v.passed_format:
                    v.passed_itm = v.index in pool
        else:
            pool = all_indices
        return PoolSelection(pool, FallbackLevel.FULL_POOL), verdicts

    if not have_itm:
        return PoolSelection(survivors, FallbackLevel.FORMAT_ONLY), verdicts

    pool = itm_filter(itm_scores, survivors, keep_fraction)
    kept = set(pool)
    for v in verdicts:
        if v.passed_format:
            v.passed_itm = v.index in kept
    return PoolSelection(pool, FallbackLevel.NONE), verdicts
