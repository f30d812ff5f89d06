"""Deterministic caption re-ranking.

Selects, per image, the candidate caption that best balances semantic
alignment (ensembled embedding similarity) and essentialness (leave-one-out
TF-IDF consensus over a filtered caption pool), plus a captioning-metric
evaluation harness (CIDEr-D, BLEU, ROUGE-L).
"""

from .consensus import ConsensusConfig, cider_d, compute_df, consensus_scores
from .filtering import bad_format_filter, build_reference_pool, itm_filter
from .metrics import EvalItem, MetricReport, evaluate
from .pipeline import (
    CombinationWeights,
    RankResult,
    SelectionConfig,
    combine,
    rank_corpus,
    rank_image,
    short_caption_select,
)
from .similarity import cosine, ensemble, z_normalize
from .textproc import extract_ngrams, raw_stats, tokenize

__version__ = "0.1.0"

__all__ = [
    "ConsensusConfig",
    "cider_d",
    "compute_df",
    "consensus_scores",
    "bad_format_filter",
    "build_reference_pool",
    "itm_filter",
    "EvalItem",
    "MetricReport",
    "evaluate",
    "CombinationWeights",
    "RankResult",
    "SelectionConfig",
    "combine",
    "rank_corpus",
    "rank_image",
    "short_caption_select",
    "cosine",
    "ensemble",
    "z_normalize",
    "extract_ngrams",
    "raw_stats",
    "tokenize",
    "__version__",
]
