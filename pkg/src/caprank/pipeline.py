"""Per-image ranking flow and the corpus-level runner.

Stages per image: reference-pool filtering, leave-one-out consensus over
the filtered pool, channel ensembling, weighted combination of the two
normalized scores, and the short-caption tie-break. Every intermediate
lands in the RankResult so staged CLI runs and ablations can be checked
against the monolithic path.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Iterator

import numpy as np

from .consensus import ConsensusConfig, consensus_scores
from .filtering import FilterVerdict, PoolSelection, build_reference_pool
from .similarity import z_normalize
from .textproc import profile, raw_stats


@dataclass(frozen=True)
class CombinationWeights:
    """Weights for the ensemble and consensus terms of the combined score.

    The 3.52:1 default puts the larger weight on the ensemble channel so
    the consensus score's wider spread cannot dominate selection.
    """

    lambda_ensemble: float = 3.52
    lambda_consensus: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.lambda_ensemble) and np.isfinite(self.lambda_consensus)):
            raise ValueError("combination weights must be finite")
        if self.lambda_ensemble == 0.0 and self.lambda_consensus == 0.0:
            raise ValueError("combination weights must not both be zero")


class SelectFrom(str, Enum):
    ALL = "all"
    FILTERED = "filtered"


@dataclass(frozen=True)
class SelectionConfig:
    theta: float = 0.39
    select_from: SelectFrom = SelectFrom.ALL
    short_caption_enabled: bool = True

    def __post_init__(self):
        if self.theta < 0:
            raise ValueError(f"theta must be >= 0, got {self.theta}")


class SelectionReason(str, Enum):
    CLEAR_MARGIN = "clear_margin"
    SHORT_CAPTION_SWAP = "short_caption_swap"
    DEGENERATE_SINGLE = "degenerate_single"


@dataclass
class RankResult:
    image_id: str
    captions: list[str]
    verdicts: list[FilterVerdict]
    pool: PoolSelection
    channels: dict[str, np.ndarray]
    word_counts: list[int]
    selected_index: int
    runner_up_index: int | None
    selection_reason: SelectionReason

    @property
    def selected_caption(self) -> str:
        return self.captions[self.selected_index]


# Moments for dataset-wide normalization: channel name -> (mean, std).
NormStats = dict[str, tuple[float, float]]


def combine(
    ensemble: np.ndarray,
    consensus: np.ndarray,
    weights: CombinationWeights = CombinationWeights(),
    norm_stats: NormStats | None = None,
) -> np.ndarray:
    """z-normalize both inputs independently, then weighted sum."""
    ensemble = np.asarray(ensemble, dtype=np.float64)
    consensus = np.asarray(consensus, dtype=np.float64)
    if ensemble.shape != consensus.shape:
        raise ValueError(f"length mismatch: {ensemble.shape} vs {consensus.shape}")
    ens_z = z_normalize(ensemble, *_stats_for("ensemble", norm_stats))
    cons_z = z_normalize(consensus, *_stats_for("consensus", norm_stats))
    return weights.lambda_ensemble * ens_z + weights.lambda_consensus * cons_z


def _stats_for(name: str, norm_stats: NormStats | None) -> tuple[float | None, float | None]:
    if norm_stats is None or name not in norm_stats:
        return (None, None)
    return norm_stats[name]


def short_caption_select(
    combined: np.ndarray,
    word_counts: list[int],
    eligible: list[int],
    cfg: SelectionConfig = SelectionConfig(),
) -> tuple[int, int | None, SelectionReason]:
    """Argmax of the combined score, except that a near-tie between the
    top two (margin below theta) goes to the caption with fewer words.

    Score ties break toward the lower candidate index before the theta
    rule applies; a word-count tie keeps the higher-scoring caption.
    """
    if not eligible:
        raise ValueError("eligible set is empty")
    combined = np.asarray(combined, dtype=np.float64)
    ranked = sorted(eligible, key=lambda i: (-combined[i], i))
    if len(ranked) == 1:
        return ranked[0], None, SelectionReason.DEGENERATE_SINGLE
    t1, t2 = ranked[0], ranked[1]
    margin = combined[t1] - combined[t2]
    if cfg.short_caption_enabled and margin < cfg.theta and word_counts[t2] < word_counts[t1]:
        return t2, t1, SelectionReason.SHORT_CAPTION_SWAP
    return t1, t2, SelectionReason.CLEAR_MARGIN


def rank_image(
    image_id: str,
    raw_captions: list[str],
    clip_channels: dict[str, np.ndarray],
    itm: np.ndarray | None = None,
    *,
    weights: CombinationWeights = CombinationWeights(),
    sel_cfg: SelectionConfig = SelectionConfig(),
    cons_cfg: ConsensusConfig = ConsensusConfig(),
    keep_fraction: float = 0.5,
    format_filter_enabled: bool = True,
    itm_filter_enabled: bool = True,
    precomputed_consensus: np.ndarray | None = None,
    norm_stats: NormStats | None = None,
) -> RankResult:
    """Run the full ranking flow for one image.

    ``precomputed_consensus`` short-circuits stage 2 when a consensus
    channel was produced by a staged run; ``norm_stats`` switches every
    z-normalization to dataset-wide moments.
    """
    n = len(raw_captions)
    if n == 0:
        raise ValueError(f"image {image_id!r} has no candidate captions")
    for name, scores in clip_channels.items():
        if len(scores) != n:
            raise ValueError(
                f"image {image_id!r}: channel {name!r} has {len(scores)} scores "
                f"for {n} captions"
            )
    if itm is not None and len(itm) != n:
        raise ValueError(f"image {image_id!r}: itm channel has {len(itm)} scores for {n} captions")
    if not clip_channels:
        raise ValueError(f"image {image_id!r}: no similarity channels supplied")

    pool, verdicts = build_reference_pool(
        raw_captions,
        itm,
        keep_fraction,
        format_filter_enabled=format_filter_enabled,
        itm_filter_enabled=itm_filter_enabled,
    )

    if precomputed_consensus is not None:
        consensus_raw = np.asarray(precomputed_consensus, dtype=np.float64)
        if len(consensus_raw) != n:
            raise ValueError(f"image {image_id!r}: consensus channel length mismatch")
    else:
        profiles = [profile(raw, cons_cfg.n_max) for raw in raw_captions]
        consensus_raw = consensus_scores(profiles, pool.reference_pool, cons_cfg)

    channels: dict[str, np.ndarray] = {}
    ensemble_raw = None
    for name in sorted(clip_channels):
        raw = np.asarray(clip_channels[name], dtype=np.float64)
        z = z_normalize(raw, *_stats_for(name, norm_stats))
        channels[name] = raw
        channels[name + "_z"] = z
        ensemble_raw = z if ensemble_raw is None else ensemble_raw + z

    combined = combine(ensemble_raw, consensus_raw, weights, norm_stats)
    channels["ensemble"] = ensemble_raw
    channels["ensemble_z"] = z_normalize(ensemble_raw, *_stats_for("ensemble", norm_stats))
    channels["consensus"] = consensus_raw
    channels["consensus_z"] = z_normalize(consensus_raw, *_stats_for("consensus", norm_stats))
    channels["combined"] = combined
    if itm is not None:
        channels["itm"] = np.asarray(itm, dtype=np.float64)

    eligible = pool.reference_pool if sel_cfg.select_from == SelectFrom.FILTERED else list(range(n))
    word_counts = [raw_stats(raw).words for raw in raw_captions]
    selected, runner_up, reason = short_caption_select(combined, word_counts, eligible, sel_cfg)

    return RankResult(
        image_id=image_id,
        captions=list(raw_captions),
        verdicts=verdicts,
        pool=pool,
        channels=channels,
        word_counts=word_counts,
        selected_index=selected,
        runner_up_index=runner_up,
        selection_reason=reason,
    )


class NormalizationScope(str, Enum):
    PER_IMAGE = "per_image"
    DATASET = "dataset"


@dataclass
class ImageInputs:
    """Everything rank_image needs for one image."""

    image_id: str
    captions: list[str]
    clip_channels: dict[str, np.ndarray]
    itm: np.ndarray | None = None
    precomputed_consensus: np.ndarray | None = None


@dataclass(frozen=True)
class PipelineConfig:
    weights: CombinationWeights = CombinationWeights()
    sel_cfg: SelectionConfig = SelectionConfig()
    cons_cfg: ConsensusConfig = ConsensusConfig()
    keep_fraction: float = 0.5
    format_filter_enabled: bool = True
    itm_filter_enabled: bool = True
    normalization_scope: NormalizationScope = NormalizationScope.PER_IMAGE
    threads: int = 1


def rank_corpus(images: list[ImageInputs], cfg: PipelineConfig = PipelineConfig()) -> Iterator[RankResult]:
    """Rank every image; results come back in input order regardless of
    how many worker threads ran the per-image stages."""
    if cfg.normalization_scope == NormalizationScope.DATASET:
        yield from _rank_corpus_dataset_scope(images, cfg)
        return

    def run(inputs: ImageInputs) -> RankResult:
        return rank_image(
            inputs.image_id,
            inputs.captions,
            inputs.clip_channels,
            inputs.itm,
            weights=cfg.weights,
            sel_cfg=cfg.sel_cfg,
            cons_cfg=cfg.cons_cfg,
            keep_fraction=cfg.keep_fraction,
            format_filter_enabled=cfg.format_filter_enabled,
            itm_filter_enabled=cfg.itm_filter_enabled,
            precomputed_consensus=inputs.precomputed_consensus,
        )

    yield from _ordered_map(run, images, cfg.threads)


def _ordered_map(fn, items: list, threads: int) -> Iterator:
    if threads <= 1:
        for item in items:
            yield fn(item)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            yield from pool.map(fn, items)


def _rank_corpus_dataset_scope(images: list[ImageInputs], cfg: PipelineConfig) -> Iterator[RankResult]:
    """Two-pass run: compute raw consensus everywhere first, derive
    dataset-wide moments per channel, then rank with those moments."""

    def consensus_pass(inputs: ImageInputs) -> np.ndarray:
        if inputs.precomputed_consensus is not None:
            return np.asarray(inputs.precomputed_consensus, dtype=np.float64)
        pool, _ = build_reference_pool(
            inputs.captions,
            inputs.itm,
            cfg.keep_fraction,
            format_filter_enabled=cfg.format_filter_enabled,
            itm_filter_enabled=cfg.itm_filter_enabled,
        )
        profiles = [profile(raw, cfg.cons_cfg.n_max) for raw in inputs.captions]
        return consensus_scores(profiles, pool.reference_pool, cfg.cons_cfg)

    consensus_vectors = list(_ordered_map(consensus_pass, images, cfg.threads))

    channel_names = sorted({name for img in images for name in img.clip_channels})
    for img in images:
        missing = [name for name in channel_names if name not in img.clip_channels]
        if missing:
            raise ValueError(
                f"image {img.image_id!r} lacks channels {missing}; dataset-wide "
                f"normalization needs every channel on every image"
            )
    stats: NormStats = {}
    for name in channel_names:
        concat = np.concatenate(
            [np.asarray(img.clip_channels[name], dtype=np.float64) for img in images]
        )
        stats[name] = (float(concat.mean()), float(concat.std()))
    cons_concat = np.concatenate(consensus_vectors)
    stats["consensus"] = (float(cons_concat.mean()), float(cons_concat.std()))

    ensembles = []
    for img in images:
        total = None
        for name in sorted(img.clip_channels):
            z = z_normalize(np.asarray(img.clip_channels[name], dtype=np.float64), *stats[name])
            total = z if total is None else total + z
        ensembles.append(total)
    ens_concat = np.concatenate(ensembles)
    stats["ensemble"] = (float(ens_concat.mean()), float(ens_concat.std()))

    def run(pair: tuple[ImageInputs, np.ndarray]) -> RankResult:
        inputs, cons_vec = pair
        return rank_image(
            inputs.image_id,
            inputs.captions,
            inputs.clip_channels,
            inputs.itm,
            weights=cfg.weights,
            sel_cfg=cfg.sel_cfg,
            cons_cfg=cfg.cons_cfg,
            keep_fraction=cfg.keep_fraction,
            format_filter_enabled=cfg.format_filter_enabled,
            itm_filter_enabled=cfg.itm_filter_enabled,
            precomputed_consensus=cons_vec,
            norm_stats=stats,
        )

    yield from _ordered_map(run, list(zip(images, consensus_vectors)), cfg.threads)
