"""Embedding cosine similarity, z-normalization, and channel ensembling.

Scores flow through as plain 1-D float64 numpy arrays, one entry per
candidate caption of a single image. Negative cosine values are kept:
clamping them to zero would flatten the low-relevance tail of the
distribution, which is exactly where re-ranking needs resolution.
"""

from __future__ import annotations

import warnings

import numpy as np

# Below this, a channel is treated as constant and normalizes to zeros.
STD_EPS = 1e-12


class DegenerateEmbeddingWarning(RuntimeWarning):
    """A zero-norm embedding was seen; its cosine is defined as 0."""


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity in [-1, 1]; never clamped.

    A zero-norm vector is a degenerate embedding: the result is defined
    as 0.0 (with a warning) rather than an error so batch runs survive
    bad rows.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        warnings.warn("zero-norm embedding, cosine defined as 0", DegenerateEmbeddingWarning)
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def cosine_rows(image_vec: np.ndarray, caption_rows: np.ndarray) -> np.ndarray:
    """Cosine of one image embedding against each caption embedding row."""
    image_vec = np.asarray(image_vec, dtype=np.float64)
    caption_rows = np.asarray(caption_rows, dtype=np.float64)
    if caption_rows.ndim != 2 or caption_rows.shape[1] != image_vec.shape[0]:
        raise ValueError(
            f"dimension mismatch: image {image_vec.shape} vs captions {caption_rows.shape}"
        )
    ni = np.linalg.norm(image_vec)
    nc = np.linalg.norm(caption_rows, axis=1)
    denom = ni * nc
    out = np.zeros(caption_rows.shape[0], dtype=np.float64)
    ok = denom > 0.0
    if not ok.all():
        warnings.warn(
            f"{int((~ok).sum())} zero-norm embedding pair(s), cosine defined as 0",
            DegenerateEmbeddingWarning,
        )
    out[ok] = (caption_rows[ok] @ image_vec) / denom[ok]
    return out


def z_normalize(scores: np.ndarray, mean: float | None = None, std: float | None = None) -> np.ndarray:
    """(S - mean(S)) / std(S) with population (1/N) standard deviation.

    A constant channel (std below STD_EPS) carries no ranking information
    and normalizes to all zeros. Explicit mean/std override the per-vector
    moments; the batch runner passes dataset-wide moments through here.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("cannot z-normalize an empty score vector")
    mu = float(scores.mean()) if mean is None else mean
    sigma = float(scores.std()) if std is None else std
    if sigma < STD_EPS:
        return np.zeros_like(scores)
    return (scores - mu) / sigma


def ensemble(channels: dict[str, np.ndarray]) -> np.ndarray:
    """Element-wise sum of z-normalized channels.

    All channels must cover the same candidate list. With a single channel
    this is just its z-normalization.
    """
    if not channels:
        raise ValueError("ensemble needs at least one channel")
    lengths = {name: len(np.asarray(v)) for name, v in channels.items()}
    if len(set(lengths.values())) != 1:
        raise ValueError(f"channel length mismatch: {lengths}")
    # Sorted-name order keeps the float summation order canonical, so the
    # result is bit-identical no matter how the channel dict was assembled.
    total = None
    for name in sorted(channels):
        z = z_normalize(channels[name])
        total = z if total is None else total + z
    return total
