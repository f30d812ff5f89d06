"""Interchange formats: captions, embeddings, score tables, results.

Text files are UTF-8 line-delimited JSON; the embedding file is binary
with a fixed little-endian header and float32 rows (arithmetic happens at
float64 after load). Readers validate aggressively and fail with the file
position; writers format floats with 9 significant digits so identical
runs produce byte-identical files.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

EMBEDDING_MAGIC = b"ECOEMB1\x00"
# 16-byte header: magic, dim (u32), row_count (u32), all little-endian;
# total file size is 16 + 4 * dim * row_count.
_HEADER = struct.Struct("<8sII")


class FormatError(ValueError):
    """A file violated its interchange contract."""


@dataclass
class CaptionRecord:
    image_id: str
    captions: list[str]


@dataclass
class EmbeddingMatrix:
    """Dense float32 rows bound to identifiers via the sidecar index.

    image files: ids are image_id strings;
    caption files: ids are (image_id, caption_index) pairs.
    """

    rows: np.ndarray
    ids: list

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


@dataclass
class ScoreTableRecord:
    image_id: str
    channel: str
    scores: list[float]


def _read_jsonl(path: str | Path) -> Iterable[tuple[int, dict]]:
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise FormatError(f"{path}:{lineno}: expected an object")
            yield lineno, obj


def read_captions(path: str | Path) -> list[CaptionRecord]:
    """One record per line: {"image_id": str, "captions": [str, ...]}."""
    records = []
    seen: dict[str, int] = {}
    for lineno, obj in _read_jsonl(path):
        image_id = obj.get("image_id")
        captions = obj.get("captions")
        if not isinstance(image_id, str) or not image_id:
            raise FormatError(f"{path}:{lineno}: image_id must be a non-empty string")
        if (
            not isinstance(captions, list)
            or not captions
            or not all(isinstance(c, str) for c in captions)
        ):
            raise FormatError(f"{path}:{lineno}: captions must be a non-empty array of strings")
        if image_id in seen:
            raise FormatError(
                f"{path}:{lineno}: duplicate image_id {image_id!r} "
                f"(first seen on line {seen[image_id]})"
            )
        seen[image_id] = lineno
        records.append(CaptionRecord(image_id=image_id, captions=captions))
    return records


def write_captions(path: str | Path, records: list[CaptionRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(
                json_line({"image_id": rec.image_id, "captions": rec.captions}) + "\n"
            )


def read_embeddings(path: str | Path, index_path: str | Path, kind: str = "image") -> EmbeddingMatrix:
    """Binary embedding file plus its line-delimited index sidecar.

    kind="image": index lines are bare image ids.
    kind="caption": index lines are "<image_id>\\t<caption_index>".
    """
    if kind not in ("image", "caption"):
        raise ValueError(f"kind must be 'image' or 'caption', got {kind!r}")
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: file too short for header ({len(data)} bytes)")
    magic, dim, row_count = _HEADER.unpack_from(data, 0)
    if magic != EMBEDDING_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if dim < 1:
        raise FormatError(f"{path}: dim must be >= 1, got {dim}")
    expected = _HEADER.size + 4 * dim * row_count
    if len(data) != expected:
        raise FormatError(
            f"{path}: size mismatch: header says {expected} bytes "
            f"(dim={dim}, rows={row_count}), file has {len(data)}"
        )
    rows = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(row_count, dim)
    bad = ~np.isfinite(rows)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise FormatError(f"{path}: non-finite value at row {r}, column {c}")

    ids = []
    with open(index_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if kind == "image":
                if not line:
                    raise FormatError(f"{index_path}:{lineno}: empty image_id")
                ids.append(line)
            else:
                parts = line.split("\t")
                if len(parts) != 2 or not parts[0]:
                    raise FormatError(
                        f"{index_path}:{lineno}: expected '<image_id>\\t<caption_index>'"
                    )
                try:
                    caption_index = int(parts[1])
                except ValueError as exc:
                    raise FormatError(
                        f"{index_path}:{lineno}: caption_index is not an integer"
                    ) from exc
                ids.append((parts[0], caption_index))
    if len(ids) != row_count:
        raise FormatError(
            f"{index_path}: {len(ids)} index lines for {row_count} embedding rows"
        )
    return EmbeddingMatrix(rows=rows, ids=ids)


def write_embeddings(path: str | Path, index_path: str | Path, rows: np.ndarray, ids: list) -> None:
    rows = np.ascontiguousarray(rows, dtype="<f4")
    if rows.ndim != 2:
        raise ValueError(f"embedding rows must be 2-D, got shape {rows.shape}")
    if len(ids) != rows.shape[0]:
        raise ValueError(f"{len(ids)} ids for {rows.shape[0]} rows")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(EMBEDDING_MAGIC, rows.shape[1], rows.shape[0]))
        fh.write(rows.tobytes())
    with open(index_path, "w", encoding="utf-8") as fh:
        for entry in ids:
            if isinstance(entry, tuple):
                fh.write(f"{entry[0]}\t{entry[1]}\n")
            else:
                fh.write(f"{entry}\n")


# Score channels grouped by image: {image_id: {channel: np.ndarray}}.
ScoreStore = dict[str, dict[str, np.ndarray]]


def read_score_table(path: str | Path, store: ScoreStore | None = None) -> ScoreStore:
    """Read records {"image_id", "channel", "scores"} into a channel store.

    A repeated (image_id, channel) pair is an error: silent overwrites
    would make staged runs order-dependent.
    """
    if store is None:
        store = {}
    for lineno, obj in _read_jsonl(path):
        image_id = obj.get("image_id")
        channel = obj.get("channel")
        scores = obj.get("scores")
        if not isinstance(image_id, str) or not image_id:
            raise FormatError(f"{path}:{lineno}: image_id must be a non-empty string")
        if not isinstance(channel, str) or not channel:
            raise FormatError(f"{path}:{lineno}: channel must be a non-empty string")
        if not isinstance(scores, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)
            for v in scores
        ):
            raise FormatError(f"{path}:{lineno}: scores must be an array of finite numbers")
        by_channel = store.setdefault(image_id, {})
        if channel in by_channel:
            raise FormatError(
                f"{path}:{lineno}: duplicate scores for image {image_id!r} "
                f"channel {channel!r}"
            )
        by_channel[channel] = np.asarray(scores, dtype=np.float64)
    return store


def write_score_table(path: str | Path, records: Iterable[ScoreTableRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(
                json_line(
                    {
                        "image_id": rec.image_id,
                        "channel": rec.channel,
                        "scores": [float(v) for v in rec.scores],
                    },
                    precise=True,
                )
                + "\n"
            )


def validate_scores_against_captions(captions: list[CaptionRecord], store: ScoreStore) -> None:
    """Every stored channel must have exactly one score per caption."""
    counts = {rec.image_id: len(rec.captions) for rec in captions}
    for image_id, by_channel in store.items():
        expected = counts.get(image_id)
        if expected is None:
            continue  # extra images in a score table are harmless
        for channel, scores in by_channel.items():
            if len(scores) != expected:
                raise FormatError(
                    f"image {image_id!r} channel {channel!r}: "
                    f"{len(scores)} scores for {expected} captions"
                )


def json_line(value, precise: bool = False) -> str:
    """Compact JSON with pinned float formatting, so identical inputs give
    byte-identical output.

    Results files round to 9 significant digits; interchange files that
    feed later stages (score tables, config) use shortest round-trip
    floats instead, so a staged run sees bit-identical numbers.
    """
    out: list[str] = []
    _write_json(value, out, precise)
    return "".join(out)


def _write_json(value, out: list[str], precise: bool) -> None:
    if value is None:
        out.append("null")
    elif value is True:
        out.append("true")
    elif value is False:
        out.append("false")
    elif isinstance(value, str):
        out.append(json.dumps(value, ensure_ascii=False))
    elif isinstance(value, (int, np.integer)):
        out.append(str(int(value)))
    elif isinstance(value, (float, np.floating)):
        out.append(format_float_exact(float(value)) if precise else format_float(float(value)))
    elif isinstance(value, dict):
        out.append("{")
        for i, (key, val) in enumerate(value.items()):
            if i:
                out.append(",")
            out.append(json.dumps(str(key), ensure_ascii=False))
            out.append(":")
            _write_json(val, out, precise)
        out.append("}")
    elif isinstance(value, (list, tuple, np.ndarray)):
        out.append("[")
        for i, val in enumerate(value):
            if i:
                out.append(",")
            _write_json(val, out, precise)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(value)!r}")


def format_float(x: float) -> str:
    """9 significant digits; integral values keep a trailing '.0' so the
    JSON type stays a float."""
    if not math.isfinite(x):
        raise ValueError(f"non-finite value in output: {x}")
    text = format(x, ".9g")
    if "e" not in text and "E" not in text and "." not in text:
        text += ".0"
    return text


def format_float_exact(x: float) -> str:
    """Shortest string that parses back to the same float64."""
    if not math.isfinite(x):
        raise ValueError(f"non-finite value in output: {x}")
    return repr(x)


def write_results(results: Iterable, path: str | Path, verbosity: str = "minimal") -> None:
    """Line-delimited rank results.

    minimal: image_id, selected caption text, selected index.
    full: adds runner-up, reason, pool, fallback level, verdicts, word
    counts, and every score channel.
    """
    if verbosity not in ("minimal", "full"):
        raise ValueError(f"verbosity must be 'minimal' or 'full', got {verbosity!r}")
    with open(path, "w", encoding="utf-8") as fh:
        for res in results:
            fh.write(json_line(result_to_dict(res, verbosity)) + "\n")


def result_to_dict(res, verbosity: str = "minimal") -> dict:
    obj = {
        "image_id": res.image_id,
        "selected_caption": res.selected_caption,
        "selected_index": res.selected_index,
    }
    if verbosity == "full":
        obj["runner_up_index"] = res.runner_up_index
        obj["selection_reason"] = res.selection_reason.value
        obj["reference_pool"] = res.pool.reference_pool
        obj["fallback_level"] = res.pool.fallback_level.value
        obj["word_counts"] = res.word_counts
        obj["verdicts"] = [
            {
                "index": v.index,
                "passed_format": v.passed_format,
                "format_reasons": v.format_reasons,
                "passed_itm": v.passed_itm,
            }
            for v in res.verdicts
        ]
        obj["channels"] = {name: res.channels[name] for name in sorted(res.channels)}
    return obj


def read_results_minimal(path: str | Path) -> list[tuple[str, str]]:
    """(image_id, selected caption) pairs from a results file, accepting
    either verbosity level."""
    out = []
    seen: dict[str, int] = {}
    for lineno, obj in _read_jsonl(path):
        image_id = obj.get("image_id")
        caption = obj.get("selected_caption")
        if not isinstance(image_id, str) or not isinstance(caption, str):
            raise FormatError(f"{path}:{lineno}: expected image_id and selected_caption")
        if image_id in seen:
            raise FormatError(
                f"{path}:{lineno}: duplicate image_id {image_id!r} "
                f"(first seen on line {seen[image_id]})"
            )
        seen[image_id] = lineno
        out.append((image_id, caption))
    return out


def read_references(path: str | Path) -> dict[str, list[str]]:
    """One record per line: {"image_id": str, "references": [str, ...]}."""
    refs: dict[str, list[str]] = {}
    seen: dict[str, int] = {}
    for lineno, obj in _read_jsonl(path):
        image_id = obj.get("image_id")
        references = obj.get("references")
        if not isinstance(image_id, str) or not image_id:
            raise FormatError(f"{path}:{lineno}: image_id must be a non-empty string")
        if (
            not isinstance(references, list)
            or not references
            or not all(isinstance(r, str) for r in references)
        ):
            raise FormatError(
                f"{path}:{lineno}: references must be a non-empty array of strings"
            )
        if image_id in seen:
            raise FormatError(
                f"{path}:{lineno}: duplicate image_id {image_id!r} "
                f"(first seen on line {seen[image_id]})"
            )
        seen[image_id] = lineno
        refs[image_id] = references
    return refs
