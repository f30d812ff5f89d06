"""Command-line entry point.

Subcommands expose each pipeline stage (clipscore, consensus, filter) and
the end-to-end run (rank), plus the metric harness (eval). Stage outputs
are ordinary score-table / verdict files, so piping them back into
``rank --scores`` reproduces the monolithic run byte-for-byte.

Exit codes: 0 success, 1 I/O failure, 2 validation failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import io_formats
from .consensus import ConsensusConfig, consensus_scores
from .filtering import build_reference_pool
from .io_formats import (
    CaptionRecord,
    FormatError,
    ScoreStore,
    ScoreTableRecord,
    json_line,
)
from .metrics import EvalItem, evaluate, format_report
from .pipeline import (
    CombinationWeights,
    ImageInputs,
    NormalizationScope,
    PipelineConfig,
    SelectFrom,
    SelectionConfig,
    rank_corpus,
)
from .similarity import cosine_rows
from .textproc import profile

THREADS_ENV = "CAPRANK_THREADS"

# Channel names with fixed roles; everything else is an ensemble channel.
ITM_CHANNEL = "itm"
CONSENSUS_CHANNEL = "consensus"


@dataclass
class RunConfig:
    """All tunables of a run; defaults are the full method: filters on,
    3.52:1 weighting, theta 0.39, keep the top half by ITM."""

    lambda_ensemble: float = 3.52
    lambda_consensus: float = 1.0
    theta: float = 0.39
    keep_fraction: float = 0.5
    n_max: int = 4
    sigma: float = 6.0
    scale: float = 10.0
    select_from: str = "all"
    normalization_scope: str = "per_image"
    format_filter: bool = True
    itm_filter: bool = True
    short_caption: bool = True
    threads: int = 1
    verbosity: str = "minimal"

    def to_pipeline_config(self) -> PipelineConfig:
        return PipelineConfig(
            weights=CombinationWeights(self.lambda_ensemble, self.lambda_consensus),
            sel_cfg=SelectionConfig(
                theta=self.theta,
                select_from=SelectFrom(self.select_from),
                short_caption_enabled=self.short_caption,
            ),
            cons_cfg=ConsensusConfig(n_max=self.n_max, sigma=self.sigma, scale=self.scale),
            keep_fraction=self.keep_fraction,
            format_filter_enabled=self.format_filter,
            itm_filter_enabled=self.itm_filter,
            normalization_scope=NormalizationScope(self.normalization_scope),
            threads=self.threads,
        )

    def consensus_config(self) -> ConsensusConfig:
        return ConsensusConfig(n_max=self.n_max, sigma=self.sigma, scale=self.scale)

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json_line(asdict(self), precise=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        import json

        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise FormatError(f"{path}: unknown config keys: {sorted(unknown)}")
        return cls(**obj)


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """defaults < --config file < explicit flags."""
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    for f in fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            setattr(cfg, f.name, value)
    if cfg.threads < 1:
        raise FormatError(f"threads must be >= 1, got {cfg.threads}")
    if not 0.0 < cfg.keep_fraction <= 1.0:
        raise FormatError(f"keep_fraction must be in (0, 1], got {cfg.keep_fraction}")
    cfg.to_pipeline_config()  # range validation lives in the owning dataclasses
    return cfg


def _env_threads() -> int | None:
    raw = os.environ.get(THREADS_ENV, "")
    try:
        return int(raw) if raw else None
    except ValueError:
        return None


def add_tunables(parser: argparse.ArgumentParser, *, full: bool = True) -> None:
    parser.add_argument("--config", help="JSON config file; explicit flags override it")
    parser.add_argument("--keep-fraction", type=float, dest="keep_fraction")
    parser.add_argument("--n-max", type=int, dest="n_max")
    parser.add_argument("--sigma", type=float, dest="sigma")
    parser.add_argument("--scale", type=float, dest="scale")
    parser.add_argument(
        "--no-format-filter", action="store_false", dest="format_filter", default=None
    )
    parser.add_argument(
        "--no-itm-filter", action="store_false", dest="itm_filter", default=None
    )
    if full:
        parser.add_argument("--lambda-ensemble", type=float, dest="lambda_ensemble")
        parser.add_argument("--lambda-consensus", type=float, dest="lambda_consensus")
        parser.add_argument("--theta", type=float, dest="theta")
        parser.add_argument(
            "--select-from", choices=["all", "filtered"], dest="select_from"
        )
        parser.add_argument(
            "--normalization-scope",
            choices=["per_image", "dataset"],
            dest="normalization_scope",
        )
        parser.add_argument(
            "--no-short-caption", action="store_false", dest="short_caption", default=None
        )
        parser.add_argument("--threads", type=int, default=_env_threads())
        parser.add_argument("--verbosity", choices=["minimal", "full"])


def load_channel_store(args: argparse.Namespace, captions: list[CaptionRecord]) -> ScoreStore:
    """Merge score-table files and/or cosine channels computed from
    embedding files into one per-image channel store."""
    store: ScoreStore = {}
    for path in args.scores or []:
        io_formats.read_score_table(path, store)
    for path in args.itm_scores or []:
        io_formats.read_score_table(path, store)
    if getattr(args, "embeddings_dir", None):
        compute_clip_channels(args.embeddings_dir, captions, store)
    io_formats.validate_scores_against_captions(captions, store)
    return store


def discover_embedding_channels(embeddings_dir: str | Path) -> list[str]:
    channels = []
    for path in sorted(Path(embeddings_dir).glob("*.images.emb")):
        channels.append(path.name[: -len(".images.emb")])
    if not channels:
        raise FormatError(f"{embeddings_dir}: no '<channel>.images.emb' files found")
    return channels


def compute_clip_channels(
    embeddings_dir: str | Path,
    captions: list[CaptionRecord],
    store: ScoreStore,
) -> None:
    """Cosine of each image embedding against its caption embeddings, one
    channel per backbone found in the directory."""
    base = Path(embeddings_dir)
    for channel in discover_embedding_channels(base):
        images = io_formats.read_embeddings(
            base / f"{channel}.images.emb", base / f"{channel}.images.idx", kind="image"
        )
        caps = io_formats.read_embeddings(
            base / f"{channel}.captions.emb", base / f"{channel}.captions.idx", kind="caption"
        )
        image_rows = {image_id: i for i, image_id in enumerate(images.ids)}
        caption_rows: dict[str, dict[int, int]] = {}
        for row, (image_id, caption_index) in enumerate(caps.ids):
            caption_rows.setdefault(image_id, {})[caption_index] = row

        for rec in captions:
            if rec.image_id not in image_rows:
                continue  # reported later as a missing channel
            by_index = caption_rows.get(rec.image_id)
            if by_index is None:
                continue
            n = len(rec.captions)
            if sorted(by_index) != list(range(n)):
                raise FormatError(
                    f"channel {channel!r}: caption embeddings for image "
                    f"{rec.image_id!r} do not cover indices 0..{n - 1}"
                )
            rows = caps.rows[[by_index[k] for k in range(n)]]
            scores = cosine_rows(images.rows[image_rows[rec.image_id]], rows)
            by_channel = store.setdefault(rec.image_id, {})
            if channel in by_channel:
                raise FormatError(
                    f"channel {channel!r} for image {rec.image_id!r} supplied twice"
                )
            by_channel[channel] = scores


def build_image_inputs(captions: list[CaptionRecord], store: ScoreStore) -> list[ImageInputs]:
    """Split the channel store into clip channels / itm / precomputed
    consensus, and fail with the full image list if any clip channel is
    missing somewhere."""
    clip_names = sorted(
        {
            name
            for rec in captions
            for name in store.get(rec.image_id, {})
            if name not in (ITM_CHANNEL, CONSENSUS_CHANNEL)
        }
    )
    if not clip_names:
        raise FormatError("no similarity channels: supply --embeddings-dir or --scores")
    missing: dict[str, list[str]] = {}
    inputs = []
    for rec in captions:
        by_channel = store.get(rec.image_id, {})
        for name in clip_names:
            if name not in by_channel:
                missing.setdefault(name, []).append(rec.image_id)
        inputs.append(
            ImageInputs(
                image_id=rec.image_id,
                captions=rec.captions,
                clip_channels={n: by_channel[n] for n in clip_names if n in by_channel},
                itm=by_channel.get(ITM_CHANNEL),
                precomputed_consensus=by_channel.get(CONSENSUS_CHANNEL),
            )
        )
    if missing:
        detail = "; ".join(
            f"channel {name!r} missing for images {ids}" for name, ids in sorted(missing.items())
        )
        raise FormatError(detail)
    return inputs


def cmd_rank(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    captions = io_formats.read_captions(args.captions)
    store = load_channel_store(args, captions)
    inputs = build_image_inputs(captions, store)
    results = rank_corpus(inputs, cfg.to_pipeline_config())
    io_formats.write_results(results, args.out, cfg.verbosity)
    config_path = args.out_config or (str(args.out) + ".config.json")
    cfg.dump(config_path)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    selected = io_formats.read_results_minimal(args.selected)
    references = io_formats.read_references(args.references)
    missing = [image_id for image_id, _ in selected if image_id not in references]
    if missing:
        raise FormatError(f"images missing from references: {missing}")
    corpus = [
        EvalItem(image_id=image_id, candidate=caption, references=references[image_id])
        for image_id, caption in selected
    ]
    cons_cfg = ConsensusConfig(
        n_max=args.n_max if args.n_max is not None else 4,
        sigma=args.sigma if args.sigma is not None else 6.0,
        scale=args.scale if args.scale is not None else 10.0,
    )
    report = evaluate(corpus, cons_cfg, with_per_image=args.per_image)
    text = format_report(report)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_filter(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    captions = io_formats.read_captions(args.captions)
    store: ScoreStore = {}
    for path in args.itm_scores or []:
        io_formats.read_score_table(path, store)
    io_formats.validate_scores_against_captions(captions, store)
    with open(args.out, "w", encoding="utf-8") as fh:
        for rec in captions:
            itm = store.get(rec.image_id, {}).get(ITM_CHANNEL)
            pool, verdicts = build_reference_pool(
                rec.captions,
                itm,
                cfg.keep_fraction,
                format_filter_enabled=cfg.format_filter,
                itm_filter_enabled=cfg.itm_filter,
            )
            fh.write(
                json_line(
                    {
                        "image_id": rec.image_id,
                        "reference_pool": pool.reference_pool,
                        "fallback_level": pool.fallback_level.value,
                        "verdicts": [
                            {
                                "index": v.index,
                                "passed_format": v.passed_format,
                                "format_reasons": v.format_reasons,
                                "passed_itm": v.passed_itm,
                            }
                            for v in verdicts
                        ],
                    }
                )
                + "\n"
            )
    return 0


def cmd_consensus(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    cons_cfg = cfg.consensus_config()
    captions = io_formats.read_captions(args.captions)
    store: ScoreStore = {}
    for path in args.itm_scores or []:
        io_formats.read_score_table(path, store)
    io_formats.validate_scores_against_captions(captions, store)
    with open(args.out, "w", encoding="utf-8") as fh:
        for rec in captions:
            itm = store.get(rec.image_id, {}).get(ITM_CHANNEL)
            pool, _ = build_reference_pool(
                rec.captions,
                itm,
                cfg.keep_fraction,
                format_filter_enabled=cfg.format_filter,
                itm_filter_enabled=cfg.itm_filter,
            )
            profiles = [profile(raw, cons_cfg.n_max) for raw in rec.captions]
            scores = consensus_scores(profiles, pool.reference_pool, cons_cfg)
            fh.write(
                json_line(
                    {
                        "image_id": rec.image_id,
                        "channel": CONSENSUS_CHANNEL,
                        "scores": scores,
                    },
                    precise=True,
                )
                + "\n"
            )
    return 0


def cmd_clipscore(args: argparse.Namespace) -> int:
    captions = io_formats.read_captions(args.captions)
    store: ScoreStore = {}
    compute_clip_channels(args.embeddings_dir, captions, store)
    records = []
    for rec in captions:
        by_channel = store.get(rec.image_id, {})
        for channel in sorted(by_channel):
            records.append(
                ScoreTableRecord(
                    image_id=rec.image_id, channel=channel, scores=by_channel[channel]
                )
            )
    io_formats.write_score_table(args.out, records)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="caprank",
        description="Caption re-ranking: ensembled similarity + pool consensus",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_rank = sub.add_parser("rank", help="end-to-end ranking run")
    p_rank.add_argument("--captions", required=True)
    p_rank.add_argument("--embeddings-dir", dest="embeddings_dir")
    p_rank.add_argument("--scores", action="append", help="score-table file (repeatable)")
    p_rank.add_argument("--itm-scores", action="append", dest="itm_scores")
    p_rank.add_argument("--out", required=True)
    p_rank.add_argument("--out-config", dest="out_config")
    add_tunables(p_rank)
    p_rank.set_defaults(func=cmd_rank)

    p_eval = sub.add_parser("eval", help="score selections against references")
    p_eval.add_argument("--selected", required=True)
    p_eval.add_argument("--references", required=True)
    p_eval.add_argument("--out")
    p_eval.add_argument("--per-image", action="store_true", dest="per_image")
    p_eval.add_argument("--n-max", type=int, dest="n_max")
    p_eval.add_argument("--sigma", type=float, dest="sigma")
    p_eval.add_argument("--scale", type=float, dest="scale")
    p_eval.set_defaults(func=cmd_eval)

    p_filter = sub.add_parser("filter", help="emit filter verdicts and reference pools")
    p_filter.add_argument("--captions", required=True)
    p_filter.add_argument("--itm-scores", action="append", dest="itm_scores")
    p_filter.add_argument("--out", required=True)
    add_tunables(p_filter, full=False)
    p_filter.set_defaults(func=cmd_filter)

    p_cons = sub.add_parser("consensus", help="emit the consensus score channel")
    p_cons.add_argument("--captions", required=True)
    p_cons.add_argument("--itm-scores", action="append", dest="itm_scores")
    p_cons.add_argument("--out", required=True)
    add_tunables(p_cons, full=False)
    p_cons.set_defaults(func=cmd_consensus)

    p_clip = sub.add_parser("clipscore", help="cosine channels from embedding files")
    p_clip.add_argument("--captions", required=True)
    p_clip.add_argument("--embeddings-dir", dest="embeddings_dir", required=True)
    p_clip.add_argument("--out", required=True)
    p_clip.set_defaults(func=cmd_clipscore)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
