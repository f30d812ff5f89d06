#!/usr/bin/env python3
"""Time an end-to-end rank over a bulk synthetic corpus.

Defaults match the performance envelope: 20,000 images x 60 captions with
precomputed score channels, single-threaded.
"""

import argparse
import resource
import tempfile
import time
from pathlib import Path

import numpy as np

from caprank.cli import main as caprank_main
from caprank.io_formats import json_line

import corpusgen

VOCAB = np.array(
    corpusgen.NOUNS + corpusgen.VERBS + corpusgen.ADJS + corpusgen.PLACES
    + ["with", "near", "under", "over", "beside", "behind"]
)


def write_bulk_corpus(n_images, n_captions, out_dir, seed=0, n_channels=5):
    rng = np.random.default_rng(seed)
    total = n_images * n_captions
    max_len = 12
    themes = rng.integers(0, len(VOCAB), size=(n_images, 8))
    lengths = rng.integers(5, max_len + 1, size=total)
    theme_pick = themes[np.repeat(np.arange(n_images), n_captions)][
        np.arange(total)[:, None], rng.integers(0, 8, size=(total, max_len))
    ]
    global_pick = rng.integers(0, len(VOCAB), size=(total, max_len))
    token_idx = np.where(rng.random((total, max_len)) < 0.8, theme_pick, global_pick)

    with open(out_dir / "captions.jsonl", "w", encoding="utf-8") as fh:
        row = 0
        for i in range(n_images):
            captions = []
            for _ in range(n_captions):
                captions.append(" ".join(VOCAB[token_idx[row, : lengths[row]]]))
                row += 1
            fh.write(json_line({"image_id": f"img{i:05d}", "captions": captions}) + "\n")

    with open(out_dir / "scores.jsonl", "w", encoding="utf-8") as fh:
        for i in range(n_images):
            block = rng.standard_normal((n_channels, n_captions))
            for j in range(n_channels):
                fh.write(
                    json_line(
                        {"image_id": f"img{i:05d}", "channel": f"model{j}",
                         "scores": block[j]},
                        precise=True,
                    )
                    + "\n"
                )

    with open(out_dir / "itm.jsonl", "w", encoding="utf-8") as fh:
        for i in range(n_images):
            fh.write(
                json_line(
                    {"image_id": f"img{i:05d}", "channel": "itm",
                     "scores": rng.standard_normal(n_captions)},
                    precise=True,
                )
                + "\n"
            )


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--images", type=int, default=20_000)
    parser.add_argument("--captions", type=int, default=60)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--seed", type=int, default=123)
    parser.add_argument("--keep-dir", help="write corpus here instead of a temp dir")
    args = parser.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        out_dir = Path(args.keep_dir) if args.keep_dir else Path(tmp)
        out_dir.mkdir(parents=True, exist_ok=True)
        print(f"generating {args.images} x {args.captions} corpus ...")
        t0 = time.perf_counter()
        write_bulk_corpus(args.images, args.captions, out_dir, seed=args.seed)
        print(f"  generated in {time.perf_counter() - t0:.1f}s")

        print("ranking ...")
        t0 = time.perf_counter()
        code = caprank_main(
            ["rank",
             "--captions", str(out_dir / "captions.jsonl"),
             "--scores", str(out_dir / "scores.jsonl"),
             "--itm-scores", str(out_dir / "itm.jsonl"),
             "--out", str(out_dir / "results.jsonl"),
             "--threads", str(args.threads)]
        )
        elapsed = time.perf_counter() - t0
        peak = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024 / 1024
        print(f"  exit code {code}; {elapsed:.1f}s; peak rss {peak:.2f} GiB")
        print(f"  {args.images / elapsed:.0f} images/s")


if __name__ == "__main__":
    main()
