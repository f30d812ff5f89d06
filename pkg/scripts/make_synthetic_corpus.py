#!/usr/bin/env python3
"""Generate a synthetic ranking corpus (captions, score channels, ITM,
references, optional embedding files) for demos and benchmarks.

Example:
    python scripts/make_synthetic_corpus.py --images 50 --captions 20 \
        --out-dir demo_corpus --embeddings-dim 16
Then:
    caprank rank --captions demo_corpus/captions.jsonl \
        --scores demo_corpus/scores.jsonl --itm-scores demo_corpus/itm.jsonl \
        --out demo_corpus/results.jsonl
"""

import argparse
import json
from pathlib import Path

import corpusgen


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--images", type=int, default=50)
    parser.add_argument("--captions", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out-dir", required=True)
    parser.add_argument("--embeddings-dim", type=int, default=0,
                        help="also write binary embedding files at this dim")
    parser.add_argument("--no-junk", action="store_true",
                        help="skip the malformed junk-caption clusters")
    args = parser.parse_args()

    images = corpusgen.generate(
        args.images, args.captions, seed=args.seed, junk_cluster=not args.no_junk
    )
    out_dir = Path(args.out_dir)
    corpusgen.write_files(images, out_dir, embeddings_dim=args.embeddings_dim)
    plants = {img["image_id"]: img["plant_index"] for img in images}
    (out_dir / "plants.json").write_text(json.dumps(plants, indent=0), encoding="utf-8")
    print(f"wrote {args.images} images x {args.captions} captions to {out_dir}/")


if __name__ == "__main__":
    main()
