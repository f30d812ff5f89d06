#!/usr/bin/env python3
"""Run the ablation grid on a planted synthetic corpus and print a table:
selection accuracy against the plants plus reference-based metrics with
the plant as the sole reference.

Rows mirror the standard configurations: ensemble-only, consensus-only
with and without filtering, equal weighting, 3.52:1 weighting, and
3.52:1 plus the short-caption rule.
"""

import argparse

from caprank.consensus import ConsensusConfig
from caprank.metrics import EvalItem, evaluate
from caprank.pipeline import CombinationWeights, SelectionConfig, rank_image

import corpusgen

CONFIGS = [
    ("(a) ensemble only", dict(weights=CombinationWeights(1.0, 0.0),
                               sel_cfg=SelectionConfig(theta=0.0))),
    ("(b) consensus only", dict(weights=CombinationWeights(0.0, 1.0),
                                sel_cfg=SelectionConfig(theta=0.0))),
    ("(e) consensus only, no filters", dict(weights=CombinationWeights(0.0, 1.0),
                                            sel_cfg=SelectionConfig(theta=0.0),
                                            format_filter_enabled=False,
                                            itm_filter_enabled=False)),
    ("(c) combined 1:1", dict(weights=CombinationWeights(1.0, 1.0),
                              sel_cfg=SelectionConfig(theta=0.0))),
    ("(d) combined 3.52:1", dict(weights=CombinationWeights(3.52, 1.0),
                                 sel_cfg=SelectionConfig(theta=0.0))),
    ("(f) combined 3.52:1 + short cap", dict(weights=CombinationWeights(3.52, 1.0),
                                             sel_cfg=SelectionConfig(theta=0.39))),
]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--images", type=int, default=200)
    parser.add_argument("--captions", type=int, default=15)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    images = corpusgen.generate(args.images, args.captions, seed=args.seed)
    print(f"{args.images} images x {args.captions} captions, seed {args.seed}\n")
    header = f"{'configuration':36s} {'acc':>6s} {'cider':>7s} {'bleu_avg':>8s} {'rouge_l':>8s}"
    print(header)
    print("-" * len(header))
    for label, kwargs in CONFIGS:
        hits = 0
        corpus = []
        for img in images:
            res = rank_image(
                img["image_id"], img["captions"], img["channels"], img["itm"], **kwargs
            )
            hits += res.selected_index == img["plant_index"]
            corpus.append(
                EvalItem(
                    img["image_id"],
                    res.selected_caption,
                    [img["captions"][img["plant_index"]]],
                )
            )
        report = evaluate(corpus, ConsensusConfig())
        print(
            f"{label:36s} {hits / len(images):6.3f} {report.cider:7.3f} "
            f"{report.bleu_avg:8.4f} {report.rouge_l:8.4f}"
        )


if __name__ == "__main__":
    main()
