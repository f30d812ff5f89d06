"""Shared synthetic-corpus generator for the experiment scripts.

Every image gets a planted best caption, unique paraphrases around it,
off-topic noise, and (optionally) a cluster of identical malformed junk
captions whose mutual agreement misleads unfiltered consensus scoring.
"""

import json

import numpy as np

from caprank.io_formats import (
    CaptionRecord,
    ScoreTableRecord,
    write_captions,
    write_embeddings,
    write_score_table,
)

NOUNS = [
    "dog", "cat", "horse", "man", "woman", "child", "car", "boat", "bird",
    "tree", "house", "ball", "bike", "train", "kite", "bench", "flower",
    "river", "mountain", "street",
]
VERBS = [
    "rides", "walks", "jumps", "holds", "watches", "chases", "carries",
    "pulls", "touches", "passes", "crosses", "climbs", "follows", "paints",
]
ADJS = [
    "red", "blue", "small", "large", "old", "young", "bright", "quiet",
    "muddy", "shiny", "tall", "happy",
]
PLACES = [
    "park", "beach", "field", "road", "kitchen", "garden", "market",
    "station", "bridge", "forest",
]
FILLERS = [
    "slowly", "quietly", "today", "gently", "swiftly", "carefully",
    "proudly", "calmly", "boldly", "neatly", "barely", "eagerly",
    "warmly", "softly", "briskly", "keenly", "plainly", "sharply",
    "smoothly", "steadily",
]
JUNK_PHRASES = [
    "nice. very nice. so nice. extra words here",
    "photo, image, picture, snapshot, caption of things",
    "wow great pic",
    "a thing. another thing. more things. words",
    "good, fine, okay, sure, yes words here",
]


def _caption_words(caption):
    return set(caption.lower().replace(".", " ").replace(",", " ").split())


def generate(n_images, n_captions, seed=0, channel_names=("alpha", "beta", "gamma"),
             junk_cluster=True, noise_scale=0.15):
    rng = np.random.default_rng(seed)
    images = []
    for img_idx in range(n_images):
        adj, noun, verb = rng.choice(ADJS), rng.choice(NOUNS), rng.choice(VERBS)
        noun2, place = rng.choice(NOUNS), rng.choice(PLACES)
        plant = f"a {adj} {noun} {verb} the {noun2} in the {place}"
        captions = [plant]
        n_junk = max(2, n_captions // 3) if junk_cluster else 0
        n_noise = max(1, n_captions // 6)
        n_good = n_captions - 1 - n_junk - n_noise
        for k in range(n_good):
            filler = FILLERS[k % len(FILLERS)]
            if k >= len(FILLERS):
                filler = f"{filler} {FILLERS[(k * 7 + 3) % len(FILLERS)]}"
            variants = [
                f"a {adj} {noun} {verb} the {noun2} in the {place} {filler}",
                f"the {adj} {noun} {verb} a {noun2} in the {place} {filler}",
                f"a {adj} {noun} {verb} the {noun2} near the {filler} {place}",
                f"one {filler} {adj} {noun} {verb} the {noun2} in the {place}",
            ]
            captions.append(variants[k % len(variants)])
        for _ in range(n_noise):
            captions.append(
                f"some {rng.choice(ADJS)} {rng.choice(NOUNS)} {rng.choice(VERBS)} "
                f"a {rng.choice(NOUNS)} by the {rng.choice(PLACES)}"
            )
        junk = JUNK_PHRASES[int(rng.integers(len(JUNK_PHRASES)))]
        captions.extend([junk] * n_junk)

        order = rng.permutation(len(captions))
        captions = [captions[i] for i in order]
        plant_index = int(np.where(order == 0)[0][0])

        theme_words = _caption_words(plant)
        alignment = np.array(
            [
                len(theme_words & _caption_words(c)) / max(len(_caption_words(c)), 1)
                for c in captions
            ]
        )
        channels = {
            name: alignment + noise_scale * rng.standard_normal(len(captions))
            for name in channel_names
        }
        itm = alignment + noise_scale * rng.standard_normal(len(captions))
        itm[[i for i, c in enumerate(captions) if c == junk]] -= 1.0

        images.append(
            {
                "image_id": f"img{img_idx:05d}",
                "captions": captions,
                "channels": channels,
                "itm": itm,
                "plant_index": plant_index,
            }
        )
    return images


def write_files(images, out_dir, embeddings_dim=0, seed=99):
    """Write captions/scores/itm (+ optional embeddings) for a corpus."""
    out_dir.mkdir(parents=True, exist_ok=True)
    write_captions(
        out_dir / "captions.jsonl",
        [CaptionRecord(img["image_id"], img["captions"]) for img in images],
    )
    records = []
    for img in images:
        for name in sorted(img["channels"]):
            records.append(ScoreTableRecord(img["image_id"], name, img["channels"][name]))
    write_score_table(out_dir / "scores.jsonl", records)
    write_score_table(
        out_dir / "itm.jsonl",
        [ScoreTableRecord(img["image_id"], "itm", img["itm"]) for img in images],
    )
    lines = []
    for img in images:
        plant = img["captions"][img["plant_index"]]
        lines.append(json.dumps({"image_id": img["image_id"], "references": [plant]}))
    (out_dir / "references.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")

    if embeddings_dim:
        rng = np.random.default_rng(seed)
        emb_dir = out_dir / "embeddings"
        emb_dir.mkdir(exist_ok=True)
        for channel in sorted(images[0]["channels"]):
            image_rows, image_ids, caption_rows, caption_ids = [], [], [], []
            for img in images:
                vec = rng.standard_normal(embeddings_dim)
                image_rows.append(vec)
                image_ids.append(img["image_id"])
                theme = _caption_words(img["captions"][img["plant_index"]])
                for k, caption in enumerate(img["captions"]):
                    align = len(theme & _caption_words(caption)) / max(
                        len(_caption_words(caption)), 1
                    )
                    caption_rows.append(align * vec + 0.6 * rng.standard_normal(embeddings_dim))
                    caption_ids.append((img["image_id"], k))
            write_embeddings(
                emb_dir / f"{channel}.images.emb",
                emb_dir / f"{channel}.images.idx",
                np.array(image_rows, dtype=np.float32),
                image_ids,
            )
            write_embeddings(
                emb_dir / f"{channel}.captions.emb",
                emb_dir / f"{channel}.captions.idx",
                np.array(caption_rows, dtype=np.float32),
                caption_ids,
            )
