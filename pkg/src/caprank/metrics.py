"""Reference-based captioning metrics: CIDEr-D, corpus BLEU, ROUGE-L.

Enough of the challenge's metric set to rerun ablations on desk-scale
corpora with known references. METEOR and SPICE need external linguistic
resources and are reported as unavailable, never fabricated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .consensus import ConsensusConfig, DocumentFrequencies, cider_d
from .textproc import profile, tokenize

ROUGE_BETA = 1.2


@dataclass
class EvalItem:
    image_id: str
    candidate: str
    references: list[str]


@dataclass
class MetricReport:
    cider: float
    bleu: list[float]  # BLEU-1..4
    bleu_avg: float
    rouge_l: float
    per_image: dict[str, dict[str, float]] | None = None


def _check_corpus(corpus: list[EvalItem]) -> None:
    if not corpus:
        raise ValueError("evaluation corpus is empty")
    seen = set()
    for item in corpus:
        if item.image_id in seen:
            raise ValueError(f"duplicate image_id in corpus: {item.image_id!r}")
        seen.add(item.image_id)
        if not item.references:
            raise ValueError(f"image {item.image_id!r} has no references")


def corpus_df(corpus: list[EvalItem], cfg: ConsensusConfig) -> DocumentFrequencies:
    """Document = one image's reference set: an n-gram's df is the number
    of images whose references mention it, N is the image count."""
    df_by_n: dict[int, dict] = {n: {} for n in range(1, cfg.n_max + 1)}
    for item in corpus:
        seen_by_n: dict[int, set] = {n: set() for n in range(1, cfg.n_max + 1)}
        for ref in item.references:
            prof = profile(ref, cfg.n_max)
            for n, counts in prof.counts_by_n.items():
                seen_by_n[n].update(counts)
        for n, grams in seen_by_n.items():
            table = df_by_n[n]
            for gram in grams:
                table[gram] = table.get(gram, 0) + 1
    return DocumentFrequencies(df_by_n=df_by_n, pool_size=len(corpus))


def eval_cider(
    corpus: list[EvalItem],
    cfg: ConsensusConfig = ConsensusConfig(),
    per_image: dict[str, float] | None = None,
) -> float:
    """Mean CIDEr-D over the corpus; 10.0 is a perfect score at the
    default x10 scale."""
    _check_corpus(corpus)
    df = corpus_df(corpus, cfg)
    total = 0.0
    for item in corpus:
        cand = profile(item.candidate, cfg.n_max)
        refs = [profile(ref, cfg.n_max) for ref in item.references]
        score = cider_d(cand, refs, df, cfg)
        if per_image is not None:
            per_image[item.image_id] = score
        total += score
    return total / len(corpus)


def eval_bleu(corpus: list[EvalItem], n: int) -> float:
    """Corpus-level BLEU-n: clipped modified precision summed over the
    corpus, geometric mean of orders 1..n, brevity penalty from the
    closest reference length (ties toward the shorter). No smoothing:
    a zero precision at any order zeroes the score."""
    if not 1 <= n <= 4:
        raise ValueError(f"BLEU order must be in 1..4, got {n}")
    _check_corpus(corpus)

    clipped = [0] * n
    totals = [0] * n
    cand_len_total = 0
    ref_len_total = 0
    for item in corpus:
        cand_tokens = tokenize(item.candidate)
        ref_profiles = [profile(ref, n) for ref in item.references]
        cand_prof = profile(item.candidate, n)

        c_len = len(cand_tokens)
        cand_len_total += c_len
        ref_lens = [p.token_length for p in ref_profiles]
        # Closest reference length; a tie goes to the shorter reference.
        ref_len_total += min(ref_lens, key=lambda r: (abs(r - c_len), r))

        for k in range(1, n + 1):
            max_ref: dict = {}
            for p in ref_profiles:
                for gram, count in p.level(k).items():
                    if count > max_ref.get(gram, 0):
                        max_ref[gram] = count
            for gram, count in cand_prof.level(k).items():
                clipped[k - 1] += min(count, max_ref.get(gram, 0))
            totals[k - 1] += max(0, c_len - k + 1)

    log_sum = 0.0
    for k in range(n):
        if totals[k] == 0 or clipped[k] == 0:
            return 0.0
        log_sum += np.log(clipped[k] / totals[k])
    precision_mean = float(np.exp(log_sum / n))

    if cand_len_total == 0:
        return 0.0
    if cand_len_total < ref_len_total:
        bp = float(np.exp(1.0 - ref_len_total / cand_len_total))
    else:
        bp = 1.0
    return bp * precision_mean


def lcs_length(a: list[str], b: list[str]) -> int:
    """Longest common subsequence length, O(len(a)*len(b))."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            if x == y:
                cur[j] = prev[j - 1] + 1
            else:
                cur[j] = max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]


def _rouge_l_item(candidate: str, references: list[str]) -> float:
    cand = tokenize(candidate)
    if not cand:
        return 0.0
    best = 0.0
    beta_sq = ROUGE_BETA * ROUGE_BETA
    for reference in references:
        ref = tokenize(reference)
        lcs = lcs_length(cand, ref)
        if lcs == 0:
            continue
        prec = lcs / len(cand)
        rec = lcs / len(ref)
        f = (1 + beta_sq) * prec * rec / (rec + beta_sq * prec)
        best = max(best, f)
    return best


def eval_rouge_l(corpus: list[EvalItem], per_image: dict[str, float] | None = None) -> float:
    """Mean over images of the best LCS F-measure against any reference."""
    _check_corpus(corpus)
    total = 0.0
    for item in corpus:
        score = _rouge_l_item(item.candidate, item.references)
        if per_image is not None:
            per_image[item.image_id] = score
        total += score
    return total / len(corpus)


def evaluate(
    corpus: list[EvalItem],
    cfg: ConsensusConfig = ConsensusConfig(),
    with_per_image: bool = False,
) -> MetricReport:
    """All metrics in one report; bleu_avg is the arithmetic mean of
    BLEU-1..4."""
    _check_corpus(corpus)
    per_cider: dict[str, float] | None = {} if with_per_image else None
    per_rouge: dict[str, float] | None = {} if with_per_image else None
    cider = eval_cider(corpus, cfg, per_image=per_cider)
    bleu = [eval_bleu(corpus, k) for k in range(1, 5)]
    rouge = eval_rouge_l(corpus, per_image=per_rouge)
    per_image = None
    if with_per_image:
        per_image = {
            item.image_id: {"cider": per_cider[item.image_id], "rouge_l": per_rouge[item.image_id]}
            for item in corpus
        }
    return MetricReport(
        cider=cider,
        bleu=bleu,
        bleu_avg=sum(bleu) / 4.0,
        rouge_l=rouge,
        per_image=per_image,
    )


def format_report(report: MetricReport) -> str:
    """Fixed field order, 4-decimal formatting; deterministic bytes."""
    lines = [
        f"cider: {report.cider:.4f}",
        f"bleu_1: {report.bleu[0]:.4f}",
        f"bleu_2: {report.bleu[1]:.4f}",
        f"bleu_3: {report.bleu[2]:.4f}",
        f"bleu_4: {report.bleu[3]:.4f}",
        f"bleu_avg: {report.bleu_avg:.4f}",
        f"rouge_l: {report.rouge_l:.4f}",
        "meteor: unavailable",
        "spice: unavailable",
    ]
    if report.per_image is not None:
        for image_id in report.per_image:
            row = report.per_image[image_id]
            lines.append(f"image {image_id} cider: {row['cider']:.4f} rouge_l: {row['rouge_l']:.4f}")
    return "\n".join(lines) + "\n"
