"""Sentence-level BLEU and ROUGE-n for report text."""

from __future__ import annotations

import math
import re
from collections import Counter
from typing import Sequence

from brainrg.errors import DegenerateReference, EmptyInput

BLEU1_WEIGHTS = (1.0, 0.0, 0.0, 0.0)
BLEU4_WEIGHTS = (0.0, 0.0, 0.0, 1.0)
UNIFORM_WEIGHTS = (0.25, 0.25, 0.25, 0.25)

_NON_ALNUM = re.compile(r"[^a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase, map every run of non ``[a-z0-9]`` characters to a space, split."""
    return _NON_ALNUM.sub(" ", text.lower()).split()


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _closest_ref_length(c: int, refs: Sequence[Sequence[str]]) -> int:
    return min((len(r) for r in refs), key=lambda r: (abs(r - c), r))


def bleu(candidate: Sequence[str], references: Sequence[Sequence[str]], weights=BLEU1_WEIGHTS, smooth: bool = False) -> float:
    """Sentence BLEU with clipped n-gram precisions and brevity penalty.

    Without smoothing, a zero precision at any order with positive weight
    gives a score of 0. ``smooth=True`` uses add-one counts on every order.
    """
    refs = [list(r) for r in references if len(r) > 0]
    if not candidate or not refs:
        raise EmptyInput("BLEU needs a nonempty candidate and at least one nonempty reference")
    if any(w < 0 for w in weights) or not math.isclose(sum(weights), 1.0, abs_tol=1e-9):
        raise ValueError(f"weights must be non-negative and sum to 1, got {weights}")
    log_sum = 0.0
    for n, w in enumerate(weights, start=1):
        if w == 0:
            continue
        cand = ngrams(candidate, n)
        max_ref: Counter = Counter()
        for r in refs:
            max_ref |= ngrams(r, n)
        matched = sum(min(c, max_ref[g]) for g, c in cand.items())
        total = sum(cand.values())
        if smooth:
            matched, total = matched + 1, total + 1
        if matched == 0 or total == 0:
            return 0.0
        log_sum += w * math.log(matched / total)
    c = len(candidate)
    r = _closest_ref_length(c, refs)
    bp = 1.0 if c > r else math.exp(1.0 - r / c)
    return bp * math.exp(log_sum)


def rouge_n(candidate: Sequence[str], references: Sequence[Sequence[str]], n: int = 1) -> float:
    """Recall of reference n-grams (clipped), averaged over references."""
    if not references:
        raise EmptyInput("ROUGE needs at least one reference")
    cand = ngrams(candidate, n)
    scores = []
    for ref in references:
        grams = ngrams(ref, n)
        total = sum(grams.values())
        if total == 0:
            raise DegenerateReference(f"reference shorter than n={n}")
        scores.append(sum(min(c, cand[g]) for g, c in grams.items()) / total)
    return sum(scores) / len(scores)
