"""Character error rate via Levenshtein distance."""

from __future__ import annotations

from typing import Sequence

from ..errors import DomainError


def edit_distance(reference: Sequence, hypothesis: Sequence) -> int:
    """Minimum number of substitutions, deletions and insertions turning ``reference`` into ``hypothesis``."""
    if len(reference) < len(hypothesis):
        reference, hypothesis = hypothesis, reference
    prev = list(range(len(hypothesis) + 1))
    for i, r in enumerate(reference, 1):
        cur = [i] + [0] * len(hypothesis)
        for j, h in enumerate(hypothesis, 1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (r != h))
        prev = cur
    return prev[-1]


def cer(reference: Sequence, hypothesis: Sequence) -> float:
    """(S + D + I) / len(reference). Can exceed 1 with many insertions."""
    if len(reference) == 0:
        raise DomainError("empty reference")
    return edit_distance(reference, hypothesis) / len(reference)
