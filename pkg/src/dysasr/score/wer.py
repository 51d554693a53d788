"""
Word error rate by minimum edit distance.
"""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EditCounts:
    subs: int
    dels: int
    ins: int
    ref_len: int

    @property
    def errors(self) -> int:
        return self.subs + self.dels + self.ins

    @property
    def wer(self) -> float:
        """Percent; an empty reference counts each insertion as 100%."""
        if self.ref_len == 0:
            return 100.0 * self.ins
        return 100.0 * self.errors / self.ref_len


def edit_distance_wer(ref: Sequence[str], hyp: Sequence[str]) -> EditCounts:
    """
    Minimal-edit alignment of ``hyp`` against ``ref``.

    Among alignments with the fewest edits, substitutions are preferred
    over deletion/insertion pairs.
    """
    n, m = len(ref), len(hyp)
    cost = np.zeros((n + 1, m + 1), dtype=np.int64)
    cost[:, 0] = np.arange(n + 1)
    cost[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            diag = cost[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1])
            cost[i, j] = min(diag, cost[i - 1, j] + 1, cost[i, j - 1] + 1)

    subs = dels = ins = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and cost[i, j] == cost[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1]):
            subs += int(ref[i - 1] != hyp[j - 1])
            i, j = i - 1, j - 1
        elif i > 0 and cost[i, j] == cost[i - 1, j] + 1:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return EditCounts(subs=subs, dels=dels, ins=ins, ref_len=n)


def tokenize_words(text: str) -> tuple[str, ...]:
    return tuple(text.split())


def tokenize_chars(text: str) -> tuple[str, ...]:
    """Characters without whitespace, for character error rates."""
    return tuple(ch for ch in text if not ch.isspace())
