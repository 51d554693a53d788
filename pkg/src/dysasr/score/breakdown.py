"""
Dysasr Scoring

Per-band and seen/unseen breakdowns, oracle WER over N-best lists and
significance tests between systems.
"""

import logging
import math
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest, norm

from dysasr.core.models import (
    GroupScore,
    ScoreReport,
    SeverityBand,
    SignificanceResult,
    SpeakerProfile,
)
from dysasr.score.wer import EditCounts, edit_distance_wer, tokenize_words

logger = logging.getLogger(__name__)

Tokenizer = Callable[[str], tuple[str, ...]]


@dataclass
class ScoredUtterance:
    """Reference and hypotheses of one test utterance, as text."""

    utt_id: str
    speaker_id: str
    reference: str
    hypothesis: str
    nbest: list[str] = field(default_factory=list)


def _group(counts: EditCounts) -> GroupScore:
    return GroupScore(
        utterances=1, words=counts.ref_len, subs=counts.subs, dels=counts.dels, ins=counts.ins
    )


def oracle_counts(
    nbest: Sequence[str], reference: str, tokenize: Tokenizer = tokenize_words
) -> EditCounts:
    """The hypothesis with the fewest errors; earlier ranks win ties."""
    if not nbest:
        raise ValueError("oracle scoring needs at least one hypothesis")
    ref = tokenize(reference)
    return min(
        (edit_distance_wer(ref, tokenize(h)) for h in nbest), key=lambda c: c.errors
    )


def oracle_wer(
    nbests: Mapping[str, Sequence[str]],
    refs: Mapping[str, str],
    tokenize: Tokenizer = tokenize_words,
) -> float:
    """Pooled WER % when every utterance is scored by its best N-best entry."""
    total = GroupScore()
    for utt_id, ref in refs.items():
        total = total.add(_group(oracle_counts(nbests[utt_id], ref, tokenize)))
    return total.wer


def group_breakdown(
    utterances: Iterable[ScoredUtterance],
    profiles: Mapping[str, SpeakerProfile],
    train_vocabulary: set[str],
    system: str = "system",
    tokenize: Tokenizer = tokenize_words,
) -> ScoreReport:
    """
    Pool error counts overall, per severity band and for seen/unseen words.

    An utterance is "seen" when every reference word occurs in
    ``train_vocabulary``. The oracle group is filled when every utterance
    carries an N-best list.

    Raises:
        KeyError: an utterance's speaker has no profile (and hence no band)
    """
    overall, seen, unseen = GroupScore(), GroupScore(), GroupScore()
    oracle: GroupScore | None = GroupScore()
    bands: dict[SeverityBand, GroupScore] = {}
    count = 0
    for utt in utterances:
        if utt.speaker_id not in profiles:
            raise KeyError(f"no band for speaker {utt.speaker_id} (utterance {utt.utt_id})")
        band = profiles[utt.speaker_id].band
        g = _group(edit_distance_wer(tokenize(utt.reference), tokenize(utt.hypothesis)))
        overall = overall.add(g)
        bands[band] = bands.get(band, GroupScore()).add(g)
        if all(w in train_vocabulary for w in utt.reference.split()):
            seen = seen.add(g)
        else:
            unseen = unseen.add(g)
        if oracle is not None and utt.nbest:
            oracle = oracle.add(_group(oracle_counts(utt.nbest, utt.reference, tokenize)))
        else:
            oracle = None
        count += 1
    order = list(SeverityBand)
    return ScoreReport(
        system=system,
        utterances=count,
        overall=overall,
        bands={b.value: bands[b] for b in sorted(bands, key=order.index)},
        seen=seen,
        unseen=unseen,
        oracle=oracle if count else None,
    )


def segment_errors(
    utterances: Iterable[ScoredUtterance], tokenize: Tokenizer = tokenize_words
) -> dict[str, int]:
    """Errors per segment; every utterance is one segment."""
    return {
        u.utt_id: edit_distance_wer(tokenize(u.reference), tokenize(u.hypothesis)).errors
        for u in utterances
    }


def mapsswe_test(
    errors_a: Sequence[float],
    errors_b: Sequence[float],
    alpha: float = 0.05,
    system_a: str = "A",
    system_b: str = "B",
) -> SignificanceResult:
    """
    Matched pairs segment error test.

    Z = mean(d) / (s_d / sqrt(n)) with d_i = errors_a[i] - errors_b[i] and
    s_d the sample standard deviation; two-sided against the standard
    normal. With zero variance the result is not significant when the mean
    difference is zero and significant otherwise.

    Raises:
        ValueError: unequal segment counts or fewer than two segments
    """
    a = np.asarray(errors_a, dtype=np.float64)
    b = np.asarray(errors_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"segment counts differ: {len(a)} vs {len(b)}")
    n = len(a)
    if n < 2:
        raise ValueError(f"need at least two segments, got {n}")
    d = a - b
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        z = 0.0 if mean == 0.0 else math.copysign(math.inf, mean)
    else:
        z = mean / (sd / math.sqrt(n))
    p_value = float(2.0 * norm.sf(abs(z)))
    return SignificanceResult(
        system_a=system_a,
        system_b=system_b,
        n_segments=n,
        mean_difference=mean,
        z=z,
        p_value=p_value,
        alpha=alpha,
        significant=bool(abs(z) > norm.ppf(1.0 - alpha / 2.0)),
    )


def compare_systems(
    a: Iterable[ScoredUtterance],
    b: Iterable[ScoredUtterance],
    alpha: float = 0.05,
    system_a: str = "A",
    system_b: str = "B",
    tokenize: Tokenizer = tokenize_words,
) -> SignificanceResult:
    """MAPSSWE over the utterances both systems decoded, in utterance id order."""
    errors_a, errors_b = segment_errors(a, tokenize), segment_errors(b, tokenize)
    common = sorted(set(errors_a) & set(errors_b))
    dropped = len(set(errors_a) ^ set(errors_b))
    if dropped:
        logger.warning("%d segments decoded by only one system are ignored", dropped)
    return mapsswe_test(
        [errors_a[u] for u in common], [errors_b[u] for u in common], alpha, system_a, system_b
    )


def paired_sign_test(
    scores_a: Sequence[float], scores_b: Sequence[float], alternative: str = "greater"
) -> float:
    """
    One-sided sign test that ``scores_a`` exceeds ``scores_b`` pairwise.

    Ties are dropped. Returns the binomial p-value (1.0 when every pair ties).
    """
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"pair counts differ: {len(a)} vs {len(b)}")
    wins = int((a > b).sum())
    losses = int((a < b).sum())
    if wins + losses == 0:
        return 1.0
    return float(binomtest(wins, wins + losses, 0.5, alternative=alternative).pvalue)
