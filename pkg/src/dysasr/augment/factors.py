"""
Dysasr Speaker Perturbation Factors

Phone duration statistics and the dysarthric speaker factor: the control
speakers' mean phone duration over the speaker's own, used to make control
speech sound like that speaker.
"""

import logging
import math
from collections import defaultdict
from collections.abc import Iterable, Mapping

import numpy as np

from dysasr.core.errors import AugmentationError
from dysasr.core.models import (
    FACTOR_MAX,
    FACTOR_MIN,
    PerturbationFactor,
    SpeakerKind,
    SpeakerProfile,
    UtteranceRecord,
)

logger = logging.getLogger(__name__)


def estimate_phone_durations(records: Iterable[UtteranceRecord]) -> dict[str, list[float]]:
    """Uniform segmentation: each phone gets duration_s / len(phones). Original rows only."""
    return {
        r.utt_id: [r.duration_s / len(r.phones)] * len(r.phones)
        for r in records
        if not r.is_augmented
    }


def phone_durations_from_states(
    chain_states: np.ndarray, states_per_phone: int, frame_shift_s: float
) -> list[float]:
    """Per-phone durations from a forced alignment given as chain state indices per frame."""
    phones = np.asarray(chain_states) // states_per_phone
    if len(phones) == 0:
        return []
    counts = np.bincount(phones)
    return [float(c) * frame_shift_s for c in counts if c > 0]


def speaker_mean_durations(
    durations: Mapping[str, list[float]], records: Iterable[UtteranceRecord]
) -> dict[str, float]:
    """Mean phone duration per speaker, pooling every phone of every utterance."""
    pooled: dict[str, list[float]] = defaultdict(list)
    for record in records:
        if record.utt_id in durations:
            pooled[record.speaker_id].extend(durations[record.utt_id])
    return {sid: math.fsum(values) / len(values) for sid, values in pooled.items() if values}


def estimate_speaker_factor(
    durations: Mapping[str, list[float]],
    records: Iterable[UtteranceRecord],
    profiles: Iterable[SpeakerProfile],
) -> list[PerturbationFactor]:
    """
    One factor per dysarthric speaker.

    The control reference is speaker balanced: phone durations are pooled
    per control speaker, averaged, and the speaker means averaged again.
    Sums use ``math.fsum`` so the result does not depend on record order.

    Args:
        durations: utt_id -> phone durations in seconds
        records: Manifest rows (to map utterances to speakers)
        profiles: Speaker profiles

    Returns:
        Factors sorted by speaker id

    Raises:
        AugmentationError: no control durations, or a dysarthric speaker
            without any aligned utterance
    """
    means = speaker_mean_durations(durations, records)
    profiles = list(profiles)
    controls = sorted(p.speaker_id for p in profiles if p.kind == SpeakerKind.CONTROL)
    dysarthric = sorted(p.speaker_id for p in profiles if p.kind == SpeakerKind.DYSARTHRIC)

    control_means = [means[sid] for sid in controls if sid in means]
    if not control_means:
        raise AugmentationError("control pool is empty: no aligned control utterances")
    missing = [sid for sid in dysarthric if sid not in means]
    if missing:
        raise AugmentationError(f"missing alignments for speakers: {', '.join(missing)}")

    t_bar = math.fsum(control_means) / len(control_means)
    factors = [
        PerturbationFactor(
            speaker_id=sid,
            value=t_bar / means[sid],
            t_bar_control_s=t_bar,
            t_speaker_s=means[sid],
        )
        for sid in dysarthric
    ]
    for factor in factors:
        logger.info(
            "speaker=%s factor=%.4f t_speaker=%.4f",
            factor.speaker_id,
            factor.value,
            factor.t_speaker_s,
        )
    return factors


def clip_speaker_factors(
    factors: Iterable[PerturbationFactor], jitter: Iterable[float] = (0.0,)
) -> dict[str, float]:
    """
    Speaker -> factor, clipped so that every jittered factor stays admissible.

    Real dysarthric speech is often slower than the admissible range
    allows; clipped speakers are reported with a warning.
    """
    spread = max((abs(j) for j in jitter), default=0.0)
    low, high = FACTOR_MIN + spread, FACTOR_MAX - spread
    clipped = {}
    for factor in factors:
        value = min(max(factor.value, low), high)
        if value != factor.value:
            logger.warning(
                "speaker=%s factor=%.4f clipped to %.4f", factor.speaker_id, factor.value, value
            )
        clipped[factor.speaker_id] = value
    return clipped


def profiles_with_durations(
    profiles: Iterable[SpeakerProfile], means: Mapping[str, float]
) -> list[SpeakerProfile]:
    return [
        p.model_copy(update={"mean_phone_duration_s": means[p.speaker_id]})
        if p.speaker_id in means
        else p
        for p in profiles
    ]
