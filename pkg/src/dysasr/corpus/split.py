"""
Dysarthric corpus train/test splitting.
"""

import logging
from collections.abc import Iterable, Mapping

from dysasr.core.models import (
    Block,
    CorpusSplit,
    CustomSplit,
    SpeakerKind,
    SpeakerProfile,
    SplitProtocol,
    UtteranceRecord,
)

logger = logging.getLogger(__name__)


def split_blocks(
    records: Iterable[UtteranceRecord],
    profiles: Iterable[SpeakerProfile] | Mapping[str, SpeakerProfile],
    protocol: SplitProtocol = SplitProtocol.PAPER,
    custom: CustomSplit | None = None,
) -> CorpusSplit:
    """
    Assign every utterance to train, test or discarded.

    The ``paper`` protocol trains on B1 and B3 of every speaker, tests on
    dysarthric B2 and discards control B2. The custom protocol reads its
    block and speaker-kind lists from ``custom``. Augmented rows are never
    placed in the test set.
    """
    if isinstance(profiles, Mapping):
        kinds = {sid: p.kind for sid, p in profiles.items()}
    else:
        kinds = {p.speaker_id: p.kind for p in profiles}

    if protocol == SplitProtocol.PAPER:
        rule = CustomSplit(
            train_blocks=[Block.B1, Block.B3],
            test_blocks=[Block.B2],
            test_kinds=[SpeakerKind.DYSARTHRIC],
        )
    else:
        rule = custom or CustomSplit()

    split = CorpusSplit()
    for record in records:
        kind = kinds.get(record.speaker_id)
        if kind is None:
            raise KeyError(f"Speaker not found: {record.speaker_id} (utterance {record.utt_id})")
        is_test = record.block in rule.test_blocks and kind in rule.test_kinds
        if is_test and not record.is_augmented:
            split.test.append(record.utt_id)
        elif record.block in rule.train_blocks:
            split.train.append(record.utt_id)
        else:
            split.discarded.append(record.utt_id)

    logger.info(
        "protocol=%s train=%d test=%d discarded=%d",
        protocol.value,
        len(split.train),
        len(split.test),
        len(split.discarded),
    )
    return split
