"""
Dysasr Recognizer

Binds an acoustic model, state priors, a decode graph and optional speaker
transforms into per-utterance recognition.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from dysasr.core.models import DecodeConfig
from dysasr.core.protocols import AcousticModel
from dysasr.decode.graph import DecodeGraph
from dysasr.decode.viterbi import Hypothesis, NBest, viterbi_decode
from dysasr.dsp.features import FeatureNormalizer, splice_frames
from dysasr.net.hooks import Hook

logger = logging.getLogger(__name__)


@dataclass
class DecodeItem:
    utt_id: str
    speaker_id: str
    frames: np.ndarray


class Recognizer:
    """
    Hybrid DNN-HMM recognizer.

    Frames are normalized and spliced here, scored as
    log p(state | frame) - log prior(state), then decoded over ``graph``.
    Silence words are removed from the returned hypotheses.
    """

    def __init__(
        self,
        model: AcousticModel,
        priors: np.ndarray,
        graph: DecodeGraph,
        config: DecodeConfig | None = None,
        normalizer: FeatureNormalizer | None = None,
        splice: tuple[int, int] = (4, 4),
        transforms: dict[str, dict[int, Hook]] | None = None,
    ):
        if len(priors) != model.n_states:
            raise ValueError(f"{len(priors)} priors for a model with {model.n_states} states")
        self.model = model
        self.log_priors = np.log(np.maximum(priors, 1e-300))
        self.graph = graph
        self.config = config or DecodeConfig()
        self.normalizer = normalizer
        self.splice = splice
        self.transforms = transforms or {}

    def frame_scores(self, frames: np.ndarray, speaker_id: str | None = None) -> np.ndarray:
        x = frames if self.normalizer is None else self.normalizer.apply(frames)
        x = splice_frames(x, *self.splice)
        hooks = self.transforms.get(speaker_id) if speaker_id is not None else None
        return self.model.log_posteriors(x, hooks) - self.log_priors

    def recognize(self, item: DecodeItem) -> NBest:
        scores = self.frame_scores(item.frames, item.speaker_id)
        nbest = viterbi_decode(self.graph, scores, self.config.nbest, self.config.acoustic_scale)
        nbest = self._strip_silence(nbest)
        if not nbest.hypotheses:
            logger.warning("no complete path for %s (%d frames)", item.utt_id, len(scores))
            nbest = NBest([Hypothesis((), -math.inf)])
        nbest.utt_id = item.utt_id
        return nbest

    def _strip_silence(self, nbest: NBest) -> NBest:
        silence = self.config.silence_word
        if silence is None:
            return nbest
        merged: dict[tuple[str, ...], float] = {}
        for hyp in nbest:
            words = tuple(w for w in hyp.words if w != silence)
            if words not in merged:
                merged[words] = hyp.score
        return NBest([Hypothesis(w, s) for w, s in merged.items()], nbest.utt_id)


def decode_utterances(
    recognizer: Recognizer, items: list[DecodeItem], jobs: int = 1
) -> list[NBest]:
    """Decode ``items`` in parallel; results keep the input order."""
    with ThreadPoolExecutor(max_workers=max(jobs, 1)) as pool:
        return list(pool.map(recognizer.recognize, items))
