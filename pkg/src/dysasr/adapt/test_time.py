"""
Dysasr Test-Time Adaptation

Unsupervised per-speaker adaptation on 1-best supervision with the speaker
independent weights frozen, rapid-adaptation data budgets and the
adaptation log.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any

import numpy as np

from dysasr.adapt.bayes import bayes_adapt
from dysasr.adapt.transforms import SpeakerTransform
from dysasr.core.models import AdaptationBudget, AdaptConfig, ForwardMode
from dysasr.net.model import HybridDnn
from dysasr.net.train import FrameDataset

logger = logging.getLogger(__name__)


def select_adaptation_subset(
    utt_ids: list[str], budget: AdaptationBudget, seed: int = 0
) -> list[str]:
    """
    Seeded sample of a speaker's utterances under ``budget``.

    A fraction keeps max(1, round(fraction * n)) utterances; the selection
    keeps the input order.
    """
    n = len(utt_ids)
    if n == 0:
        return []
    if budget.utterances is not None:
        k = min(budget.utterances, n)
    elif budget.fraction is not None:
        k = max(1, round(budget.fraction * n))
    else:
        return list(utt_ids)
    chosen = np.sort(np.random.default_rng(seed).permutation(n)[:k])
    return [utt_ids[i] for i in chosen]


def test_time_adapt(
    model: HybridDnn,
    transform: SpeakerTransform,
    dataset: FrameDataset,
    config: AdaptConfig,
    steps: int | None = None,
    frame_shift_s: float = 0.010,
) -> tuple[SpeakerTransform, list[dict[str, Any]]]:
    """
    Point-estimate adaptation of ``transform`` by full-batch gradient descent.

    Only the transform moves; the model runs in eval mode so neither its
    parameters nor its BN statistics change.

    Args:
        model: Speaker independent model (not modified)
        transform: Starting transform (not modified)
        dataset: The speaker's frames with supervision labels
        config: Learning rate and default step count
        steps: Overrides ``config.steps``
        frame_shift_s: For the data duration in the log

    Returns:
        (adapted transform, one log record per step plus the final loss)

    Raises:
        ValueError: empty adaptation data
    """
    if len(dataset) == 0:
        raise ValueError(f"{transform.speaker_id}: no adaptation data")
    steps = config.steps if steps is None else steps
    adapted = transform.copy()
    data_s = round(len(dataset) * frame_shift_s, 4)
    log = []
    for step in range(steps + 1):
        result = model.forward(dataset.features, ForwardMode.EVAL, hooks=adapted.hooks())
        loss = model.loss(result, dataset.primary, dataset.aux)
        log.append(
            {
                "speaker": adapted.speaker_id,
                "step": step,
                "loss": round(loss, 6),
                "data_s": data_s,
                "method": adapted.method.value,
                "bayesian": False,
            }
        )
        if step == steps:
            break
        grads = model.backward(result, dataset.primary, dataset.aux)
        for layer, g in grads.hooks.items():
            adapted.params[layer] -= config.transform_lr * g
    logger.info(
        "adapt speaker=%s steps=%d loss=%.4f->%.4f",
        adapted.speaker_id,
        steps,
        log[0]["loss"],
        log[-1]["loss"],
    )
    return adapted, log


def adapt_speakers(
    model: HybridDnn,
    datasets: dict[str, FrameDataset],
    config: AdaptConfig,
    init: dict[str, SpeakerTransform] | None = None,
    jobs: int = 1,
    frame_shift_s: float = 0.010,
) -> tuple[dict[str, SpeakerTransform], list[dict[str, Any]]]:
    """
    Adapt every speaker in ``datasets`` independently.

    Speakers without an initial transform start neutral. Results and log
    records come back in sorted speaker order regardless of ``jobs``.
    """
    init = init or {}
    widths = model.layer_widths()

    def _one(speaker: str) -> tuple[SpeakerTransform, list[dict[str, Any]]]:
        start = init.get(speaker) or SpeakerTransform.neutral(
            speaker, config.method, config.layers, widths
        )
        if config.bayesian:
            return bayes_adapt(model, datasets[speaker], config, start, None, frame_shift_s)
        return test_time_adapt(model, start, datasets[speaker], config, None, frame_shift_s)

    speakers = sorted(datasets)
    with ThreadPoolExecutor(max_workers=max(jobs, 1)) as pool:
        results = list(pool.map(_one, speakers))
    transforms = {}
    log: list[dict[str, Any]] = []
    for speaker, (transform, records) in zip(speakers, results, strict=True):
        transforms[speaker] = transform
        log.extend(records)
    return transforms, log


def write_adaptation_log(path: Path | str, records: list[dict[str, Any]]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record, sort_keys=True) + "\n")
