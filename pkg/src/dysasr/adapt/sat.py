"""
Speaker adaptive training: speaker independent weights and one transform
per training speaker, updated jointly batch by batch.
"""

import logging

import numpy as np

from dysasr.adapt.transforms import SpeakerTransform
from dysasr.core.models import AdaptConfig, TrainConfig
from dysasr.net.hooks import Hook
from dysasr.net.model import HybridDnn
from dysasr.net.train import FrameDataset, train_model

logger = logging.getLogger(__name__)


class TransformBank:
    """Per-speaker transforms addressed by the dataset's per-row speaker index."""

    def __init__(
        self,
        transforms: dict[str, SpeakerTransform],
        dataset: FrameDataset,
        lr: float | None = None,
    ):
        missing = [s for s in dataset.speaker_ids if s not in transforms]
        if missing:
            raise KeyError(f"no transform for speakers {missing}")
        self.transforms = transforms
        self.dataset = dataset
        self.lr = lr
        first = transforms[dataset.speaker_ids[0]]
        self.method = first.method
        self.layers = first.layers

    def _stack(self, layer: int) -> np.ndarray:
        return np.stack([self.transforms[s].params[layer] for s in self.dataset.speaker_ids])

    def hooks_for(self, rows: np.ndarray) -> dict[int, Hook]:
        speakers = self.dataset.speakers[rows]
        return {layer: Hook(self.method, self._stack(layer)[speakers]) for layer in self.layers}

    def apply_gradients(
        self, rows: np.ndarray, hook_grads: dict[int, np.ndarray], lr: float
    ) -> None:
        step = self.lr if self.lr is not None else lr
        speakers = self.dataset.speakers[rows]
        n_speakers = len(self.dataset.speaker_ids)
        for layer, grad in hook_grads.items():
            per_speaker = np.zeros((n_speakers, grad.shape[-1]))
            np.add.at(per_speaker, speakers, grad)
            for index in np.unique(speakers):
                spk = self.dataset.speaker_ids[index]
                self.transforms[spk].params[layer] -= step * per_speaker[index]


def sat_train(
    model: HybridDnn,
    dataset: FrameDataset,
    config: AdaptConfig,
    train_config: TrainConfig,
) -> tuple[HybridDnn, dict[str, SpeakerTransform]]:
    """
    Jointly train speaker independent weights and per-speaker transforms.

    Transforms start neutral; ``config.sat_epochs == 0`` returns them as is.

    Raises:
        ValueError: a speaker in the dataset has no frames
    """
    widths = model.layer_widths()
    for layer in config.layers:
        if layer >= len(widths):
            raise ValueError(f"adapted layer {layer} does not exist ({len(widths)} layers)")
    counts = np.bincount(dataset.speakers, minlength=len(dataset.speaker_ids))
    empty = [s for s, c in zip(dataset.speaker_ids, counts, strict=True) if c == 0]
    if empty:
        raise ValueError(f"speakers without training data: {empty}")

    transforms = {
        spk: SpeakerTransform.neutral(spk, config.method, config.layers, widths)
        for spk in dataset.speaker_ids
    }
    bank = TransformBank(transforms, dataset, lr=config.transform_lr)
    sat_config = train_config.model_copy(update={"lr": config.sat_lr})
    model, losses = train_model(model, dataset, sat_config, adapter=bank, epochs=config.sat_epochs)
    if losses:
        logger.info(
            "sat method=%s speakers=%d final_loss=%.4f",
            config.method.value,
            len(transforms),
            losses[-1],
        )
    return model, transforms
