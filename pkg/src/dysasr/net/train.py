"""
Dysasr Training

Frame datasets assembled from spliced features and state alignments, a
momentum SGD optimizer with step decay, and the cross-entropy training loop.
"""

import logging
from collections.abc import Iterator
from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

import numpy as np

from dysasr.core.errors import NumericalError
from dysasr.core.models import ForwardMode, OptimizerKind, TrainConfig
from dysasr.dsp.features import FeatureNormalizer, splice_frames
from dysasr.net.hooks import Hook
from dysasr.net.model import HybridDnn

logger = logging.getLogger(__name__)

EVAL_CHUNK = 4096


# =============================================================================
# Datasets
# =============================================================================


@dataclass
class UtteranceFrames:
    """Unspliced frames of one utterance with per-frame state and phone targets."""

    utt_id: str
    speaker_id: str
    frames: np.ndarray
    primary: np.ndarray
    aux: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.frames)
        if len(self.primary) != n or len(self.aux) != n:
            raise ValueError(
                f"{self.utt_id}: {n} frames but {len(self.primary)} state and "
                f"{len(self.aux)} phone targets"
            )


@dataclass
class FrameDataset:
    """
    Frame-level training data.

    ``features`` are normalized and spliced; rows of one utterance are
    contiguous and ``offsets[k]:offsets[k + 1]`` selects utterance ``k``.
    ``speakers`` holds an index into ``speaker_ids`` per row.
    """

    features: np.ndarray
    primary: np.ndarray
    aux: np.ndarray
    speakers: np.ndarray
    speaker_ids: list[str]
    utt_ids: list[str]
    offsets: np.ndarray
    utt_speakers: list[str] = field(default_factory=list)

    @classmethod
    def from_utterances(
        cls,
        utterances: list[UtteranceFrames],
        left: int,
        right: int,
        normalizer: FeatureNormalizer | None = None,
    ) -> "FrameDataset":
        if not utterances:
            raise ValueError("cannot build a dataset from zero utterances")
        speaker_ids = sorted({u.speaker_id for u in utterances})
        speaker_index = {s: i for i, s in enumerate(speaker_ids)}
        blocks, primary, aux, speakers = [], [], [], []
        offsets = [0]
        for utt in utterances:
            frames = utt.frames if normalizer is None else normalizer.apply(utt.frames)
            blocks.append(splice_frames(frames, left, right))
            primary.append(np.asarray(utt.primary, dtype=np.int64))
            aux.append(np.asarray(utt.aux, dtype=np.int64))
            speakers.append(np.full(len(frames), speaker_index[utt.speaker_id], dtype=np.int64))
            offsets.append(offsets[-1] + len(frames))
        return cls(
            features=np.vstack(blocks),
            primary=np.concatenate(primary),
            aux=np.concatenate(aux),
            speakers=np.concatenate(speakers),
            speaker_ids=speaker_ids,
            utt_ids=[u.utt_id for u in utterances],
            offsets=np.asarray(offsets, dtype=np.int64),
            utt_speakers=[u.speaker_id for u in utterances],
        )

    def __len__(self) -> int:
        return len(self.features)

    @property
    def input_dim(self) -> int:
        return self.features.shape[1]

    def utterance_rows(self, utt_id: str) -> slice:
        k = self.utt_ids.index(utt_id)
        return slice(int(self.offsets[k]), int(self.offsets[k + 1]))

    def subset(self, utt_ids: list[str]) -> "FrameDataset":
        """Rows of the named utterances, in the given order; speaker ids are kept."""
        rows = [self.utterance_rows(u) for u in utt_ids]
        if not rows:
            raise ValueError("subset of zero utterances")
        index = np.concatenate([np.arange(r.start, r.stop) for r in rows])
        offsets = np.concatenate([[0], np.cumsum([r.stop - r.start for r in rows])])
        spk = {u: s for u, s in zip(self.utt_ids, self.utt_speakers, strict=True)}
        return FrameDataset(
            features=self.features[index],
            primary=self.primary[index],
            aux=self.aux[index],
            speakers=self.speakers[index],
            speaker_ids=self.speaker_ids,
            utt_ids=list(utt_ids),
            offsets=offsets.astype(np.int64),
            utt_speakers=[spk[u] for u in utt_ids],
        )

    def by_speaker(self, speaker_id: str) -> "FrameDataset":
        return self.subset(
            [u for u, s in zip(self.utt_ids, self.utt_speakers, strict=True) if s == speaker_id]
        )

    def batches(
        self, batch_size: int, rng: np.random.Generator | None = None
    ) -> Iterator[np.ndarray]:
        """Row index batches; shuffled when ``rng`` is given."""
        order = rng.permutation(len(self)) if rng is not None else np.arange(len(self))
        for start in range(0, len(order), batch_size):
            yield order[start : start + batch_size]


# =============================================================================
# Optimizer
# =============================================================================


class Optimizer:
    """SGD (optionally with momentum) and step learning-rate decay."""

    def __init__(self, config: TrainConfig):
        self.config = config
        self.velocity: dict[str, np.ndarray] = {}

    def lr_at(self, epoch: int) -> float:
        c = self.config
        return c.lr * c.lr_decay ** (epoch // c.decay_every)

    def step(
        self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray], epoch: int
    ) -> None:
        """Update ``params`` in place."""
        lr = self.lr_at(epoch)
        momentum = self.config.optimizer == OptimizerKind.SGD_MOMENTUM
        for key, g in grads.items():
            if key not in params:
                continue
            if momentum:
                v = self.velocity.get(key)
                v = g.copy() if v is None else self.config.momentum * v + g
                self.velocity[key] = v
                params[key] -= lr * v
            else:
                params[key] -= lr * g


# =============================================================================
# Training Loop
# =============================================================================


@runtime_checkable
class BatchAdapter(Protocol):
    """Supplies per-row speaker transforms and consumes their gradients (SAT)."""

    def hooks_for(self, rows: np.ndarray) -> dict[int, Hook]: ...

    def apply_gradients(
        self, rows: np.ndarray, hook_grads: dict[int, np.ndarray], lr: float
    ) -> None: ...


def train_epoch(
    model: HybridDnn,
    dataset: FrameDataset,
    config: TrainConfig,
    epoch: int = 0,
    optimizer: Optimizer | None = None,
    adapter: BatchAdapter | None = None,
    update_model: bool = True,
) -> tuple[HybridDnn, float]:
    """
    One pass over ``dataset`` in a seed-determined order.

    The model is updated in place. With ``update_model=False`` only the
    adapter's transforms move and BN statistics stay frozen.

    Returns:
        (model, mean per-frame loss)

    Raises:
        NumericalError: loss or gradient not finite, with the batch id
    """
    optimizer = optimizer or Optimizer(config)
    rng = np.random.default_rng([config.seed, epoch])
    lr = optimizer.lr_at(epoch)
    total = 0.0
    for batch_id, rows in enumerate(dataset.batches(config.batch, rng)):
        pt, at = dataset.primary[rows], dataset.aux[rows]
        hooks = adapter.hooks_for(rows) if adapter is not None else None
        result = model.forward(
            dataset.features[rows],
            ForwardMode.TRAIN,
            rng=rng,
            hooks=hooks,
            freeze_bn=not update_model,
        )
        loss = model.loss(result, pt, at)
        if not np.isfinite(loss):
            raise NumericalError(f"loss is {loss} at epoch {epoch}", batch_id)
        grads = model.backward(result, pt, at)
        if not grads.is_finite():
            raise NumericalError(f"non-finite gradient at epoch {epoch}", batch_id)
        if update_model:
            optimizer.step(model.params, grads.params, epoch)
            model.update_bn_stats(result.cache)
        if adapter is not None:
            adapter.apply_gradients(rows, grads.hooks, lr)
        total += loss * len(rows)
    mean_loss = total / max(len(dataset), 1)
    logger.debug("epoch=%d lr=%.4g loss=%.4f", epoch, lr, mean_loss)
    return model, mean_loss


def train_model(
    model: HybridDnn,
    dataset: FrameDataset,
    config: TrainConfig,
    adapter: BatchAdapter | None = None,
    epochs: int | None = None,
) -> tuple[HybridDnn, list[float]]:
    """Run ``config.epochs`` (or ``epochs``) epochs and return the per-epoch losses."""
    optimizer = Optimizer(config)
    losses = []
    for epoch in range(config.epochs if epochs is None else epochs):
        model, loss = train_epoch(model, dataset, config, epoch, optimizer, adapter)
        losses.append(loss)
        logger.info("epoch=%d loss=%.4f frames=%d", epoch, loss, len(dataset))
    return model, losses


def recalibrate_bn(
    model: HybridDnn, dataset: FrameDataset, batch: int, seed: int = 0
) -> HybridDnn:
    """
    Replace the running BN statistics with the frame-weighted average of the
    batch statistics seen in one TRAIN-mode pass over ``dataset``. Weights
    stay fixed.
    """
    rng = np.random.default_rng(seed)
    sums: dict[int, list[np.ndarray]] = {}
    for rows in dataset.batches(batch, rng):
        result = model.forward(dataset.features[rows], ForwardMode.TRAIN, rng=rng)
        for index, c in enumerate(result.cache.layers):
            if not c.batch_stats:
                continue
            mean, var = sums.setdefault(index, [0.0, 0.0])
            sums[index] = [mean + len(rows) * c.batch_mean, var + len(rows) * c.batch_var]
    n = len(dataset)
    for index, (mean, var) in sums.items():
        model.bn_state[f"L{index}.running_mean"] = mean / n
        model.bn_state[f"L{index}.running_var"] = var / n
    return model


def _chunks(dataset: FrameDataset) -> Iterator[np.ndarray]:
    return dataset.batches(EVAL_CHUNK)


def frame_accuracy(
    model: HybridDnn, dataset: FrameDataset, adapter: BatchAdapter | None = None
) -> float:
    """Fraction of frames whose arg-max primary posterior matches the target state."""
    if len(dataset) == 0:
        return 0.0
    correct = 0
    for rows in _chunks(dataset):
        hooks = adapter.hooks_for(rows) if adapter is not None else None
        log_post = model.log_posteriors(dataset.features[rows], hooks)
        correct += int((log_post.argmax(axis=1) == dataset.primary[rows]).sum())
    return correct / len(dataset)


def evaluate_loss(
    model: HybridDnn, dataset: FrameDataset, adapter: BatchAdapter | None = None
) -> float:
    """Mean eval-mode multitask loss per frame."""
    total = 0.0
    for rows in _chunks(dataset):
        hooks = adapter.hooks_for(rows) if adapter is not None else None
        result = model.forward(
            dataset.features[rows], ForwardMode.EVAL, hooks=hooks, keep_cache=False
        )
        total += model.loss(result, dataset.primary[rows], dataset.aux[rows], reduction="sum")
    return total / max(len(dataset), 1)
