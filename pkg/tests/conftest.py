"""Shared fixtures: synthetic tones, toy models and speaker-shift data."""

import numpy as np
import pytest

from dysasr.core.models import (
    Block,
    HybridDnnSpec,
    ModelConfig,
    SeverityBand,
    SpeakerKind,
    SpeakerProfile,
    UtteranceRecord,
)
from dysasr.dsp.audio import Waveform
from dysasr.net.model import HybridDnn
from dysasr.net.train import FrameDataset, UtteranceFrames


def make_tone(freq_hz: float, duration_s: float, sr: int = 16000, amp: float = 0.5) -> Waveform:
    t = np.arange(int(round(duration_s * sr))) / sr
    return Waveform(amp * np.sin(2 * np.pi * freq_hz * t), sr)


def make_record(
    utt_id: str,
    speaker_id: str,
    block: Block = Block.B1,
    word: str = "ma",
    phones: list[str] | None = None,
    duration_s: float = 0.5,
) -> UtteranceRecord:
    return UtteranceRecord(
        utt_id=utt_id,
        speaker_id=speaker_id,
        block=block,
        word=word,
        phones=phones or ["m", "aa"],
        audio_path=f"wav/{utt_id}.wav",
        duration_s=duration_s,
    )


def toy_spec(
    input_dim: int = 6,
    n_states: int = 5,
    n_phones: int = 3,
    dropout_p: float = 0.0,
) -> HybridDnnSpec:
    """Three hidden layers: two factored (one with a skip) plus a bottleneck."""
    return ModelConfig(
        n_layers=3,
        hidden_width=8,
        proj_dim=6,
        bottleneck_width=5,
        n_factored=2,
        skips=[(0, 1)],
        dropout_p=dropout_p,
    ).build_spec(input_dim, n_states, n_phones)


@pytest.fixture
def tone():
    return make_tone


@pytest.fixture
def profiles() -> dict[str, SpeakerProfile]:
    return {
        "C01": SpeakerProfile(
            speaker_id="C01", kind=SpeakerKind.CONTROL, band=SeverityBand.CONTROL
        ),
        "D01": SpeakerProfile(
            speaker_id="D01", kind=SpeakerKind.DYSARTHRIC, band=SeverityBand.LOW
        ),
        "D02": SpeakerProfile(
            speaker_id="D02", kind=SpeakerKind.DYSARTHRIC, band=SeverityBand.HIGH
        ),
    }


@pytest.fixture
def toy_model() -> HybridDnn:
    return HybridDnn(toy_spec(), seed=3)


@pytest.fixture
def toy_batch():
    rng = np.random.default_rng(11)
    x = rng.standard_normal((12, 6))
    primary = rng.integers(0, 5, 12)
    aux = rng.integers(0, 3, 12)
    return x, primary, aux


def shift_dataset(
    seed: int,
    n_per_speaker: int = 200,
    gains: tuple[float, float] = (2.0, 0.5),
    n_classes: int = 3,
    dim: int = 6,
) -> FrameDataset:
    """
    Two speakers whose features are the same class clusters scaled by a
    per-speaker channel gain (about +-6 dB). Frames are returned unspliced.
    """
    rng = np.random.default_rng([seed, 77])
    centers = rng.standard_normal((n_classes, dim)) * 2.0
    utterances = []
    for speaker, gain in zip(("S1", "S2"), gains, strict=True):
        for u in range(4):
            n = n_per_speaker // 4
            labels = rng.integers(0, n_classes, n)
            frames = gain * (centers[labels] + 0.6 * rng.standard_normal((n, dim)))
            utterances.append(
                UtteranceFrames(f"{speaker}_{u}", speaker, frames, labels, labels % 2)
            )
    return FrameDataset.from_utterances(utterances, 0, 0)


@pytest.fixture
def shift_data():
    return shift_dataset


def rank_dataset(seed: int, split: int, n: int = 600, dim: int = 6) -> FrameDataset:
    """
    Three classes on well separated centers in a random 2-D subspace, so a
    projection of width 2 already separates them. ``split`` only changes
    the sampled frames, not the subspace or the centers.
    """
    structure = np.random.default_rng([seed, 5])
    basis = np.linalg.qr(structure.standard_normal((dim, 2)))[0].T
    centers = 4.0 * np.array([[1.0, 0.0], [-0.5, 0.87], [-0.5, -0.87]])
    rng = np.random.default_rng([seed, split])
    labels = rng.integers(0, 3, n)
    latent = centers[labels] + 0.3 * rng.standard_normal((n, 2))
    frames = latent @ basis + 0.1 * rng.standard_normal((n, dim))
    utterances = [
        UtteranceFrames(f"S1_{u}", "S1", frames[u::4], labels[u::4], labels[u::4] % 2)
        for u in range(4)
    ]
    return FrameDataset.from_utterances(utterances, 0, 0)
