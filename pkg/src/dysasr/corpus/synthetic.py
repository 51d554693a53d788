"""
Dysasr Synthetic Corpus

A small UASpeech-shaped stand-in: control and dysarthric speakers reading
isolated words in three blocks. Words are strings of formant-synthesized
phones; dysarthric speakers are slower, breathier and less regular
according to their severity band.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from dysasr.core.models import (
    Block,
    SeverityBand,
    SpeakerKind,
    SpeakerProfile,
    SyntheticCorpusConfig,
    UtteranceRecord,
)
from dysasr.corpus.manifest import write_manifest
from dysasr.dsp.audio import Waveform, write_wav

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.jsonl"


@dataclass(frozen=True)
class PhoneSpec:
    """Source type, resonances and nominal duration of one phone."""

    kind: str  # vowel, nasal, liquid or fricative
    formants: tuple[float, ...]
    bandwidths: tuple[float, ...]
    duration_s: float
    amplitude: float = 1.0
    spelling: str = ""


PHONES: dict[str, PhoneSpec] = {
    "aa": PhoneSpec("vowel", (730, 1090, 2440), (90, 110, 170), 0.14, 1.0, "a"),
    "iy": PhoneSpec("vowel", (270, 2290, 3010), (60, 100, 170), 0.13, 1.0, "ee"),
    "uw": PhoneSpec("vowel", (300, 870, 2240), (60, 100, 170), 0.13, 1.0, "oo"),
    "eh": PhoneSpec("vowel", (530, 1840, 2480), (80, 100, 170), 0.12, 1.0, "e"),
    "ao": PhoneSpec("vowel", (570, 840, 2410), (80, 100, 170), 0.14, 1.0, "aw"),
    "ae": PhoneSpec("vowel", (660, 1720, 2410), (90, 110, 170), 0.13, 1.0, "ae"),
    "m": PhoneSpec("nasal", (250, 1100, 2200), (60, 200, 300), 0.08, 0.5, "m"),
    "n": PhoneSpec("nasal", (250, 1700, 2600), (60, 200, 300), 0.08, 0.5, "n"),
    "l": PhoneSpec("liquid", (360, 1300, 2700), (80, 150, 250), 0.08, 0.7, "l"),
    "s": PhoneSpec("fricative", (5500,), (2000,), 0.10, 0.3, "s"),
    "sh": PhoneSpec("fricative", (2800,), (1200,), 0.10, 0.35, "sh"),
    "f": PhoneSpec("fricative", (4000,), (3000,), 0.09, 0.2, "f"),
}

VOWELS = [p for p, spec in PHONES.items() if spec.kind == "vowel"]
CONSONANTS = [p for p, spec in PHONES.items() if spec.kind != "vowel"]

# duration scale, breathiness, per-phone duration jitter
SEVERITY_STYLE: dict[SeverityBand, tuple[float, float, float]] = {
    SeverityBand.CONTROL: (1.0, 0.02, 0.05),
    SeverityBand.HIGH: (1.2, 0.05, 0.08),
    SeverityBand.MILD: (1.4, 0.10, 0.12),
    SeverityBand.LOW: (1.6, 0.18, 0.16),
    SeverityBand.VERY_LOW: (1.8, 0.28, 0.20),
}

DYSARTHRIC_BANDS = [SeverityBand.HIGH, SeverityBand.MILD, SeverityBand.LOW, SeverityBand.VERY_LOW]


@dataclass(frozen=True)
class SyntheticSpeaker:
    profile: SpeakerProfile
    tempo: float
    gain_db: float
    f0_hz: float
    warp: float

    @property
    def speaker_id(self) -> str:
        return self.profile.speaker_id


def build_vocabulary(n_words: int, seed: int = 0) -> list[tuple[str, list[str]]]:
    """Distinct pseudo-words (spelling, phones) drawn from C V C / C V / V C V patterns."""
    rng = np.random.default_rng(seed)
    patterns = [("C", "V", "C"), ("C", "V"), ("V", "C", "V"), ("C", "V", "C", "V")]
    words: list[tuple[str, list[str]]] = []
    seen: set[str] = set()
    attempts = 0
    while len(words) < n_words:
        attempts += 1
        if attempts > 1000 * max(n_words, 1):
            raise ValueError(f"cannot draw {n_words} distinct words")
        pattern = patterns[int(rng.integers(len(patterns)))]
        phones = [
            VOWELS[int(rng.integers(len(VOWELS)))]
            if slot == "V"
            else CONSONANTS[int(rng.integers(len(CONSONANTS)))]
            for slot in pattern
        ]
        spelling = "".join(PHONES[p].spelling for p in phones)
        if spelling in seen:
            continue
        seen.add(spelling)
        words.append((spelling, phones))
    return words


def _resonate(x: np.ndarray, formants: tuple[float, ...], bandwidths: tuple[float, ...], sr: int):
    for freq, bw in zip(formants, bandwidths, strict=True):
        freq = min(freq, 0.45 * sr)
        r = np.exp(-np.pi * bw / sr)
        theta = 2 * np.pi * freq / sr
        a = [1.0, -2 * r * np.cos(theta), r * r]
        x = lfilter([1.0 - r], a, x)
    return x


def synthesize_phone(
    phone: str,
    n_samples: int,
    speaker: SyntheticSpeaker,
    breathiness: float,
    rng: np.random.Generator,
    sr: int,
) -> np.ndarray:
    spec = PHONES[phone]
    formants = tuple(f * speaker.warp for f in spec.formants)
    noise = rng.standard_normal(n_samples)
    if spec.kind == "fricative":
        signal = _resonate(noise, formants, spec.bandwidths, sr)
    else:
        t = np.arange(n_samples) / sr
        f0 = speaker.f0_hz * (1.0 + 0.02 * np.sin(2 * np.pi * 5.0 * t))
        phase = np.cumsum(f0) / sr
        source = 2.0 * (phase % 1.0) - 1.0 + breathiness * noise
        signal = _resonate(source, formants, spec.bandwidths, sr)
    rms = np.sqrt(np.mean(signal**2)) + 1e-12
    signal = spec.amplitude * signal / rms
    fade = min(int(0.005 * sr), n_samples // 2)
    if fade > 0:
        ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(fade) / fade)
        signal[:fade] *= ramp
        signal[-fade:] *= ramp[::-1]
    return signal


def synthesize_word(
    phones: list[str],
    speaker: SyntheticSpeaker,
    rng: np.random.Generator,
    sr: int = 16000,
) -> Waveform:
    """Concatenate phones at the speaker's tempo and scale to the speaker's gain."""
    scale, breathiness, jitter = SEVERITY_STYLE[speaker.profile.band]
    pieces = []
    for phone in phones:
        duration = PHONES[phone].duration_s * speaker.tempo * scale
        duration *= float(np.exp(jitter * rng.standard_normal()))
        n_samples = max(int(duration * sr), int(0.04 * sr))
        pieces.append(synthesize_phone(phone, n_samples, speaker, breathiness, rng, sr))
    audio = np.concatenate(pieces)
    audio = audio / (np.max(np.abs(audio)) + 1e-12)
    audio *= 0.5 * 10 ** (speaker.gain_db / 20)
    audio += 1e-4 * rng.standard_normal(len(audio))
    return Waveform(np.clip(audio, -1.0, 1.0), sr)


def make_speakers(config: SyntheticCorpusConfig) -> list[SyntheticSpeaker]:
    speakers = []
    for index in range(config.n_control + config.n_dysarthric):
        rng = np.random.default_rng([config.seed, 1, index])
        if index < config.n_control:
            sid = f"C{index + 1:02d}"
            profile = SpeakerProfile(
                speaker_id=sid, kind=SpeakerKind.CONTROL, band=SeverityBand.CONTROL
            )
        else:
            d = index - config.n_control
            sid = f"D{d + 1:02d}"
            profile = SpeakerProfile(
                speaker_id=sid,
                kind=SpeakerKind.DYSARTHRIC,
                band=DYSARTHRIC_BANDS[d % len(DYSARTHRIC_BANDS)],
            )
        speakers.append(
            SyntheticSpeaker(
                profile=profile,
                tempo=float(rng.uniform(0.92, 1.08)),
                gain_db=float(rng.uniform(-6.0, 0.0)),
                f0_hz=float(rng.uniform(100.0, 200.0)),
                warp=float(rng.uniform(0.92, 1.08)),
            )
        )
    return speakers


def generate_synthetic_corpus(
    out_dir: Path | str, config: SyntheticCorpusConfig | None = None
) -> tuple[list[UtteranceRecord], list[SpeakerProfile]]:
    """
    Write audio plus ``manifest.jsonl`` under ``out_dir``.

    Every block holds the common words and its own uncommon words, each
    spoken ``repetitions`` times by every speaker, so the B2 test block
    contains words never seen in B1/B3 training data.

    Returns:
        (records, profiles) as written to the manifest
    """
    config = config or SyntheticCorpusConfig()
    out_dir = Path(out_dir)
    sr = config.sample_rate_hz
    blocks = [Block.B1, Block.B2, Block.B3]
    vocabulary = build_vocabulary(
        config.common_words + len(blocks) * config.uncommon_words_per_block, seed=config.seed
    )
    common = vocabulary[: config.common_words]
    uncommon = vocabulary[config.common_words :]
    per_block = config.uncommon_words_per_block

    speakers = make_speakers(config)
    records = []
    for s_index, speaker in enumerate(speakers):
        for b_index, block in enumerate(blocks):
            block_words = common + uncommon[b_index * per_block : (b_index + 1) * per_block]
            for w_index, (word, phones) in enumerate(block_words):
                for rep in range(config.repetitions):
                    rng = np.random.default_rng([config.seed, 2, s_index, b_index, w_index, rep])
                    audio = synthesize_word(phones, speaker, rng, sr)
                    utt_id = f"{speaker.speaker_id}_{block.value}_{word}_{rep}"
                    rel = Path("wav") / f"{utt_id}.wav"
                    write_wav(out_dir / rel, audio)
                    records.append(
                        UtteranceRecord(
                            utt_id=utt_id,
                            speaker_id=speaker.speaker_id,
                            block=block,
                            word=word,
                            phones=phones,
                            audio_path=rel.as_posix(),
                            duration_s=audio.duration_s,
                        )
                    )

    profiles = [s.profile for s in speakers]
    write_manifest(records, profiles, out_dir / MANIFEST_NAME)
    logger.info(
        "synthetic corpus dir=%s speakers=%d utterances=%d words=%d",
        out_dir,
        len(profiles),
        len(records),
        len(vocabulary),
    )
    return records, profiles
