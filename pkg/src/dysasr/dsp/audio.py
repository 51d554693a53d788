"""
Dysasr Audio

Waveform container, PCM-16 WAV I/O and a band-limited windowed-sinc
resampler.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import soundfile as sf

logger = logging.getLogger(__name__)

DEFAULT_TAPS = 16
_CHUNK = 8192


@dataclass(frozen=True)
class Waveform:
    """Mono audio with samples nominally in [-1, 1]."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"waveform must be mono, got shape {samples.shape}")
        if self.sample_rate_hz <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate_hz}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("waveform contains non-finite samples")
        object.__setattr__(self, "samples", samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz

    def __len__(self) -> int:
        return len(self.samples)

    def __repr__(self) -> str:
        return f"Waveform({self.duration_s:.3f}s @ {self.sample_rate_hz} Hz)"


def read_wav(path: Path | str) -> Waveform:
    """Read a mono WAV file as float samples."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Audio not found: {path}")
    samples, rate = sf.read(str(path), dtype="float64", always_2d=False)
    if samples.ndim != 1:
        raise ValueError(f"{path}: expected mono audio, got {samples.shape[1]} channels")
    return Waveform(samples, int(rate))


def write_wav(path: Path | str, w: Waveform) -> None:
    """Write ``w`` as 16-bit PCM mono WAV, clipping to [-1, 1]."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    peak = float(np.max(np.abs(w.samples))) if len(w) else 0.0
    if peak > 1.0:
        logger.warning("path=%s peak=%.3f clipped", path, peak)
    sf.write(str(path), np.clip(w.samples, -1.0, 1.0), w.sample_rate_hz, subtype="PCM_16")


def resample(
    x: np.ndarray,
    src_rate: float,
    dst_rate: float,
    taps: int = DEFAULT_TAPS,
) -> np.ndarray:
    """
    Band-limited resampling with a Hann-windowed sinc kernel.

    Each output sample at input time t sums the input over |t - k| < taps
    with weights c * sinc(c * (t - k)) * hann((t - k) / taps), where the
    cutoff c = min(1, dst_rate / src_rate) suppresses aliasing when the
    rate goes down. Equal rates return an exact copy.

    Args:
        x: Input samples
        src_rate: Rate ``x`` is interpreted at (may be non-integer)
        dst_rate: Output rate
        taps: Kernel half-width in input samples

    Returns:
        round(len(x) * dst_rate / src_rate) samples
    """
    if src_rate <= 0 or dst_rate <= 0:
        raise ValueError(f"rates must be positive, got {src_rate} -> {dst_rate}")
    if taps < 1:
        raise ValueError(f"taps must be >= 1, got {taps}")
    x = np.asarray(x, dtype=np.float64)
    if src_rate == dst_rate:
        return x.copy()

    n_out = int(round(len(x) * dst_rate / src_rate))
    step = src_rate / dst_rate
    cutoff = min(1.0, dst_rate / src_rate)
    # Wider support keeps the same number of zero crossings after lowering the cutoff.
    half = int(np.ceil(taps / cutoff))
    offsets = np.arange(-half + 1, half + 1)
    padded = np.concatenate([np.zeros(half), x, np.zeros(half + 1)])

    out = np.empty(n_out)
    for start in range(0, n_out, _CHUNK):
        n = np.arange(start, min(start + _CHUNK, n_out))
        t = n * step
        base = np.floor(t).astype(np.int64)
        k = base[:, None] + offsets[None, :]
        u = t[:, None] - k
        kernel = cutoff * np.sinc(cutoff * u) * (0.5 + 0.5 * np.cos(np.pi * u / half))
        kernel[np.abs(u) >= half] = 0.0
        out[start : start + len(n)] = np.sum(kernel * padded[k + half], axis=1)
    return out
