"""
Dysasr Acoustic Features

Log Mel filter banks (with VTLP), regression deltas, a normalized
autocorrelation pitch tracker, context splicing and feature normalization.
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from dysasr.core.models import FeatureConfig, FilterBankSpec
from dysasr.dsp.audio import Waveform
from dysasr.dsp.perturb import vtlp_warp_frequency

PREEMPHASIS = 0.97
LOG_FLOOR = 1e-10
VOICING_THRESHOLD = 0.5
PITCH_NORM_HALF_WINDOW = 50


@dataclass
class FeatureMatrix:
    """T x D feature frames with one descriptor label per dimension."""

    frames: np.ndarray
    frame_shift_s: float
    descriptor: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.frames = np.atleast_2d(np.asarray(self.frames, dtype=np.float64))
        if len(self.descriptor) != self.frames.shape[1]:
            raise ValueError(
                f"descriptor has {len(self.descriptor)} labels for {self.frames.shape[1]} dims"
            )
        if not np.all(np.isfinite(self.frames)):
            raise ValueError("feature matrix contains non-finite values")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]

    def __len__(self) -> int:
        return self.n_frames

    def __repr__(self) -> str:
        return f"FeatureMatrix({self.n_frames}x{self.dim}, shift={self.frame_shift_s}s)"


def hz_to_mel(f: np.ndarray | float) -> np.ndarray:
    return 1127.0 * np.log1p(np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m: np.ndarray | float) -> np.ndarray:
    return 700.0 * np.expm1(np.asarray(m, dtype=np.float64) / 1127.0)


def frame_count(n_samples: int, spec: FilterBankSpec) -> int:
    """T = floor((len - window) / shift) + 1, or 0 when the input is too short."""
    win = spec.window_samples
    if n_samples < win:
        return 0
    return (n_samples - win) // spec.shift_samples + 1


def mel_filter_edges(spec: FilterBankSpec) -> np.ndarray:
    """(n_filters, 3) left/center/right edges in Hz, after the VTLP warp."""
    mel_points = np.linspace(hz_to_mel(spec.f_low_hz), hz_to_mel(spec.upper_hz), spec.n_filters + 2)
    hz_points = vtlp_warp_frequency(mel_to_hz(mel_points), spec)
    return np.stack([hz_points[:-2], hz_points[1:-1], hz_points[2:]], axis=1)


def mel_filter_matrix(spec: FilterBankSpec) -> np.ndarray:
    """(n_fft // 2 + 1, n_filters) triangular weights over FFT bins."""
    edges = mel_filter_edges(spec)
    bins = np.arange(spec.n_fft // 2 + 1) * spec.sample_rate_hz / spec.n_fft
    left, center, right = (edges[:, i][None, :] for i in range(3))
    f = bins[:, None]
    rising = (f - left) / np.maximum(center - left, 1e-12)
    falling = (right - f) / np.maximum(right - center, 1e-12)
    return np.clip(np.minimum(rising, falling), 0.0, None)


def mel_fbank(w: Waveform, spec: FilterBankSpec) -> FeatureMatrix:
    """
    Log Mel filter-bank energies.

    Frames are DC-removed, pre-emphasized and Hamming-windowed before the
    power spectrum. VTLP moves the filter edges through
    :func:`vtlp_warp_frequency`.

    Raises:
        ValueError: wrong sample rate or input shorter than one window
    """
    if w.sample_rate_hz != spec.sample_rate_hz:
        raise ValueError(
            f"waveform rate {w.sample_rate_hz} does not match filter bank rate "
            f"{spec.sample_rate_hz}"
        )
    n_frames = frame_count(len(w), spec)
    if n_frames == 0:
        raise ValueError(
            f"input of {len(w)} samples is shorter than one window ({spec.window_samples})"
        )
    win = spec.window_samples
    frames = sliding_window_view(w.samples, win)[:: spec.shift_samples][:n_frames].copy()
    frames -= frames.mean(axis=1, keepdims=True)
    frames[:, 1:] -= PREEMPHASIS * frames[:, :-1].copy()
    frames[:, 0] *= 1.0 - PREEMPHASIS
    frames *= np.hamming(win)[None, :]
    power = np.abs(np.fft.rfft(frames, n=spec.n_fft, axis=1)) ** 2
    energies = power @ mel_filter_matrix(spec)
    return FeatureMatrix(
        frames=np.log(np.maximum(energies, LOG_FLOOR)),
        frame_shift_s=spec.shift_s,
        descriptor=[f"fbank{i}" for i in range(spec.n_filters)],
    )


def delta(frames: np.ndarray, window: int) -> np.ndarray:
    """Regression deltas over +-window frames with edge replication."""
    if window < 1:
        raise ValueError(f"delta window must be >= 1, got {window}")
    n = len(frames)
    denominator = 2 * sum(i * i for i in range(1, window + 1))
    padded = np.pad(frames, ((window, window), (0, 0)), mode="edge")
    out = np.zeros_like(frames, dtype=np.float64)
    for i in range(1, window + 1):
        out += i * (padded[window + i : window + i + n] - padded[window - i : window - i + n])
    return out / denominator


def append_deltas(m: FeatureMatrix, window: int = 2) -> FeatureMatrix:
    """Append first-order deltas, doubling the dimension."""
    return FeatureMatrix(
        frames=np.hstack([m.frames, delta(m.frames, window)]),
        frame_shift_s=m.frame_shift_s,
        descriptor=m.descriptor + [f"delta-{label}" for label in m.descriptor],
    )


def _normalized_autocorrelation(frames: np.ndarray, max_lag: int) -> np.ndarray:
    """r[t, lag] = sum x[n] x[n+lag] / sqrt(E_head E_tail) for lag in [0, max_lag]."""
    length = frames.shape[1]
    n_fft = 1 << int(np.ceil(np.log2(2 * length)))
    spectrum = np.fft.rfft(frames, n=n_fft, axis=1)
    acf = np.fft.irfft(np.abs(spectrum) ** 2, n=n_fft, axis=1)[:, : max_lag + 1]
    energy = np.cumsum(frames**2, axis=1)
    lags = np.arange(max_lag + 1)
    head = energy[:, length - 1 - lags]
    tail = energy[:, -1:] - np.concatenate(
        [np.zeros((len(frames), 1)), energy[:, lags[1:] - 1]], axis=1
    )
    denom = np.sqrt(np.maximum(head * tail, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(denom > 1e-12, acf / denom, 0.0)
    return r


def _pick_lag(r: np.ndarray, lag_min: int, lag_max: int) -> tuple[float, float]:
    """Smallest local peak within 95% of the best correlation, refined by a parabola."""
    segment = r[lag_min : lag_max + 1]
    best = float(segment.max())
    if best <= 0.0:
        return 0.0, 0.0
    for offset, value in enumerate(segment):
        lag = lag_min + offset
        if value < 0.95 * best:
            continue
        if r[lag - 1] <= value and (lag + 1 >= len(r) or r[lag + 1] <= value):
            break
    else:
        lag = lag_min + int(np.argmax(segment))
    refined = float(lag)
    if 0 < lag < len(r) - 1:
        a, b, c = r[lag - 1], r[lag], r[lag + 1]
        curvature = a - 2 * b + c
        if curvature < 0:
            refined = lag + 0.5 * (a - c) / curvature
    return refined, best


def _frame_lags(w: Waveform, config: FeatureConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame (refined lag, peak correlation); lag 0 marks silence or no peak."""
    spec = config.filterbank
    rate = w.sample_rate_hz
    if rate < 8000:
        raise ValueError(f"pitch tracking needs at least 8 kHz audio, got {rate}")
    win = int(round(spec.window_s * rate))
    shift = int(round(spec.shift_s * rate))
    if len(w) < win:
        raise ValueError("input is shorter than one analysis window")
    n_frames = (len(w) - win) // shift + 1

    length = min(int(round(config.pitch_window_s * rate)), len(w))
    lag_min = max(2, int(np.floor(rate / config.pitch_f0_max_hz)))
    lag_max = min(int(np.ceil(rate / config.pitch_f0_min_hz)), length // 2)
    if lag_max <= lag_min:
        raise ValueError(f"pitch window of {length} samples cannot cover the f0 range")

    centers = np.arange(n_frames) * shift + win // 2
    starts = np.clip(centers - length // 2, 0, len(w) - length)
    frames = w.samples[starts[:, None] + np.arange(length)[None, :]]
    frames = frames - frames.mean(axis=1, keepdims=True)
    r = _normalized_autocorrelation(frames, lag_max + 1)
    silent = np.sum(frames**2, axis=1) < 1e-10 * length

    lags = np.zeros(n_frames)
    peaks = np.zeros(n_frames)
    for t in np.flatnonzero(~silent):
        lags[t], peaks[t] = _pick_lag(r[t], lag_min, lag_max)
    return lags, peaks


def pitch_track_hz(w: Waveform, config: FeatureConfig | None = None) -> np.ndarray:
    """Raw per-frame f0 estimate in Hz, 0 where no peak was found."""
    lags, _ = _frame_lags(w, config or FeatureConfig())
    out = np.zeros_like(lags)
    found = lags > 0
    out[found] = w.sample_rate_hz / lags[found]
    return out


def extract_pitch(w: Waveform, config: FeatureConfig | None = None) -> FeatureMatrix:
    """
    Pitch features: POV, normalized pitch, delta-log-pitch and their deltas.

    One frame per filter-bank frame. Each frame analyses a 50 ms window
    centered on the filter-bank frame center. POV is the clipped peak
    normalized autocorrelation; unvoiced frames take log f0 interpolated
    from voiced neighbours; normalized pitch subtracts a POV-weighted
    moving average of log f0 over +-50 frames.
    """
    config = config or FeatureConfig()
    lags, peaks = _frame_lags(w, config)
    n_frames = len(lags)
    pov = np.clip(peaks, 0.0, 1.0)
    log_f0 = np.zeros(n_frames)
    found = lags > 0
    log_f0[found] = np.log(w.sample_rate_hz / lags[found])

    voiced = (pov >= VOICING_THRESHOLD) & found
    if voiced.any():
        idx = np.flatnonzero(voiced)
        log_f0 = np.interp(np.arange(n_frames), idx, log_f0[idx])
    else:
        log_f0 = np.full(n_frames, 0.5 * np.log(config.pitch_f0_min_hz * config.pitch_f0_max_hz))

    weights = pov + 1e-3
    kernel = np.ones(2 * PITCH_NORM_HALF_WINDOW + 1)
    num = np.convolve(weights * log_f0, kernel, mode="same")
    den = np.convolve(weights, kernel, mode="same")
    norm_pitch = log_f0 - num / den

    base = np.stack([pov, norm_pitch, delta(log_f0[:, None], config.delta_window)[:, 0]], axis=1)
    return append_deltas(
        FeatureMatrix(
            frames=base,
            frame_shift_s=config.filterbank.shift_s,
            descriptor=["pov", "norm-pitch", "delta-log-pitch"],
        ),
        config.delta_window,
    )


def splice_frames(frames: np.ndarray, left: int, right: int) -> np.ndarray:
    """(T, D) -> (T, D * (left + right + 1)), oldest context first, edges replicated."""
    if left < 0 or right < 0:
        raise ValueError(f"context must be non-negative, got {left}/{right}")
    n = len(frames)
    padded = np.pad(frames, ((left, right), (0, 0)), mode="edge")
    return np.hstack(
        [padded[left + offset : left + offset + n] for offset in range(-left, right + 1)]
    )


def splice_context(m: FeatureMatrix, left: int, right: int) -> FeatureMatrix:
    """Stack each frame with ``left`` past and ``right`` future frames (edges replicated)."""
    labels = [
        label if offset == 0 else f"{label}@{offset:+d}"
        for offset in range(-left, right + 1)
        for label in m.descriptor
    ]
    return FeatureMatrix(
        frames=splice_frames(m.frames, left, right),
        frame_shift_s=m.frame_shift_s,
        descriptor=labels,
    )


def extract_features(
    w: Waveform, config: FeatureConfig, vtlp_factor: float = 1.0
) -> FeatureMatrix:
    """Filter banks plus deltas, optionally followed by the six pitch dimensions."""
    spec = config.filterbank.with_vtlp(vtlp_factor)
    fbank = append_deltas(mel_fbank(w, spec), config.delta_window)
    if not config.use_pitch:
        return fbank
    pitch = extract_pitch(w, config)
    return FeatureMatrix(
        frames=np.hstack([fbank.frames, pitch.frames]),
        frame_shift_s=fbank.frame_shift_s,
        descriptor=fbank.descriptor + pitch.descriptor,
    )


@dataclass
class FeatureNormalizer:
    """Global per-dimension mean/variance normalization."""

    mean: np.ndarray
    std: np.ndarray

    STD_FLOOR = 1e-5

    @classmethod
    def fit(cls, matrices: list[np.ndarray]) -> "FeatureNormalizer":
        if not matrices:
            raise ValueError("cannot fit a normalizer on zero matrices")
        stacked = np.vstack(matrices)
        return cls(
            mean=stacked.mean(axis=0),
            std=np.maximum(stacked.std(axis=0), cls.STD_FLOOR),
        )

    @classmethod
    def identity(cls, dim: int) -> "FeatureNormalizer":
        return cls(mean=np.zeros(dim), std=np.ones(dim))

    def apply(self, frames: np.ndarray) -> np.ndarray:
        return (frames - self.mean) / self.std

    @property
    def dim(self) -> int:
        return len(self.mean)
