"""
Dysasr Perturbations

Speed perturbation (resampling), WSOLA tempo perturbation and the VTLP
frequency warp used by the filter bank.
"""

import numpy as np
from scipy.signal import correlate
from scipy.signal.windows import hann

from dysasr.core.models import FilterBankSpec, check_factor
from dysasr.dsp.audio import DEFAULT_TAPS, Waveform, resample

WSOLA_WINDOW_S = 0.030
WSOLA_TOLERANCE_S = 0.0075

# Relative slack when comparing normalized correlations for ties.
_TIE_RTOL = 1e-9


def speed_perturb(w: Waveform, factor: float, taps: int = DEFAULT_TAPS) -> Waveform:
    """
    Change duration and pitch together, like ``sox speed``.

    The samples are reinterpreted at ``rate * factor`` and resampled back
    to ``rate``, so duration scales by 1/factor and every frequency by
    factor. Factor 1.0 returns an exact copy.
    """
    check_factor(factor)
    rate = w.sample_rate_hz
    return Waveform(resample(w.samples, rate * factor, rate, taps=taps), rate)


def tempo_perturb(w: Waveform, factor: float) -> Waveform:
    """
    Change duration while keeping pitch, by waveform-similarity overlap-add.

    Frames of 30 ms are read every ``factor * 15`` ms and written every
    15 ms through a Hann window. Each frame may move by up to 7.5 ms from
    its nominal position; the shift maximizing normalized correlation with
    the natural continuation of the previous frame wins, the smallest
    shift on ties.

    Raises:
        ValueError: factor out of range or input shorter than one window
    """
    check_factor(factor)
    rate = w.sample_rate_hz
    n_win = int(round(WSOLA_WINDOW_S * rate))
    n_win += n_win % 2
    hop_out = n_win // 2
    hop_in = hop_out * factor
    tol = int(round(WSOLA_TOLERANCE_S * rate))
    x = w.samples
    if len(x) < n_win:
        raise ValueError(
            f"input of {len(x)} samples is shorter than one analysis window ({n_win})"
        )

    n_out = int(round(len(x) / factor))
    n_frames = int(np.ceil((n_out + n_win) / hop_out)) + 1
    front = n_win // 2 + tol
    back = int(np.ceil(n_frames * hop_in)) + 2 * n_win + 2 * tol
    xp = np.concatenate([np.zeros(front), x, np.zeros(back)])

    window = hann(n_win, sym=False)
    y = np.zeros(n_frames * hop_out + n_win)
    wsum = np.zeros_like(y)

    start = tol  # frame 0 sits at its nominal position
    for k in range(n_frames):
        if k > 0:
            nominal = int(round(k * hop_in)) + tol
            template = xp[prev + hop_out : prev + hop_out + n_win]
            start = nominal + _best_shift(xp[nominal - tol : nominal + tol + n_win], template, tol)
        out = k * hop_out
        y[out : out + n_win] += window * xp[start : start + n_win]
        wsum[out : out + n_win] += window
        prev = start

    covered = wsum > 1e-8
    y[covered] /= wsum[covered]
    y[~covered] = 0.0
    offset = n_win // 2
    return Waveform(y[offset : offset + n_out], rate)


def _best_shift(region: np.ndarray, template: np.ndarray, tol: int) -> int:
    """Shift in [-tol, tol] with the largest normalized correlation; smallest |shift| on ties."""
    n = len(template)
    raw = correlate(region, template, mode="valid")
    energy = np.concatenate([[0.0], np.cumsum(region**2)])
    local = energy[n:] - energy[:-n]
    score = raw / np.sqrt(np.maximum(local, 0.0) + 1e-12)
    best = score.max()
    if best <= 0.0:
        return 0
    shifts = np.arange(-tol, tol + 1)
    near = np.flatnonzero(score >= best - _TIE_RTOL * abs(best))
    return int(shifts[near[np.argmin(np.abs(shifts[near]))]])


def vtlp_warp_frequency(f_hz: float | np.ndarray, spec: FilterBankSpec) -> float | np.ndarray:
    """
    Piecewise-linear VTLP warp.

    Below the boundary frequency f maps to f * alpha; above it a straight
    segment joins (boundary, boundary * alpha) to (Nyquist, Nyquist), so
    both endpoints of the band stay fixed.
    """
    alpha = spec.vtlp_factor
    boundary = spec.boundary_hz
    nyquist = spec.nyquist_hz
    f = np.asarray(f_hz, dtype=np.float64)
    slope = (nyquist - boundary * alpha) / (nyquist - boundary)
    warped = np.where(f <= boundary, f * alpha, boundary * alpha + (f - boundary) * slope)
    if np.ndim(f_hz) == 0:
        return float(warped)
    return warped
