"""
Dysasr DSP Module

Waveform I/O, perturbations and acoustic feature extraction.
"""

from dysasr.dsp.archive import read_feature_archive, write_feature_archive
from dysasr.dsp.audio import Waveform, read_wav, resample, write_wav
from dysasr.dsp.features import (
    FeatureMatrix,
    FeatureNormalizer,
    append_deltas,
    extract_features,
    extract_pitch,
    mel_fbank,
    mel_filter_edges,
    pitch_track_hz,
    splice_context,
    splice_frames,
)
from dysasr.dsp.perturb import speed_perturb, tempo_perturb, vtlp_warp_frequency

__all__ = [
    "FeatureMatrix",
    "FeatureNormalizer",
    "Waveform",
    "append_deltas",
    "extract_features",
    "extract_pitch",
    "mel_fbank",
    "mel_filter_edges",
    "pitch_track_hz",
    "read_feature_archive",
    "read_wav",
    "resample",
    "speed_perturb",
    "splice_context",
    "splice_frames",
    "tempo_perturb",
    "vtlp_warp_frequency",
    "write_feature_archive",
    "write_wav",
]
