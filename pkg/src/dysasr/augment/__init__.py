"""
Dysasr Augment Module

Speaker perturbation factors, augmentation policies and presets.
"""

from dysasr.augment.factors import (
    clip_speaker_factors,
    estimate_phone_durations,
    estimate_speaker_factor,
    phone_durations_from_states,
    profiles_with_durations,
    speaker_mean_durations,
)
from dysasr.augment.policy import (
    AugmentationEngine,
    AugmentationFailure,
    AugmentationJob,
    apply_policy,
    build_augmented_manifest,
    check_unique,
    plan_jobs,
)
from dysasr.augment.presets import PresetRegistry, get_preset_registry

__all__ = [
    "AugmentationEngine",
    "AugmentationFailure",
    "AugmentationJob",
    "PresetRegistry",
    "apply_policy",
    "build_augmented_manifest",
    "check_unique",
    "clip_speaker_factors",
    "estimate_phone_durations",
    "estimate_speaker_factor",
    "get_preset_registry",
    "phone_durations_from_states",
    "plan_jobs",
    "profiles_with_durations",
    "speaker_mean_durations",
]
