"""
Dysasr - Dysarthric Speech Recognition Toolkit

Hybrid DNN-HMM recognition of dysarthric speech with data augmentation,
neural architecture search over layer widths and Bayesian speaker
adaptation.
"""

__version__ = "0.1.0"

from dysasr.core import (
    AcousticModel,
    AdaptConfig,
    DysasrError,
    ExperimentConfig,
    FeatureConfig,
    HybridDnnSpec,
    ScoreReport,
    SearchSpace,
    SpeakerProfile,
    UtteranceRecord,
)

__all__ = [
    "__version__",
    # Protocols
    "AcousticModel",
    # Errors
    "DysasrError",
    # Models
    "AdaptConfig",
    "ExperimentConfig",
    "FeatureConfig",
    "HybridDnnSpec",
    "ScoreReport",
    "SearchSpace",
    "SpeakerProfile",
    "UtteranceRecord",
]
