"""
Dysasr Core Module

Configuration and record models, protocols, errors and the tensor container.
"""

from dysasr.core.container import read_container, write_container
from dysasr.core.errors import (
    AlignmentError,
    AugmentationError,
    ConfigError,
    DysasrError,
    ManifestError,
    MissingStageError,
    NumericalError,
)
from dysasr.core.models import (
    AdaptConfig,
    AdaptMethod,
    AugmentationPreset,
    Block,
    CorpusSplit,
    DecodeConfig,
    ExperimentConfig,
    FeatureConfig,
    FilterBankSpec,
    HybridDnnSpec,
    LayerKind,
    LayerSpec,
    ModelConfig,
    NasTrainConfig,
    PerturbationFactor,
    PerturbationMethod,
    PerturbationPolicy,
    PolicyScope,
    Provenance,
    ScoreReport,
    SearchConfig,
    SearchSpace,
    SeverityBand,
    SpeakerKind,
    SpeakerProfile,
    SplitProtocol,
    TrainConfig,
    UtteranceRecord,
    WidthPreset,
)
from dysasr.core.protocols import AcousticModel

__all__ = [
    # Errors
    "AlignmentError",
    "AugmentationError",
    "ConfigError",
    "DysasrError",
    "ManifestError",
    "MissingStageError",
    "NumericalError",
    # Protocols
    "AcousticModel",
    # Container
    "read_container",
    "write_container",
    # Models
    "AdaptConfig",
    "AdaptMethod",
    "AugmentationPreset",
    "Block",
    "CorpusSplit",
    "DecodeConfig",
    "ExperimentConfig",
    "FeatureConfig",
    "FilterBankSpec",
    "HybridDnnSpec",
    "LayerKind",
    "LayerSpec",
    "ModelConfig",
    "NasTrainConfig",
    "PerturbationFactor",
    "PerturbationMethod",
    "PerturbationPolicy",
    "PolicyScope",
    "Provenance",
    "ScoreReport",
    "SearchConfig",
    "SearchSpace",
    "SeverityBand",
    "SpeakerKind",
    "SpeakerProfile",
    "SplitProtocol",
    "TrainConfig",
    "UtteranceRecord",
    "WidthPreset",
]
