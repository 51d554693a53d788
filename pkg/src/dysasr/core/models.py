"""
Dysasr Core Models

Pydantic models for corpus records, front-end settings, network shapes,
search/adaptation/decoding configuration, score reports and experiments.
"""

import hashlib
import math
from enum import Enum
from pathlib import Path
from typing import Any

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# Admissible range for every perturbation factor (speed, tempo, VTLP).
FACTOR_MIN = 0.8
FACTOR_MAX = 1.25


def check_factor(value: float) -> float:
    """Raise ValueError unless ``value`` is an admissible perturbation factor."""
    if not (FACTOR_MIN <= value <= FACTOR_MAX):
        raise ValueError(f"perturbation factor {value} outside [{FACTOR_MIN}, {FACTOR_MAX}]")
    return value


# =============================================================================
# Enums
# =============================================================================


class Block(str, Enum):
    """Recording block of a UASpeech-style corpus."""

    B1 = "B1"
    B2 = "B2"
    B3 = "B3"


class SpeakerKind(str, Enum):
    CONTROL = "control"
    DYSARTHRIC = "dysarthric"


class SeverityBand(str, Enum):
    """Intelligibility group of a speaker."""

    VERY_LOW = "very_low"
    LOW = "low"
    MILD = "mild"
    HIGH = "high"
    CONTROL = "control"


class ProvenanceKind(str, Enum):
    ORIGINAL = "original"
    AUGMENTED = "augmented"


class PerturbationMethod(str, Enum):
    VTLP = "vtlp"
    TEMPO = "tempo"
    SPEED = "speed"


class PolicyScope(str, Enum):
    """Which utterances a perturbation policy reads from."""

    CONTROL_TO_DYS = "control_to_dys"
    DYS_GLOBAL = "dys_global"


class SplitProtocol(str, Enum):
    PAPER = "paper"
    CUSTOM = "custom"


class LayerKind(str, Enum):
    FACTORED_LINEAR = "factored_linear"
    LINEAR = "linear"
    BOTTLENECK = "bottleneck"


class Activation(str, Enum):
    RELU = "relu"
    SIGMOID = "sigmoid"
    NONE = "none"


class OptimizerKind(str, Enum):
    SGD = "sgd"
    SGD_MOMENTUM = "sgd_momentum"


class AnnealSchedule(str, Enum):
    GEOMETRIC = "geometric"
    LINEAR = "linear"


class AdaptMethod(str, Enum):
    """Speaker dependent transform applied inside the hidden layers."""

    LHUC = "lhuc"
    HUB = "hub"
    PACT_SCALE = "pact_scale"
    PACT_BIAS = "pact_bias"


class ForwardMode(str, Enum):
    TRAIN = "train"
    EVAL = "eval"


class ModelSource(str, Enum):
    """Which stage's checkpoint a downstream stage consumes."""

    TRAIN = "train"
    SEARCH = "search"
    ADAPT = "adapt"


# =============================================================================
# Corpus Models
# =============================================================================


class Provenance(BaseModel):
    """Where an utterance came from: the corpus itself or a perturbation."""

    kind: ProvenanceKind = ProvenanceKind.ORIGINAL
    method: PerturbationMethod | None = None
    factor: float | None = None
    source_utt_id: str | None = None
    target_speaker: str | None = None

    @model_validator(mode="after")
    def _augmented_needs_source(self) -> "Provenance":
        if self.kind == ProvenanceKind.AUGMENTED:
            if self.method is None or self.factor is None or self.source_utt_id is None:
                raise ValueError("augmented provenance needs method, factor and source_utt_id")
        return self


class UtteranceRecord(BaseModel):
    """One manifest row: audio, single-word transcript, speaker, block."""

    utt_id: str
    speaker_id: str
    block: Block
    word: str
    phones: list[str] = Field(min_length=1)
    audio_path: str
    duration_s: float = Field(gt=0)
    provenance: Provenance = Field(default_factory=Provenance)

    @property
    def is_augmented(self) -> bool:
        return self.provenance.kind == ProvenanceKind.AUGMENTED

    @property
    def augmentation_key(self) -> tuple[str, str, float] | None:
        """(source utterance, method, rounded factor) for augmented rows."""
        p = self.provenance
        if p.kind != ProvenanceKind.AUGMENTED:
            return None
        return (p.source_utt_id, p.method.value, round(p.factor, 4))


class SpeakerProfile(BaseModel):
    """Speaker metadata: control or dysarthric, and intelligibility band."""

    speaker_id: str
    kind: SpeakerKind
    band: SeverityBand
    mean_phone_duration_s: float | None = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _band_matches_kind(self) -> "SpeakerProfile":
        is_control_band = self.band == SeverityBand.CONTROL
        if (self.kind == SpeakerKind.CONTROL) != is_control_band:
            raise ValueError(
                f"speaker {self.speaker_id}: control speakers (and only they) carry band=control"
            )
        return self


class CorpusSplit(BaseModel):
    """Train/test utterance ids; ``discarded`` holds rows neither side uses."""

    train: list[str] = Field(default_factory=list)
    test: list[str] = Field(default_factory=list)
    discarded: list[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def _disjoint(self) -> "CorpusSplit":
        overlap = set(self.train) & set(self.test)
        if overlap:
            raise ValueError(f"train and test overlap: {sorted(overlap)[:5]}")
        return self


class CustomSplit(BaseModel):
    """Block/kind selection for the custom split protocol."""

    train_blocks: list[Block] = Field(default_factory=lambda: [Block.B1, Block.B3])
    test_blocks: list[Block] = Field(default_factory=lambda: [Block.B2])
    test_kinds: list[SpeakerKind] = Field(
        default_factory=lambda: [SpeakerKind.CONTROL, SpeakerKind.DYSARTHRIC]
    )


# =============================================================================
# Front-end Models
# =============================================================================


class FilterBankSpec(BaseModel):
    """Mel filter bank layout, framing and optional VTLP warp."""

    sample_rate_hz: int = Field(default=16000, gt=0)
    n_filters: int = Field(default=40, gt=0)
    f_low_hz: float = Field(default=20.0, ge=0)
    f_high_hz: float | None = None  # None: Nyquist
    n_fft: int = Field(default=512, gt=0)
    window_s: float = Field(default=0.025, gt=0)
    shift_s: float = Field(default=0.010, gt=0)
    vtlp_factor: float = 1.0
    vtlp_boundary_hz: float | None = None  # None: 0.6 * Nyquist

    @field_validator("vtlp_factor")
    @classmethod
    def _factor_range(cls, v: float) -> float:
        return check_factor(v)

    @model_validator(mode="after")
    def _band_edges(self) -> "FilterBankSpec":
        if not (0 <= self.f_low_hz < self.upper_hz <= self.nyquist_hz):
            raise ValueError(
                f"need 0 <= f_low < f_high <= Nyquist, got {self.f_low_hz}, {self.upper_hz}"
            )
        if self.boundary_hz * max(self.vtlp_factor, 1.0) >= self.nyquist_hz:
            raise ValueError("VTLP boundary times factor must stay below Nyquist")
        if self.window_samples > self.n_fft:
            raise ValueError(f"window of {self.window_samples} samples exceeds n_fft={self.n_fft}")
        return self

    @property
    def nyquist_hz(self) -> float:
        return self.sample_rate_hz / 2.0

    @property
    def upper_hz(self) -> float:
        return self.nyquist_hz if self.f_high_hz is None else self.f_high_hz

    @property
    def boundary_hz(self) -> float:
        if self.vtlp_boundary_hz is None:
            return 0.6 * self.nyquist_hz
        return self.vtlp_boundary_hz

    @property
    def window_samples(self) -> int:
        return int(round(self.window_s * self.sample_rate_hz))

    @property
    def shift_samples(self) -> int:
        return int(round(self.shift_s * self.sample_rate_hz))

    def with_vtlp(self, factor: float) -> "FilterBankSpec":
        return self.model_copy(update={"vtlp_factor": check_factor(factor)})


class FeatureConfig(BaseModel):
    """Complete acoustic front-end: filter banks, deltas, pitch, splicing."""

    filterbank: FilterBankSpec = Field(default_factory=FilterBankSpec)
    delta_window: int = Field(default=2, ge=1)
    use_pitch: bool = True
    pitch_f0_min_hz: float = Field(default=60.0, gt=0)
    pitch_f0_max_hz: float = Field(default=400.0, gt=0)
    pitch_window_s: float = Field(default=0.05, gt=0)
    splice_left: int = Field(default=4, ge=0)
    splice_right: int = Field(default=4, ge=0)

    @property
    def frame_dim(self) -> int:
        return 2 * self.filterbank.n_filters + (6 if self.use_pitch else 0)

    @property
    def input_dim(self) -> int:
        return self.frame_dim * (self.splice_left + self.splice_right + 1)


# =============================================================================
# Augmentation Models
# =============================================================================


class PerturbationFactor(BaseModel):
    """Speaker level factor F = t_bar_control / t_speaker."""

    speaker_id: str
    value: float = Field(gt=0)
    t_bar_control_s: float = Field(gt=0)
    t_speaker_s: float = Field(gt=0)

    @model_validator(mode="after")
    def _is_ratio(self) -> "PerturbationFactor":
        if not math.isclose(self.value, self.t_bar_control_s / self.t_speaker_s, rel_tol=1e-9):
            raise ValueError("factor value must equal t_bar_control_s / t_speaker_s")
        return self


class PolicyTemplate(BaseModel):
    """A policy as written in a preset file, before speaker factors exist."""

    method: PerturbationMethod
    scope: PolicyScope
    factors: list[float] = Field(default_factory=list)
    jitter: list[float] = Field(default_factory=lambda: [0.0])

    def resolve(self, speaker_factors: dict[str, float] | None = None) -> "PerturbationPolicy":
        """Bind speaker factors (only needed for control_to_dys scope)."""
        if self.scope == PolicyScope.CONTROL_TO_DYS:
            return PerturbationPolicy(
                method=self.method,
                scope=self.scope,
                speaker_factors=dict(speaker_factors or {}),
                jitter=list(self.jitter),
            )
        return PerturbationPolicy(method=self.method, scope=self.scope, factors=list(self.factors))


class PerturbationPolicy(BaseModel):
    """
    One augmentation policy.

    Global scope perturbs each dysarthric utterance once per factor. The
    control_to_dys scope perturbs each control utterance once per jitter
    offset, around the factor of the dysarthric speaker it is assigned to.
    """

    method: PerturbationMethod
    scope: PolicyScope
    factors: list[float] = Field(default_factory=list)
    speaker_factors: dict[str, float] = Field(default_factory=dict)
    jitter: list[float] = Field(default_factory=lambda: [0.0])

    @model_validator(mode="after")
    def _factors_valid(self) -> "PerturbationPolicy":
        if self.scope == PolicyScope.DYS_GLOBAL:
            if not self.factors:
                raise ValueError("global policy needs a nonempty factor list")
            for f in self.factors:
                check_factor(f)
        else:
            if not self.speaker_factors:
                raise ValueError("control_to_dys policy needs speaker factors")
            if not self.jitter:
                raise ValueError("control_to_dys policy needs at least one jitter offset")
            for f in self.speaker_factors.values():
                for j in self.jitter:
                    check_factor(f - abs(j))
                    check_factor(f + abs(j))
        return self

    @property
    def copies_per_utterance(self) -> int:
        if self.scope == PolicyScope.DYS_GLOBAL:
            return len(self.factors)
        return len(self.jitter)


class AugmentationPreset(BaseModel):
    """Named list of policy templates (one row of the augmentation table)."""

    name: str
    description: str = ""
    policies: list[PolicyTemplate] = Field(default_factory=list)


# =============================================================================
# Network Models
# =============================================================================


class LayerSpec(BaseModel):
    """One hidden layer of the hybrid DNN."""

    kind: LayerKind
    width: int = Field(gt=0)
    proj_dim: int | None = Field(default=None, gt=0)
    activation: Activation = Activation.RELU
    batch_norm: bool = True
    dropout_p: float = Field(default=0.0, ge=0.0, lt=1.0)
    skip_from: int | None = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _factored_shape(self) -> "LayerSpec":
        if self.kind == LayerKind.FACTORED_LINEAR:
            if self.proj_dim is None or self.proj_dim >= self.width:
                raise ValueError(
                    f"factored layer needs proj_dim < width, got {self.proj_dim} / {self.width}"
                )
        elif self.proj_dim is not None:
            raise ValueError(f"{self.kind.value} layers take no proj_dim")
        return self


class HybridDnnSpec(BaseModel):
    """Shape of the hybrid DNN: hidden layers plus primary (state) and aux (phone) heads."""

    input_dim: int = Field(gt=0)
    layers: list[LayerSpec]
    n_states: int = Field(gt=0)
    n_phones: int = Field(gt=0)
    mtl_weight: float = Field(default=0.5, ge=0.0)
    bn_momentum: float = Field(default=0.9, ge=0.0, lt=1.0)
    bn_eps: float = Field(default=1e-5, gt=0)

    @model_validator(mode="after")
    def _topology(self) -> "HybridDnnSpec":
        kinds = [layer.kind for layer in self.layers]
        if kinds.count(LayerKind.BOTTLENECK) != 1 or kinds[-1] != LayerKind.BOTTLENECK:
            raise ValueError("exactly one bottleneck layer is required, placed last")
        for index, layer in enumerate(self.layers):
            if layer.skip_from is not None and layer.skip_from >= index:
                raise ValueError(f"layer {index}: skip_from must precede the layer")
        return self

    @property
    def bottleneck_width(self) -> int:
        return self.layers[-1].width

    def layer_input_dim(self, index: int) -> int:
        return self.input_dim if index == 0 else self.layers[index - 1].width

    def with_proj_dims(self, proj_dims: dict[int, int]) -> "HybridDnnSpec":
        """Copy with the projection width of some factored layers replaced."""
        layers = [
            layer.model_copy(update={"proj_dim": proj_dims[i]}) if i in proj_dims else layer
            for i, layer in enumerate(self.layers)
        ]
        return self.model_copy(update={"layers": layers})


class ModelConfig(BaseModel):
    """Desk-scale shrink of the manually designed 7-layer DNN."""

    n_layers: int = Field(default=7, ge=2)
    hidden_width: int = Field(default=256, gt=0)
    proj_dim: int = Field(default=32, gt=0)
    bottleneck_width: int = Field(default=64, gt=0)
    n_factored: int = Field(default=5, ge=0)
    skips: list[tuple[int, int]] = Field(default_factory=lambda: [(0, 2), (3, 5)])
    dropout_p: float = Field(default=0.2, ge=0.0, lt=1.0)
    mtl_weight: float = Field(default=0.5, ge=0.0)
    bottleneck_activation: Activation = Activation.SIGMOID

    def build_spec(self, input_dim: int, n_states: int, n_phones: int) -> HybridDnnSpec:
        """Expand into a concrete layer list for the given input/output sizes."""
        if self.n_factored > self.n_layers - 1:
            raise ValueError("at most n_layers - 1 layers can be factored")
        skip_target = {dst: src for src, dst in self.skips}
        layers = []
        for index in range(self.n_layers - 1):
            factored = index < self.n_factored
            layers.append(
                LayerSpec(
                    kind=LayerKind.FACTORED_LINEAR if factored else LayerKind.LINEAR,
                    width=self.hidden_width,
                    proj_dim=self.proj_dim if factored else None,
                    activation=Activation.RELU,
                    batch_norm=True,
                    dropout_p=self.dropout_p,
                    skip_from=skip_target.get(index),
                )
            )
        layers.append(
            LayerSpec(
                kind=LayerKind.BOTTLENECK,
                width=self.bottleneck_width,
                activation=self.bottleneck_activation,
                batch_norm=False,
                dropout_p=0.0,
                skip_from=skip_target.get(self.n_layers - 1),
            )
        )
        return HybridDnnSpec(
            input_dim=input_dim,
            layers=layers,
            n_states=n_states,
            n_phones=n_phones,
            mtl_weight=self.mtl_weight,
        )


class TrainConfig(BaseModel):
    """Cross-entropy training settings."""

    lr: float = Field(default=0.05, ge=0.0)
    batch: int = Field(default=256, gt=0)
    epochs: int = Field(default=8, ge=0)
    seed: int = 0
    optimizer: OptimizerKind = OptimizerKind.SGD_MOMENTUM
    momentum: float = Field(default=0.9, ge=0.0, lt=1.0)
    lr_decay: float = Field(default=0.5, gt=0.0, le=1.0)
    decay_every: int = Field(default=4, gt=0)
    realign_passes: int = Field(default=2, ge=0)

    @field_validator("lr")
    @classmethod
    def _lr_finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("lr must be finite")
        return v


# =============================================================================
# Search Models
# =============================================================================


class NasTrainConfig(BaseModel):
    """Gumbel-Softmax search settings."""

    J: int = Field(default=4, ge=1)
    eta: float = Field(default=0.21, ge=0.0)
    T_start: float = Field(default=1.0, gt=0.0, le=1.0)
    T_end: float = Field(default=0.03, gt=0.0, le=1.0)
    anneal: AnnealSchedule = AnnealSchedule.GEOMETRIC
    seed: int = 0
    epochs: int = Field(default=6, ge=1)
    arch_lr: float = Field(default=0.05, ge=0.0)
    count_scale: float = Field(default=1e-6, gt=0.0)  # parameter counts in millions

    @model_validator(mode="after")
    def _temperatures(self) -> "NasTrainConfig":
        if self.T_end > self.T_start:
            raise ValueError("T_end must not exceed T_start")
        return self


class SearchSpace(BaseModel):
    """Candidate projection widths per searched layer and their parameter counts."""

    per_layer_candidates: dict[int, list[int]]
    param_counts: dict[int, list[float]]

    @model_validator(mode="after")
    def _consistent(self) -> "SearchSpace":
        if not self.per_layer_candidates:
            raise ValueError("search space is empty")
        for layer, widths in self.per_layer_candidates.items():
            if not widths or any(b <= a for a, b in zip(widths, widths[1:], strict=False)):
                raise ValueError(f"layer {layer}: widths must be nonempty and strictly increasing")
            if len(self.param_counts.get(layer, [])) != len(widths):
                raise ValueError(f"layer {layer}: one parameter count per candidate required")
        return self

    @classmethod
    def build(
        cls,
        spec: HybridDnnSpec,
        candidates: list[int],
        layers: list[int] | None = None,
        count_scale: float = 1e-6,
    ) -> "SearchSpace":
        """
        Search space over the factored layers of ``spec``.

        A candidate of width w costs in * w + w * out parameters, scaled by ``count_scale``; the
        bias is shared by every candidate and left out.
        """
        if layers is None:
            layers = [i for i, la in enumerate(spec.layers) if la.kind == LayerKind.FACTORED_LINEAR]
        per_layer: dict[int, list[int]] = {}
        counts: dict[int, list[float]] = {}
        for index in layers:
            layer = spec.layers[index]
            if layer.kind != LayerKind.FACTORED_LINEAR:
                raise ValueError(f"layer {index} is not factored and cannot be searched")
            widths = sorted(w for w in set(candidates) if w < layer.width)
            if not widths:
                raise ValueError(f"layer {index}: no candidate narrower than width {layer.width}")
            fan_in = spec.layer_input_dim(index)
            per_layer[index] = widths
            counts[index] = [(fan_in * w + w * layer.width) * count_scale for w in widths]
        return cls(per_layer_candidates=per_layer, param_counts=counts)

    @property
    def layers(self) -> list[int]:
        return sorted(self.per_layer_candidates)

    def max_width(self, layer: int) -> int:
        return self.per_layer_candidates[layer][-1]


class WidthPreset(str, Enum):
    """Bundled candidate projection widths, chosen for 2000-unit hidden layers."""

    EIGHT = "widths-8"
    SIX = "widths-6"


WIDTH_PRESETS = {
    WidthPreset.EIGHT: [25, 50, 80, 100, 120, 160, 200, 240],
    WidthPreset.SIX: [80, 120, 160, 200, 240, 300],
}
PRESET_REFERENCE_WIDTH = 2000


class SearchConfig(BaseModel):
    enabled: bool = True
    candidates: list[int] = Field(default_factory=lambda: [8, 16, 24, 32, 48, 64, 96, 128])
    preset: WidthPreset | None = None  # overrides candidates
    layers: list[int] | None = None
    nas: NasTrainConfig = Field(default_factory=NasTrainConfig)
    inherit_weights: bool = False
    retrain: TrainConfig | None = None

    def resolve_candidates(self, hidden_width: int) -> list[int]:
        """Explicit candidates, or the preset scaled to ``hidden_width``."""
        if self.preset is None:
            return list(self.candidates)
        scale = hidden_width / PRESET_REFERENCE_WIDTH
        return sorted({max(1, round(w * scale)) for w in WIDTH_PRESETS[self.preset]})


# =============================================================================
# Adaptation Models
# =============================================================================


class AdaptationBudget(BaseModel):
    """How much of a speaker's data adaptation may use."""

    fraction: float | None = Field(default=None, gt=0.0, le=1.0)
    utterances: int | None = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _one_of(self) -> "AdaptationBudget":
        if self.fraction is not None and self.utterances is not None:
            raise ValueError("set either fraction or utterances, not both")
        return self

    @property
    def label(self) -> str:
        if self.utterances is not None:
            return f"{self.utterances}utt"
        if self.fraction is not None:
            return f"{self.fraction * 100:g}%"
        return "all"


# Rapid adaptation budgets, largest first.
RAPID_ADAPTATION_BUDGETS = [
    AdaptationBudget(fraction=0.8),
    AdaptationBudget(fraction=0.4),
    AdaptationBudget(fraction=0.1),
    AdaptationBudget(fraction=0.01),
    AdaptationBudget(utterances=1),
]


class AdaptConfig(BaseModel):
    """Speaker adaptive training and test-time adaptation settings."""

    method: AdaptMethod = AdaptMethod.LHUC
    layers: list[int] = Field(default_factory=lambda: list(range(7)))
    sat: bool = True
    sat_epochs: int = Field(default=4, ge=0)
    sat_lr: float = Field(default=0.02, ge=0.0)
    transform_lr: float = Field(default=0.5, ge=0.0)
    steps: int = Field(default=30, ge=0)
    bayesian: bool = False
    n_mc: int = Field(default=1, ge=1)
    prior_var: float = Field(default=0.001, gt=0.0)
    init_log_var: float | None = None  # None: log(prior_var)
    budget: AdaptationBudget = Field(default_factory=AdaptationBudget)
    seed: int = 0
    base: ModelSource = ModelSource.TRAIN

    @field_validator("layers")
    @classmethod
    def _contiguous(cls, v: list[int]) -> list[int]:
        if not v:
            raise ValueError("adaptation needs at least one layer")
        if sorted(v) != list(range(min(v), max(v) + 1)):
            raise ValueError("adapted layers must be contiguous")
        return sorted(v)


# =============================================================================
# Decoding and Scoring Models
# =============================================================================


class DecodeConfig(BaseModel):
    states_per_phone: int = Field(default=3, ge=1)
    self_loop_prob: float = Field(default=0.5, gt=0.0, lt=1.0)
    acoustic_scale: float = Field(default=1.0, gt=0.0)
    nbest: int = Field(default=5, ge=1)
    loop_prob: float = Field(default=0.0, ge=0.0, lt=1.0)
    silence_word: str | None = None
    silence_phone: str = "sil"
    prior_floor: float = Field(default=1e-8, gt=0.0)
    model: ModelSource = ModelSource.TRAIN
    use_transforms: bool = True


class GroupScore(BaseModel):
    """Error counts for one group of scored utterances."""

    utterances: int = 0
    words: int = 0
    subs: int = 0
    dels: int = 0
    ins: int = 0

    @property
    def errors(self) -> int:
        return self.subs + self.dels + self.ins

    @property
    def wer(self) -> float:
        if self.words == 0:
            return 100.0 * self.ins if self.ins else 0.0
        return 100.0 * self.errors / self.words

    def add(self, other: "GroupScore") -> "GroupScore":
        return GroupScore(
            utterances=self.utterances + other.utterances,
            words=self.words + other.words,
            subs=self.subs + other.subs,
            dels=self.dels + other.dels,
            ins=self.ins + other.ins,
        )


class SignificanceResult(BaseModel):
    """Outcome of a matched-pairs segment error test between two systems."""

    model_config = ConfigDict(ser_json_inf_nan="constants")

    system_a: str
    system_b: str
    n_segments: int
    mean_difference: float
    z: float
    p_value: float
    alpha: float
    significant: bool


class ScoreReport(BaseModel):
    """Score summary per severity band with exact counts for re-aggregation."""

    system: str
    utterances: int
    overall: GroupScore
    bands: dict[str, GroupScore] = Field(default_factory=dict)
    seen: GroupScore = Field(default_factory=GroupScore)
    unseen: GroupScore = Field(default_factory=GroupScore)
    oracle: GroupScore | None = None
    significance: list[SignificanceResult] = Field(default_factory=list)

    @property
    def wer(self) -> float:
        return self.overall.wer

    @property
    def oracle_wer(self) -> float | None:
        return None if self.oracle is None else self.oracle.wer


class ScoreConfig(BaseModel):
    alpha: float = Field(default=0.05, gt=0.0, lt=1.0)
    compare_with: list[Path] = Field(default_factory=list)
    characters: bool = False


# =============================================================================
# Experiment Configuration
# =============================================================================


class SyntheticCorpusConfig(BaseModel):
    """Shape of the generated stand-in corpus."""

    n_control: int = Field(default=1, ge=0)
    n_dysarthric: int = Field(default=1, ge=0)
    common_words: int = Field(default=6, ge=1)
    uncommon_words_per_block: int = Field(default=2, ge=0)
    repetitions: int = Field(default=2, ge=1)
    sample_rate_hz: int = 16000
    seed: int = 0


class CorpusConfig(BaseModel):
    manifest: Path | None = None
    protocol: SplitProtocol = SplitProtocol.PAPER
    custom: CustomSplit = Field(default_factory=CustomSplit)
    synthetic: SyntheticCorpusConfig | None = None

    @model_validator(mode="after")
    def _has_source(self) -> "CorpusConfig":
        if self.manifest is None and self.synthetic is None:
            raise ValueError("corpus needs a manifest path or a synthetic corpus section")
        return self


class AugmentationConfig(BaseModel):
    presets: list[str] = Field(default_factory=list)
    preset_file: Path | None = None
    clip_speaker_factors: bool = True


class ExperimentConfig(BaseModel):
    """Everything one experiment directory is built from."""

    name: str
    output_dir: Path = Path("exp")
    seed: int = 0
    jobs: int = Field(default=1, ge=1)
    strict: bool = False
    corpus: CorpusConfig
    features: FeatureConfig = Field(default_factory=FeatureConfig)
    augmentation: AugmentationConfig = Field(default_factory=AugmentationConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    training: TrainConfig = Field(default_factory=TrainConfig)
    search: SearchConfig = Field(default_factory=SearchConfig)
    adaptation: AdaptConfig = Field(default_factory=AdaptConfig)
    decoding: DecodeConfig = Field(default_factory=DecodeConfig)
    scoring: ScoreConfig = Field(default_factory=ScoreConfig)

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @classmethod
    def load(cls, path: Path | str, **overrides: Any) -> "ExperimentConfig":
        """Load a YAML experiment file; relative paths resolve against its folder."""
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Config not found: {path}")
        with open(path) as f:
            data = yaml.safe_load(f) or {}
        data.update({k: v for k, v in overrides.items() if v is not None})
        config = cls.model_validate(data)
        return config.resolve_paths(path.parent)

    def resolve_paths(self, root: Path) -> "ExperimentConfig":
        def _abs(p: Path | None) -> Path | None:
            return None if p is None or p.is_absolute() else root / p

        corpus = self.corpus
        if corpus.manifest is not None and not corpus.manifest.is_absolute():
            corpus = corpus.model_copy(update={"manifest": _abs(corpus.manifest)})
        aug = self.augmentation
        if aug.preset_file is not None and not aug.preset_file.is_absolute():
            aug = aug.model_copy(update={"preset_file": _abs(aug.preset_file)})
        compare = [p if p.is_absolute() else root / p for p in self.scoring.compare_with]
        scoring = self.scoring.model_copy(update={"compare_with": compare})
        out = self.output_dir if self.output_dir.is_absolute() else root / self.output_dir
        return self.model_copy(
            update={"corpus": corpus, "augmentation": aug, "scoring": scoring, "output_dir": out}
        )

    @property
    def experiment_dir(self) -> Path:
        return self.output_dir / self.name

    def section_hash(self, *sections: str) -> str:
        """Stable hash of the named config sections (plus the seed)."""
        payload = {"seed": self.seed}
        for name in sections:
            payload[name] = getattr(self, name).model_dump(mode="json")
        text = yaml.safe_dump(payload, sort_keys=True)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()
