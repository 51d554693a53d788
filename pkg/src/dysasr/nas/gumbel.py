"""
Dysasr Gumbel-Softmax

Architecture parameters over candidate widths, Gumbel-Softmax sampling,
temperature annealing and architecture derivation.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from dysasr.core.models import AnnealSchedule, NasTrainConfig, SearchSpace

EPS = 1e-20


@dataclass
class ArchParams:
    """log alpha per searched layer, one entry per candidate width."""

    log_alpha: dict[int, np.ndarray]

    def __post_init__(self) -> None:
        for layer, values in self.log_alpha.items():
            if not np.all(np.isfinite(values)):
                raise ValueError(f"layer {layer}: log alpha is not finite")

    @classmethod
    def uniform(cls, space: SearchSpace) -> "ArchParams":
        return cls({layer: np.zeros(len(w)) for layer, w in space.per_layer_candidates.items()})

    def copy(self) -> "ArchParams":
        return ArchParams({k: v.copy() for k, v in self.log_alpha.items()})

    def probabilities(self) -> dict[int, np.ndarray]:
        """alpha normalized per layer (the noise-free, T = 1 weights)."""
        return {layer: softmax(v) for layer, v in self.log_alpha.items()}


@dataclass
class GumbelSample:
    gumbel: dict[int, np.ndarray]
    weights: dict[int, np.ndarray]
    temperature: float


def draw_gumbel(arch: ArchParams, rng: np.random.Generator) -> dict[int, np.ndarray]:
    """G = -log(-log U), U ~ Uniform(0, 1), independently per layer."""
    return {
        layer: -np.log(-np.log(rng.random(len(v)) + EPS) + EPS)
        for layer, v in sorted(arch.log_alpha.items())
    }


def sample_gumbel_weights(
    arch: ArchParams,
    temperature: float,
    rng: np.random.Generator | None = None,
    gumbel: dict[int, np.ndarray] | None = None,
) -> GumbelSample:
    """
    lambda = softmax((log alpha + G) / T) per layer.

    Args:
        arch: Architecture parameters
        temperature: T > 0
        rng: Source of fresh Gumbel noise
        gumbel: Frozen draws to reuse instead of sampling

    Returns:
        GumbelSample holding the draws and the resulting weights
    """
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    if gumbel is None:
        if rng is None:
            raise ValueError("either rng or frozen gumbel draws are required")
        gumbel = draw_gumbel(arch, rng)
    weights = {
        layer: softmax((v + gumbel[layer]) / temperature)
        for layer, v in arch.log_alpha.items()
    }
    return GumbelSample(gumbel=gumbel, weights=weights, temperature=temperature)


def softmax_backward(weights: np.ndarray, grad: np.ndarray, temperature: float) -> np.ndarray:
    """d/d log alpha_k = sum_i grad_i * lambda_i (1[i = k] - lambda_k) / T."""
    return weights * (grad - float(grad @ weights)) / temperature


def anneal_temperature(step: int, total_steps: int, config: NasTrainConfig) -> float:
    """Temperature at ``step`` of ``total_steps``, from T_start down to T_end."""
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    if total_steps == 0:
        return config.T_start
    progress = step / total_steps
    if config.anneal == AnnealSchedule.LINEAR:
        return config.T_start + (config.T_end - config.T_start) * progress
    return config.T_start * (config.T_end / config.T_start) ** progress


def derive_architecture(arch: ArchParams, space: SearchSpace) -> dict[int, int]:
    """Width with the largest log alpha per layer; ties go to the smaller width."""
    return {
        layer: space.per_layer_candidates[layer][int(np.argmax(arch.log_alpha[layer]))]
        for layer in space.layers
    }


def weight_entropy(weights: np.ndarray) -> float:
    p = weights[weights > 0]
    return float(-(p * np.log(p)).sum())
