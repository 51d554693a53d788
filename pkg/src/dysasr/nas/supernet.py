"""
Dysasr Super-Network

A HybridDnn whose searched factored layers carry the widest candidate
projection. Candidate i of a layer is the leading ``w_i`` columns of the
projection matrix and the leading ``w_i`` rows of the affine matrix, so
every candidate shares its prefix with all wider ones.

The weighted sum over candidates

    h = sum_i lambda_i * (u A[:, :w_i]) B[:w_i] + b

equals a single product with per-column weights
``c_k = sum_{i : w_i > k} lambda_i`` applied to the projection output.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from dysasr.core.models import ForwardMode, HybridDnnSpec, SearchSpace
from dysasr.nas.gumbel import (
    ArchParams,
    GumbelSample,
    sample_gumbel_weights,
    softmax_backward,
    weight_entropy,
)
from dysasr.net.model import ForwardResult, HybridDnn

logger = logging.getLogger(__name__)


def column_weights(widths: list[int], weights: np.ndarray, max_width: int) -> np.ndarray:
    c = np.zeros(max_width)
    for w, lam in zip(widths, weights, strict=True):
        c[:w] += lam
    return c


def column_grad_to_weights(widths: list[int], grad: np.ndarray) -> np.ndarray:
    """Map dL/dc back to dL/dlambda: dlambda_i = sum_{k < w_i} dc_k."""
    return np.cumsum(grad)[np.asarray(widths) - 1]


def penalized_loss(
    task_loss: float,
    weights: dict[int, np.ndarray],
    param_counts: dict[int, list[float]],
    eta: float,
) -> float:
    """Task loss plus eta times the expected parameter count under the sampled weights."""
    if eta < 0:
        raise ValueError(f"eta must be non-negative, got {eta}")
    penalty = sum(float(weights[layer] @ np.asarray(param_counts[layer])) for layer in weights)
    return task_loss + eta * penalty


@dataclass
class ArchGradient:
    """Averages over the J samples of one batch."""

    log_alpha: dict[int, np.ndarray]
    params: dict[str, np.ndarray]
    task_loss: float
    loss: float
    penalty: float
    lambda_entropy: dict[int, float] = field(default_factory=dict)  # mean over the J samples


class SuperNet:
    """Weight-sharing super-network over per-layer projection widths."""

    def __init__(self, model: HybridDnn, space: SearchSpace):
        for layer in space.layers:
            proj_dim = model.spec.layers[layer].proj_dim
            if proj_dim != space.max_width(layer):
                raise ValueError(
                    f"layer {layer}: projection width {proj_dim} is not the widest "
                    f"candidate {space.max_width(layer)}"
                )
        self.model = model
        self.space = space

    @classmethod
    def build(cls, spec: HybridDnnSpec, space: SearchSpace, seed: int = 0) -> "SuperNet":
        widest = spec.with_proj_dims({layer: space.max_width(layer) for layer in space.layers})
        return cls(HybridDnn(widest, seed=seed), space)

    def candidate_params(self, layer: int, index: int) -> tuple[np.ndarray, np.ndarray]:
        """Views (not copies) of candidate ``index``'s projection and affine matrices."""
        w = self.space.per_layer_candidates[layer][index]
        p = self.model.params
        return p[f"L{layer}.A"][:, :w], p[f"L{layer}.B"][:w, :]

    def mix(self, weights: dict[int, np.ndarray]) -> dict[int, np.ndarray]:
        mixes = {}
        for layer in self.space.layers:
            widths = self.space.per_layer_candidates[layer]
            lam = weights.get(layer)
            if lam is None or len(lam) != len(widths):
                got = None if lam is None else len(lam)
                raise ValueError(f"layer {layer}: expected {len(widths)} weights, got {got}")
            mixes[layer] = column_weights(widths, lam, self.space.max_width(layer))
        return mixes

    def forward(
        self,
        x: np.ndarray,
        weights: dict[int, np.ndarray],
        mode: ForwardMode = ForwardMode.EVAL,
        rng: np.random.Generator | None = None,
        keep_cache: bool = True,
    ) -> ForwardResult:
        return self.model.forward(
            x, mode, rng=rng, mix=self.mix(weights), keep_cache=keep_cache
        )

    def arch_gradient(
        self,
        arch: ArchParams,
        x: np.ndarray,
        primary_targets: np.ndarray,
        aux_targets: np.ndarray,
        J: int,
        temperature: float,
        rng: np.random.Generator | None = None,
        eta: float = 0.0,
        mode: ForwardMode = ForwardMode.EVAL,
        draws: list[dict[int, np.ndarray]] | None = None,
    ) -> ArchGradient:
        """
        Gradient of the penalized loss w.r.t. log alpha and the shared weights,
        averaged over ``J`` Gumbel samples. Layers are sampled independently.

        Args:
            draws: Frozen Gumbel draws, one dict per sample (overrides ``rng``)
        """
        if J < 1:
            raise ValueError(f"J must be >= 1, got {J}")
        if draws is not None and len(draws) != J:
            raise ValueError(f"{len(draws)} frozen draws for J = {J}")
        counts = self.space.param_counts
        arch_grad = {layer: np.zeros_like(v) for layer, v in arch.log_alpha.items()}
        param_grad: dict[str, np.ndarray] = {}
        task_total = loss_total = penalty_total = 0.0
        entropy = {layer: 0.0 for layer in self.space.layers}
        for j in range(J):
            sample: GumbelSample = sample_gumbel_weights(
                arch, temperature, rng, None if draws is None else draws[j]
            )
            result = self.forward(x, sample.weights, mode, rng)
            task = self.model.loss(result, primary_targets, aux_targets)
            grads = self.model.backward(result, primary_targets, aux_targets)
            total = penalized_loss(task, sample.weights, counts, eta)
            task_total += task
            loss_total += total
            penalty_total += total - task
            for layer in self.space.layers:
                entropy[layer] += weight_entropy(sample.weights[layer])
                widths = self.space.per_layer_candidates[layer]
                d_lambda = column_grad_to_weights(widths, grads.mix[layer])
                d_lambda = d_lambda + eta * np.asarray(counts[layer])
                arch_grad[layer] += softmax_backward(sample.weights[layer], d_lambda, temperature)
            for key, g in grads.params.items():
                param_grad[key] = param_grad[key] + g if key in param_grad else g
        return ArchGradient(
            log_alpha={layer: g / J for layer, g in arch_grad.items()},
            params={key: g / J for key, g in param_grad.items()},
            task_loss=task_total / J,
            loss=loss_total / J,
            penalty=penalty_total / J,
            lambda_entropy={layer: h / J for layer, h in entropy.items()},
        )


def supernet_forward(
    supernet: SuperNet,
    weights: dict[int, np.ndarray],
    x: np.ndarray,
    mode: ForwardMode = ForwardMode.EVAL,
    rng: np.random.Generator | None = None,
) -> ForwardResult:
    return supernet.forward(x, weights, mode, rng)


def extract_subnet(supernet: SuperNet, widths: dict[int, int]) -> HybridDnn:
    """Standalone model at the given widths, inheriting the shared weight prefixes."""
    space = supernet.space
    for layer, w in widths.items():
        if w not in space.per_layer_candidates.get(layer, []):
            raise ValueError(f"layer {layer}: width {w} is not a candidate")
    model = supernet.model.copy()
    for layer, w in widths.items():
        model.params[f"L{layer}.A"] = model.params[f"L{layer}.A"][:, :w].copy()
        model.params[f"L{layer}.B"] = model.params[f"L{layer}.B"][:w, :].copy()
    model.spec = model.spec.with_proj_dims(widths)
    logger.info("extracted subnet widths=%s params=%d", widths, model.parameter_count())
    return model
