"""
Dysasr Speaker Transforms

Per-speaker LHUC/HUB/PAct parameters, their Gaussian variational posteriors
and the binary transform store.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from dysasr.core.container import read_container, write_container
from dysasr.core.models import AdaptMethod
from dysasr.net.hooks import Hook, hook_forward

TRANSFORM_MAGIC = b"DYST"
PRIOR_VAR = 0.001


# =============================================================================
# Posterior
# =============================================================================


@dataclass
class VariationalPosterior:
    """Diagonal Gaussian q(r) = N(mu, exp(log_var)) against the prior N(0, prior_var)."""

    mu: dict[int, np.ndarray]
    log_var: dict[int, np.ndarray]
    prior_var: float = PRIOR_VAR

    def __post_init__(self) -> None:
        if self.prior_var <= 0:
            raise ValueError(f"prior variance must be positive, got {self.prior_var}")
        if set(self.mu) != set(self.log_var):
            raise ValueError("mu and log_var cover different layers")
        for layer in self.mu:
            if self.mu[layer].shape != self.log_var[layer].shape:
                raise ValueError(f"layer {layer}: mu and log_var shapes differ")
            moments = np.concatenate([self.mu[layer].ravel(), self.log_var[layer].ravel()])
            if not np.all(np.isfinite(moments)):
                raise ValueError(f"layer {layer}: posterior moments are not finite")

    @classmethod
    def from_mean(
        cls, mu: dict[int, np.ndarray], log_var: float, prior_var: float = PRIOR_VAR
    ) -> "VariationalPosterior":
        return cls(
            mu={k: v.astype(np.float64).copy() for k, v in mu.items()},
            log_var={k: np.full(v.shape, float(log_var)) for k, v in mu.items()},
            prior_var=prior_var,
        )

    def copy(self) -> "VariationalPosterior":
        return VariationalPosterior(
            {k: v.copy() for k, v in self.mu.items()},
            {k: v.copy() for k, v in self.log_var.items()},
            self.prior_var,
        )

    def sample(self, eps: dict[int, np.ndarray]) -> dict[int, np.ndarray]:
        """r = mu + sigma * eps."""
        return {k: self.mu[k] + np.exp(0.5 * self.log_var[k]) * eps[k] for k in self.mu}

    def kl(self) -> float:
        """Closed-form KL(q || N(0, prior_var)), summed over every dimension."""
        p = self.prior_var
        total = 0.0
        for k in self.mu:
            var = np.exp(self.log_var[k])
            terms = var / p + self.mu[k] ** 2 / p - 1.0 - (self.log_var[k] - np.log(p))
            total += 0.5 * float(terms.sum())
        return total

    def kl_grad(self) -> tuple[dict[int, np.ndarray], dict[int, np.ndarray]]:
        """(d KL / d mu, d KL / d log_var)."""
        p = self.prior_var
        d_mu = {k: self.mu[k] / p for k in self.mu}
        d_lv = {k: 0.5 * (np.exp(self.log_var[k]) / p - 1.0) for k in self.mu}
        return d_mu, d_lv


def monte_carlo_kl(
    posterior: VariationalPosterior, n_samples: int, rng: np.random.Generator
) -> float:
    """Sampling estimate of KL(q || prior): mean of log q(r) - log p(r) over r ~ q."""
    if n_samples < 1:
        raise ValueError(f"need at least one sample, got {n_samples}")
    p = posterior.prior_var
    total = np.zeros(n_samples)
    for k in sorted(posterior.mu):
        mu, lv = posterior.mu[k], posterior.log_var[k]
        eps = rng.standard_normal((n_samples, *mu.shape))
        r = mu + np.exp(0.5 * lv) * eps
        log_q = -0.5 * (np.log(2 * np.pi) + lv + eps**2)
        log_p = -0.5 * (np.log(2 * np.pi * p) + r**2 / p)
        total += (log_q - log_p).reshape(n_samples, -1).sum(axis=1)
    return float(total.mean())


# =============================================================================
# Transforms
# =============================================================================


@dataclass
class SpeakerTransform:
    """Speaker dependent parameters for a contiguous set of layers."""

    speaker_id: str
    method: AdaptMethod
    params: dict[int, np.ndarray]
    posterior: VariationalPosterior | None = field(default=None, repr=False)

    @classmethod
    def neutral(
        cls, speaker_id: str, method: AdaptMethod, layers: list[int], widths: list[int]
    ) -> "SpeakerTransform":
        """r = 0, which leaves every method's layer output unchanged."""
        return cls(speaker_id, method, {layer: np.zeros(widths[layer]) for layer in layers})

    @property
    def layers(self) -> list[int]:
        return sorted(self.params)

    def hooks(self) -> dict[int, Hook]:
        return {layer: Hook(self.method, r) for layer, r in self.params.items()}

    def copy(self) -> "SpeakerTransform":
        return SpeakerTransform(
            self.speaker_id,
            self.method,
            {k: v.copy() for k, v in self.params.items()},
            self.posterior.copy() if self.posterior is not None else None,
        )


def apply_transform(t: SpeakerTransform, layer: int, activations: np.ndarray) -> np.ndarray:
    """
    Apply ``t`` to one layer's hook input.

    For LHUC and HUB ``activations`` is the activation output; for the PAct
    variants it is the pre-activation.

    Raises:
        KeyError: layer not adapted by ``t``
        ValueError: width mismatch
    """
    if layer not in t.params:
        raise KeyError(f"layer {layer} is not adapted; adapted layers: {t.layers}")
    r = t.params[layer]
    if activations.shape[-1] != r.shape[-1]:
        raise ValueError(
            f"layer {layer}: transform width {r.shape[-1]} does not match {activations.shape[-1]}"
        )
    return hook_forward(t.method, activations, r)


# =============================================================================
# Store
# =============================================================================


def save_transform_store(path: Path | str, transforms: dict[str, SpeakerTransform]) -> None:
    tensors: dict[str, np.ndarray] = {}
    speakers = {}
    for spk, t in sorted(transforms.items()):
        for layer, r in t.params.items():
            tensors[f"{spk}/{layer}/r"] = r
        if t.posterior is not None:
            for layer in t.posterior.mu:
                tensors[f"{spk}/{layer}/mu"] = t.posterior.mu[layer]
                tensors[f"{spk}/{layer}/log_var"] = t.posterior.log_var[layer]
        speakers[spk] = {
            "method": t.method.value,
            "layers": t.layers,
            "prior_var": t.posterior.prior_var if t.posterior is not None else None,
        }
    write_container(path, TRANSFORM_MAGIC, tensors, {"speakers": speakers})


def load_transform_store(path: Path | str) -> dict[str, SpeakerTransform]:
    tensors, meta = read_container(path, TRANSFORM_MAGIC)
    transforms = {}
    for spk, info in meta["speakers"].items():
        layers = info["layers"]
        params = {layer: tensors[f"{spk}/{layer}/r"] for layer in layers}
        posterior = None
        if info.get("prior_var") is not None:
            posterior = VariationalPosterior(
                mu={layer: tensors[f"{spk}/{layer}/mu"] for layer in layers},
                log_var={layer: tensors[f"{spk}/{layer}/log_var"] for layer in layers},
                prior_var=info["prior_var"],
            )
        transforms[spk] = SpeakerTransform(spk, AdaptMethod(info["method"]), params, posterior)
    return transforms
