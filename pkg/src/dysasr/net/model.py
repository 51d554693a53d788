"""
Dysasr Hybrid DNN

Feed-forward acoustic model with factored (projection + affine) layers,
batch normalization, dropout, additive skip connections, a sigmoid
bottleneck and two softmax heads: HMM states (primary) and monophones
(auxiliary). Reverse-mode gradients are written out by hand.

Per hidden layer the order is:
    affine -> batch norm -> [PAct hook] -> activation -> [LHUC/HUB hook]
    -> dropout -> + skip input
"""

import hashlib
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, log_softmax

from dysasr.core.models import (
    Activation,
    ForwardMode,
    HybridDnnSpec,
    LayerKind,
)
from dysasr.net.hooks import Hook, check_width, hook_backward, hook_forward

logger = logging.getLogger(__name__)

PRIMARY = "primary"
AUX = "aux"


# =============================================================================
# Caches and Gradients
# =============================================================================


@dataclass
class LayerCache:
    u: np.ndarray
    proj: np.ndarray | None
    col_weights: np.ndarray | None
    a: np.ndarray
    a_hat: np.ndarray | None
    inv_std: np.ndarray | None
    batch_mean: np.ndarray | None
    batch_var: np.ndarray | None
    batch_stats: bool
    z: np.ndarray
    z_hooked: np.ndarray
    act: np.ndarray
    act_hooked: np.ndarray
    mask: np.ndarray | None
    out: np.ndarray


@dataclass
class ForwardCache:
    x: np.ndarray
    layers: list[LayerCache]
    hooks: dict[int, Hook]
    mode: ForwardMode


@dataclass
class ForwardResult:
    """Log posteriors of both heads, plus the cache backward needs."""

    primary: np.ndarray
    aux: np.ndarray
    cache: ForwardCache | None = None

    @property
    def primary_posteriors(self) -> np.ndarray:
        return np.exp(self.primary)

    @property
    def aux_posteriors(self) -> np.ndarray:
        return np.exp(self.aux)


@dataclass
class Gradients:
    """Gradients of the loss w.r.t. parameters, hook parameters, width mixes and inputs."""

    params: dict[str, np.ndarray]
    hooks: dict[int, np.ndarray] = field(default_factory=dict)
    mix: dict[int, np.ndarray] = field(default_factory=dict)
    inputs: np.ndarray | None = None

    def is_finite(self) -> bool:
        arrays = [*self.params.values(), *self.hooks.values(), *self.mix.values()]
        return all(np.all(np.isfinite(a)) for a in arrays)


# =============================================================================
# Loss
# =============================================================================


def _check_targets(targets: np.ndarray, n_classes: int, n_rows: int, head: str) -> np.ndarray:
    targets = np.asarray(targets, dtype=np.int64)
    if targets.shape != (n_rows,):
        raise ValueError(f"{head} targets have shape {targets.shape}, expected ({n_rows},)")
    if n_rows and (targets.min() < 0 or targets.max() >= n_classes):
        raise IndexError(f"{head} target index out of range [0, {n_classes})")
    return targets


def cross_entropy(
    log_probs: np.ndarray, targets: np.ndarray, reduction: str = "mean", head: str = PRIMARY
) -> float:
    targets = _check_targets(targets, log_probs.shape[1], len(log_probs), head)
    nll = -log_probs[np.arange(len(targets)), targets]
    total = float(nll.sum())
    if reduction == "sum":
        return total
    return total / max(len(targets), 1)


def multitask_loss(
    primary_log_probs: np.ndarray,
    aux_log_probs: np.ndarray,
    primary_targets: np.ndarray,
    aux_targets: np.ndarray,
    mtl_weight: float,
    reduction: str = "mean",
) -> float:
    """L = CE_primary + mtl_weight * CE_aux."""
    primary = cross_entropy(primary_log_probs, primary_targets, reduction, PRIMARY)
    aux = cross_entropy(aux_log_probs, aux_targets, reduction, AUX)
    return primary + mtl_weight * aux


# =============================================================================
# Model
# =============================================================================


def _fit_width(v: np.ndarray, width: int) -> np.ndarray:
    """Truncate or zero-pad columns so a skip input matches the target width."""
    if v.shape[1] == width:
        return v
    if v.shape[1] > width:
        return v[:, :width]
    return np.pad(v, ((0, 0), (0, width - v.shape[1])))


def _fit_width_back(g: np.ndarray, src_width: int) -> np.ndarray:
    if g.shape[1] == src_width:
        return g
    if g.shape[1] > src_width:
        return g[:, :src_width]
    return np.pad(g, ((0, 0), (0, src_width - g.shape[1])))


def init_params(spec: HybridDnnSpec, seed: int = 0) -> dict[str, np.ndarray]:
    """He-style initialization; biases and BN shifts zero, BN scales one."""
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    for index, layer in enumerate(spec.layers):
        fan_in = spec.layer_input_dim(index)
        gain = 2.0 if layer.activation == Activation.RELU else 1.0
        if layer.kind == LayerKind.FACTORED_LINEAR:
            params[f"L{index}.A"] = rng.normal(0.0, np.sqrt(1.0 / fan_in), (fan_in, layer.proj_dim))
            params[f"L{index}.B"] = rng.normal(
                0.0, np.sqrt(gain / layer.proj_dim), (layer.proj_dim, layer.width)
            )
        else:
            params[f"L{index}.W"] = rng.normal(0.0, np.sqrt(gain / fan_in), (fan_in, layer.width))
        params[f"L{index}.b"] = np.zeros(layer.width)
        if layer.batch_norm:
            params[f"L{index}.gamma"] = np.ones(layer.width)
            params[f"L{index}.beta"] = np.zeros(layer.width)
    width = spec.bottleneck_width
    for head, size in ((PRIMARY, spec.n_states), (AUX, spec.n_phones)):
        params[f"{head}.W"] = rng.normal(0.0, np.sqrt(1.0 / width), (width, size))
        params[f"{head}.b"] = np.zeros(size)
    return params


def init_bn_state(spec: HybridDnnSpec) -> dict[str, np.ndarray]:
    state = {}
    for index, layer in enumerate(spec.layers):
        if layer.batch_norm:
            state[f"L{index}.running_mean"] = np.zeros(layer.width)
            state[f"L{index}.running_var"] = np.ones(layer.width)
    return state


class HybridDnn:
    """
    Hybrid DNN acoustic model.

    ``forward`` is a pure function of the inputs, parameters and running
    BN statistics; batch statistics are only folded into the running
    ones by :meth:`update_bn_stats`.
    """

    def __init__(
        self,
        spec: HybridDnnSpec,
        params: dict[str, np.ndarray] | None = None,
        bn_state: dict[str, np.ndarray] | None = None,
        seed: int = 0,
    ):
        self.spec = spec
        self.params = params if params is not None else init_params(spec, seed)
        self.bn_state = bn_state if bn_state is not None else init_bn_state(spec)

    @property
    def n_states(self) -> int:
        return self.spec.n_states

    @property
    def n_phones(self) -> int:
        return self.spec.n_phones

    @property
    def input_dim(self) -> int:
        return self.spec.input_dim

    def layer_widths(self) -> list[int]:
        return [layer.width for layer in self.spec.layers]

    def parameter_count(self) -> int:
        """Trainable parameters (BN running statistics excluded)."""
        return int(sum(p.size for p in self.params.values()))

    def copy(self) -> "HybridDnn":
        return HybridDnn(
            self.spec,
            {k: v.copy() for k, v in self.params.items()},
            {k: v.copy() for k, v in self.bn_state.items()},
        )

    def checksum(self) -> str:
        """SHA-256 over parameters and BN statistics, in sorted key order."""
        digest = hashlib.sha256()
        for store in (self.params, self.bn_state):
            for key in sorted(store):
                digest.update(key.encode())
                digest.update(np.ascontiguousarray(store[key]).tobytes())
        return digest.hexdigest()

    # -------------------------------------------------------------------------
    # Forward
    # -------------------------------------------------------------------------

    def forward(
        self,
        x: np.ndarray,
        mode: ForwardMode = ForwardMode.EVAL,
        rng: np.random.Generator | None = None,
        hooks: dict[int, Hook] | None = None,
        mix: dict[int, np.ndarray] | None = None,
        freeze_bn: bool = False,
        keep_cache: bool = True,
    ) -> ForwardResult:
        """
        Run the network.

        Args:
            x: (N, input_dim) spliced, normalized frames
            mode: TRAIN enables dropout and (unless ``freeze_bn``) batch
                statistics; EVAL uses running statistics and no dropout
            rng: Dropout randomness (TRAIN only)
            hooks: Layer index -> speaker transform
            mix: Layer index -> per-column weights of a factored layer's
                projection (width search); absent means all ones
            freeze_bn: Use running BN statistics even in TRAIN mode
            keep_cache: Keep intermediate values for :meth:`backward`

        Returns:
            ForwardResult with log posteriors of both heads
        """
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.spec.input_dim:
            raise ValueError(
                f"input has shape {x.shape}, expected (N, {self.spec.input_dim})"
            )
        hooks = hooks or {}
        mix = mix or {}
        train = mode == ForwardMode.TRAIN
        if train and rng is None:
            rng = np.random.default_rng(0)
        for index, hook in hooks.items():
            if not 0 <= index < len(self.spec.layers):
                raise ValueError(f"hook on layer {index}, model has {len(self.spec.layers)}")
            check_width(hook, self.spec.layers[index].width, index)

        p = self.params
        caches: list[LayerCache] = []
        outs: list[np.ndarray] = []
        u = x
        for index, layer in enumerate(self.spec.layers):
            tag = f"L{index}"
            proj = col = None
            if layer.kind == LayerKind.FACTORED_LINEAR:
                proj = u @ p[f"{tag}.A"]
                col = mix.get(index)
                if col is not None:
                    col = np.asarray(col, dtype=np.float64)
                    if col.shape != (layer.proj_dim,):
                        raise ValueError(
                            f"layer {index}: mix has shape {col.shape}, "
                            f"expected ({layer.proj_dim},)"
                        )
                    a = (proj * col) @ p[f"{tag}.B"] + p[f"{tag}.b"]
                else:
                    a = proj @ p[f"{tag}.B"] + p[f"{tag}.b"]
            else:
                a = u @ p[f"{tag}.W"] + p[f"{tag}.b"]

            a_hat = inv_std = mean = var = None
            batch_stats = False
            if layer.batch_norm:
                if train and not freeze_bn:
                    mean = a.mean(axis=0)
                    var = a.var(axis=0)
                    batch_stats = True
                else:
                    mean = self.bn_state[f"{tag}.running_mean"]
                    var = self.bn_state[f"{tag}.running_var"]
                inv_std = 1.0 / np.sqrt(var + self.spec.bn_eps)
                a_hat = (a - mean) * inv_std
                z = p[f"{tag}.gamma"] * a_hat + p[f"{tag}.beta"]
            else:
                z = a

            hook = hooks.get(index)
            z_hooked = hook_forward(hook.method, z, hook.r) if hook and hook.pre_activation else z

            if layer.activation == Activation.RELU:
                act = np.maximum(z_hooked, 0.0)
            elif layer.activation == Activation.SIGMOID:
                act = expit(z_hooked)
            else:
                act = z_hooked

            if hook and not hook.pre_activation:
                act_hooked = hook_forward(hook.method, act, hook.r)
            else:
                act_hooked = act

            mask = None
            if train and layer.dropout_p > 0.0:
                keep = 1.0 - layer.dropout_p
                mask = (rng.random(act_hooked.shape) < keep) / keep
                out = act_hooked * mask
            else:
                out = act_hooked

            if layer.skip_from is not None:
                out = out + _fit_width(outs[layer.skip_from], layer.width)

            outs.append(out)
            if keep_cache:
                caches.append(
                    LayerCache(
                        u=u,
                        proj=proj,
                        col_weights=col,
                        a=a,
                        a_hat=a_hat,
                        inv_std=inv_std,
                        batch_mean=mean if batch_stats else None,
                        batch_var=var if batch_stats else None,
                        batch_stats=batch_stats,
                        z=z,
                        z_hooked=z_hooked,
                        act=act,
                        act_hooked=act_hooked,
                        mask=mask,
                        out=out,
                    )
                )
            u = out

        primary = log_softmax(u @ p[f"{PRIMARY}.W"] + p[f"{PRIMARY}.b"], axis=1)
        aux = log_softmax(u @ p[f"{AUX}.W"] + p[f"{AUX}.b"], axis=1)
        cache = ForwardCache(x=x, layers=caches, hooks=hooks, mode=mode) if keep_cache else None
        return ForwardResult(primary=primary, aux=aux, cache=cache)

    def log_posteriors(self, frames: np.ndarray, hooks: dict | None = None) -> np.ndarray:
        """Eval-mode primary log posteriors (the AcousticModel protocol)."""
        return self.forward(frames, ForwardMode.EVAL, hooks=hooks, keep_cache=False).primary

    def loss(
        self,
        result: ForwardResult,
        primary_targets: np.ndarray,
        aux_targets: np.ndarray,
        reduction: str = "mean",
        mtl_weight: float | None = None,
    ) -> float:
        weight = self.spec.mtl_weight if mtl_weight is None else mtl_weight
        return multitask_loss(
            result.primary, result.aux, primary_targets, aux_targets, weight, reduction
        )

    # -------------------------------------------------------------------------
    # Backward
    # -------------------------------------------------------------------------

    def backward(
        self,
        result: ForwardResult,
        primary_targets: np.ndarray,
        aux_targets: np.ndarray,
        reduction: str = "mean",
        mtl_weight: float | None = None,
    ) -> Gradients:
        """
        Gradients of the multitask loss of ``result``.

        Raises:
            ValueError: ``result`` was produced without a cache
        """
        cache = result.cache
        if cache is None:
            raise ValueError("missing forward cache: call forward(..., keep_cache=True)")
        weight = self.spec.mtl_weight if mtl_weight is None else mtl_weight
        n = len(cache.x)
        scale = 1.0 if reduction == "sum" else 1.0 / max(n, 1)
        rows = np.arange(n)
        p = self.params

        pt = _check_targets(primary_targets, self.spec.n_states, n, PRIMARY)
        at = _check_targets(aux_targets, self.spec.n_phones, n, AUX)
        d_primary = np.exp(result.primary)
        d_primary[rows, pt] -= 1.0
        d_primary *= scale
        d_aux = np.exp(result.aux)
        d_aux[rows, at] -= 1.0
        d_aux *= scale * weight

        bottleneck = cache.layers[-1].out
        grads: dict[str, np.ndarray] = {
            f"{PRIMARY}.W": bottleneck.T @ d_primary,
            f"{PRIMARY}.b": d_primary.sum(axis=0),
            f"{AUX}.W": bottleneck.T @ d_aux,
            f"{AUX}.b": d_aux.sum(axis=0),
        }
        hook_grads: dict[int, np.ndarray] = {}
        mix_grads: dict[int, np.ndarray] = {}

        d_out = [np.zeros_like(c.out) for c in cache.layers]
        d_out[-1] = d_primary @ p[f"{PRIMARY}.W"].T + d_aux @ p[f"{AUX}.W"].T
        d_input = None

        for index in range(len(self.spec.layers) - 1, -1, -1):
            layer = self.spec.layers[index]
            c = cache.layers[index]
            tag = f"L{index}"
            g = d_out[index]

            if layer.skip_from is not None:
                src = layer.skip_from
                d_out[src] = d_out[src] + _fit_width_back(g, self.spec.layers[src].width)

            if c.mask is not None:
                g = g * c.mask

            hook = cache.hooks.get(index)
            if hook and not hook.pre_activation:
                g, hook_grads[index] = hook_backward(hook.method, c.act, hook.r, g)

            if layer.activation == Activation.RELU:
                g = g * (c.z_hooked > 0.0)
            elif layer.activation == Activation.SIGMOID:
                g = g * c.act * (1.0 - c.act)

            if hook and hook.pre_activation:
                g, hook_grads[index] = hook_backward(hook.method, c.z, hook.r, g)

            if layer.batch_norm:
                grads[f"{tag}.gamma"] = (g * c.a_hat).sum(axis=0)
                grads[f"{tag}.beta"] = g.sum(axis=0)
                d_hat = g * p[f"{tag}.gamma"]
                if c.batch_stats:
                    g = (c.inv_std / n) * (
                        n * d_hat - d_hat.sum(axis=0) - c.a_hat * (d_hat * c.a_hat).sum(axis=0)
                    )
                else:
                    g = d_hat * c.inv_std

            grads[f"{tag}.b"] = g.sum(axis=0)
            if layer.kind == LayerKind.FACTORED_LINEAR:
                B = p[f"{tag}.B"]
                if c.col_weights is not None:
                    grads[f"{tag}.B"] = (c.proj * c.col_weights).T @ g
                    d_weighted = g @ B.T
                    mix_grads[index] = (d_weighted * c.proj).sum(axis=0)
                    d_proj = d_weighted * c.col_weights
                else:
                    grads[f"{tag}.B"] = c.proj.T @ g
                    d_proj = g @ B.T
                grads[f"{tag}.A"] = c.u.T @ d_proj
                d_u = d_proj @ p[f"{tag}.A"].T
            else:
                grads[f"{tag}.W"] = c.u.T @ g
                d_u = g @ p[f"{tag}.W"].T

            if index > 0:
                d_out[index - 1] = d_out[index - 1] + d_u
            else:
                d_input = d_u

        return Gradients(params=grads, hooks=hook_grads, mix=mix_grads, inputs=d_input)

    # -------------------------------------------------------------------------
    # Batch norm statistics
    # -------------------------------------------------------------------------

    def update_bn_stats(self, cache: ForwardCache) -> None:
        """Fold the batch statistics of a TRAIN forward into the running ones."""
        m = self.spec.bn_momentum
        for index, c in enumerate(cache.layers):
            if not c.batch_stats:
                continue
            tag = f"L{index}"
            mean_key, var_key = f"{tag}.running_mean", f"{tag}.running_var"
            self.bn_state[mean_key] = m * self.bn_state[mean_key] + (1.0 - m) * c.batch_mean
            self.bn_state[var_key] = m * self.bn_state[var_key] + (1.0 - m) * c.batch_var

    def __repr__(self) -> str:
        widths = "-".join(str(w) for w in self.layer_widths())
        return (
            f"HybridDnn(in={self.spec.input_dim}, layers={widths}, states={self.spec.n_states}, "
            f"phones={self.spec.n_phones}, params={self.parameter_count()})"
        )
