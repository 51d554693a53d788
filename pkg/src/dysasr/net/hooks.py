"""
Speaker transform hooks applied inside hidden layers.

LHUC and HUB act on the activation output; the two PAct variants act on
the pre-activation. Parameters ``r`` are either one vector per layer
(shape (width,)) or one row per frame (shape (N, width)) for batches that
mix speakers.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from dysasr.core.models import AdaptMethod

PRE_ACTIVATION = {AdaptMethod.PACT_SCALE, AdaptMethod.PACT_BIAS}


@dataclass
class Hook:
    """Transform parameters for one layer."""

    method: AdaptMethod
    r: np.ndarray

    @property
    def pre_activation(self) -> bool:
        return self.method in PRE_ACTIVATION


def check_width(hook: Hook, width: int, layer: int) -> None:
    if hook.r.shape[-1] != width:
        raise ValueError(
            f"layer {layer}: transform width {hook.r.shape[-1]} does not match layer width {width}"
        )


def hook_forward(method: AdaptMethod, x: np.ndarray, r: np.ndarray) -> np.ndarray:
    if method == AdaptMethod.LHUC:
        return x * (2.0 * expit(r))
    if method == AdaptMethod.PACT_SCALE:
        return x * np.exp(r)
    return x + r


def hook_backward(
    method: AdaptMethod, x: np.ndarray, r: np.ndarray, grad: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """
    Gradients of a hook.

    Returns:
        (d input, d r) where d r keeps the shape of ``r`` (rows are summed
        when ``r`` is a single vector)
    """
    if method == AdaptMethod.LHUC:
        sig = expit(r)
        dx = grad * (2.0 * sig)
        dr = grad * x * 2.0 * sig * (1.0 - sig)
    elif method == AdaptMethod.PACT_SCALE:
        scale = np.exp(r)
        dx = grad * scale
        dr = grad * x * scale
    else:
        dx = grad
        dr = grad.copy()
    if r.ndim == 1:
        dr = dr.sum(axis=0)
    return dx, dr
