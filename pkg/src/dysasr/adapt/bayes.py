"""
Dysasr Bayesian Adaptation

Variational learning of speaker transforms: a diagonal Gaussian posterior
trained on the ELBO with reparameterized samples, decoded through its mean.
"""

import logging
import math
import zlib
from dataclasses import dataclass

import numpy as np

from dysasr.adapt.transforms import SpeakerTransform, VariationalPosterior
from dysasr.core.models import AdaptConfig, AdaptMethod, ForwardMode
from dysasr.net.hooks import Hook
from dysasr.net.model import HybridDnn
from dysasr.net.train import FrameDataset

logger = logging.getLogger(__name__)


@dataclass
class ElboResult:
    """Negative ELBO and its gradients w.r.t. the posterior moments."""

    loss: float
    nll: float
    kl: float
    d_mu: dict[int, np.ndarray]
    d_log_var: dict[int, np.ndarray]


def draw_eps(
    posterior: VariationalPosterior, n_mc: int, rng: np.random.Generator
) -> list[dict[int, np.ndarray]]:
    return [
        {k: rng.standard_normal(posterior.mu[k].shape) for k in sorted(posterior.mu)}
        for _ in range(n_mc)
    ]


def elbo_loss(
    model: HybridDnn,
    posterior: VariationalPosterior,
    method: AdaptMethod,
    x: np.ndarray,
    primary_targets: np.ndarray,
    aux_targets: np.ndarray,
    n_mc: int = 1,
    rng: np.random.Generator | None = None,
    eps: list[dict[int, np.ndarray]] | None = None,
) -> ElboResult:
    """
    -E_q[log p(C | O, r)] + KL(q || prior).

    The expectation is estimated with ``n_mc`` samples r = mu + sigma * eps;
    the log likelihood is the frame-summed multitask loss under a frozen
    (eval mode) model.

    Args:
        eps: Frozen standard normal draws, one dict per sample (overrides ``rng``)
    """
    if n_mc < 1:
        raise ValueError(f"n_mc must be >= 1, got {n_mc}")
    if eps is None:
        if rng is None:
            raise ValueError("either rng or frozen eps draws are required")
        eps = draw_eps(posterior, n_mc, rng)
    elif len(eps) != n_mc:
        raise ValueError(f"{len(eps)} frozen draws for n_mc = {n_mc}")

    kl = posterior.kl()
    d_mu, d_lv = posterior.kl_grad()
    nll = 0.0
    for draw in eps:
        r = posterior.sample(draw)
        hooks = {k: Hook(method, v) for k, v in r.items()}
        result = model.forward(x, ForwardMode.EVAL, hooks=hooks)
        nll += model.loss(result, primary_targets, aux_targets, reduction="sum") / n_mc
        grads = model.backward(result, primary_targets, aux_targets, reduction="sum")
        for k, d_r in grads.hooks.items():
            sigma = np.exp(0.5 * posterior.log_var[k])
            d_mu[k] = d_mu[k] + d_r / n_mc
            d_lv[k] = d_lv[k] + d_r * draw[k] * 0.5 * sigma / n_mc
    return ElboResult(loss=nll + kl, nll=nll, kl=kl, d_mu=d_mu, d_log_var=d_lv)


def posterior_mean_inference(
    posterior: VariationalPosterior, speaker_id: str, method: AdaptMethod
) -> SpeakerTransform:
    """Decode-time transform r = mu (the expectation of the posterior)."""
    return SpeakerTransform(
        speaker_id,
        method,
        {k: v.copy() for k, v in posterior.mu.items()},
        posterior.copy(),
    )


def speaker_rng(seed: int, speaker_id: str) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(speaker_id.encode())])


def bayes_adapt(
    model: HybridDnn,
    dataset: FrameDataset,
    config: AdaptConfig,
    init: SpeakerTransform,
    steps: int | None = None,
    frame_shift_s: float = 0.010,
) -> tuple[SpeakerTransform, list[dict]]:
    """
    Variational adaptation of ``init``'s layers on one speaker's data.

    The posterior mean starts at ``init``'s parameters and the log variance
    at ``config.init_log_var`` (default: the prior's). Gradients are
    divided by the number of frames; the mean takes a proximal step on its
    Gaussian prior term so short budgets stay stable.

    Returns:
        (posterior-mean transform, adaptation log records)
    """
    if len(dataset) == 0:
        raise ValueError(f"{init.speaker_id}: no adaptation data")
    steps = config.steps if steps is None else steps
    log_var = config.init_log_var if config.init_log_var is not None else math.log(config.prior_var)
    posterior = VariationalPosterior.from_mean(init.params, log_var, config.prior_var)
    rng = speaker_rng(config.seed, init.speaker_id)
    n = len(dataset)
    data_s = round(n * frame_shift_s, 4)
    log = []
    for step in range(steps + 1):
        elbo = elbo_loss(
            model,
            posterior,
            init.method,
            dataset.features,
            dataset.primary,
            dataset.aux,
            config.n_mc,
            rng,
        )
        log.append(
            {
                "speaker": init.speaker_id,
                "step": step,
                "loss": round(elbo.loss / n, 6),
                "kl": round(elbo.kl, 6),
                "data_s": data_s,
                "method": init.method.value,
                "bayesian": True,
            }
        )
        if step == steps:
            break
        lr = config.transform_lr
        shrink = 1.0 + lr / (n * posterior.prior_var)
        for k in posterior.mu:
            # proximal step on the prior term of mu
            nll_grad = elbo.d_mu[k] - posterior.mu[k] / posterior.prior_var
            posterior.mu[k] = (posterior.mu[k] - lr * nll_grad / n) / shrink
            posterior.log_var[k] -= lr * elbo.d_log_var[k] / n
    logger.info(
        "bayes adapt speaker=%s steps=%d loss=%.4f->%.4f",
        init.speaker_id,
        steps,
        log[0]["loss"],
        log[-1]["loss"],
    )
    return posterior_mean_inference(posterior, init.speaker_id, init.method), log
