"""
Dysasr Architecture Search

Interleaved updates of shared weights and architecture parameters on one
training split, per-epoch temperature annealing, derivation of the final
widths and retraining (or weight inheritance) of the derived model.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from dysasr.core.errors import NumericalError
from dysasr.core.models import (
    ForwardMode,
    HybridDnnSpec,
    NasTrainConfig,
    SearchSpace,
    TrainConfig,
)
from dysasr.nas.gumbel import (
    ArchParams,
    anneal_temperature,
    derive_architecture,
    weight_entropy,
)
from dysasr.nas.supernet import SuperNet, extract_subnet
from dysasr.net.model import HybridDnn
from dysasr.net.train import FrameDataset, Optimizer, recalibrate_bn, train_model

logger = logging.getLogger(__name__)


@dataclass
class SearchResult:
    widths: dict[int, int]
    spec: HybridDnnSpec
    model: HybridDnn
    arch: ArchParams
    log: list[dict[str, Any]] = field(default_factory=list)


def _epoch_records(
    epoch: int,
    arch: ArchParams,
    space: SearchSpace,
    temperature: float,
    eta: float,
    loss: float,
    lambda_entropy: dict[int, float],
) -> list[dict[str, Any]]:
    records = []
    for layer, probs in sorted(arch.probabilities().items()):
        penalty = eta * float(probs @ np.asarray(space.param_counts[layer]))
        records.append(
            {
                "epoch": epoch,
                "layer": layer,
                "widths": space.per_layer_candidates[layer],
                "alpha_probs": [round(float(p), 6) for p in probs],
                "alpha_entropy": round(weight_entropy(probs), 6),
                "lambda_entropy": round(lambda_entropy[layer], 6),
                "temperature": round(temperature, 6),
                "penalty": round(penalty, 6),
                "loss": round(loss, 6),
            }
        )
    return records


def write_search_log(path: Path | str, records: list[dict[str, Any]]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record, sort_keys=True) + "\n")


def write_architecture(path: Path | str, widths: dict[int, int], spec: HybridDnnSpec) -> None:
    """Derived widths plus the full layer spec, loadable with :func:`read_architecture`."""
    payload = {
        "widths": {str(k): v for k, v in sorted(widths.items())},
        "spec": spec.model_dump(mode="json"),
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_architecture(path: Path | str) -> tuple[dict[int, int], HybridDnnSpec]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    widths = {int(k): int(v) for k, v in payload["widths"].items()}
    return widths, HybridDnnSpec.model_validate(payload["spec"])


def search(
    dataset: FrameDataset,
    spec: HybridDnnSpec,
    space: SearchSpace,
    config: NasTrainConfig,
    train_config: TrainConfig,
    retrain_config: TrainConfig | None = None,
    inherit_weights: bool = False,
    log_path: Path | str | None = None,
) -> SearchResult:
    """
    Search per-layer projection widths and build the derived model.

    Each batch draws ``config.J`` Gumbel samples; the averaged weight
    gradient steps the shared weights and the averaged architecture
    gradient then steps log alpha. The temperature is annealed once per
    epoch.

    Args:
        dataset: Aligned training frames
        spec: Base network; its factored layers are searched per ``space``
        space: Candidate widths and parameter counts
        config: Search settings
        train_config: Weight optimizer settings used during the search
        retrain_config: Settings for retraining the derived model
            (defaults to ``train_config``)
        inherit_weights: Keep the super-network's shared weights instead of
            retraining from scratch
        log_path: Optional JSONL search log destination

    Raises:
        NumericalError: the search loss diverged
    """
    supernet = SuperNet.build(spec, space, seed=config.seed)
    arch = ArchParams.uniform(space)
    optimizer = Optimizer(train_config)
    records: list[dict[str, Any]] = []
    last = max(config.epochs - 1, 0)

    for epoch in range(config.epochs):
        temperature = anneal_temperature(epoch, last, config)
        rng = np.random.default_rng([config.seed, epoch])
        total, seen = 0.0, 0
        entropy = dict.fromkeys(space.layers, 0.0)
        for batch_id, rows in enumerate(dataset.batches(train_config.batch, rng)):
            grad = supernet.arch_gradient(
                arch,
                dataset.features[rows],
                dataset.primary[rows],
                dataset.aux[rows],
                config.J,
                temperature,
                rng,
                eta=config.eta,
                mode=ForwardMode.TRAIN,
            )
            if not np.isfinite(grad.loss):
                raise NumericalError(f"search loss is {grad.loss} at epoch {epoch}", batch_id)
            optimizer.step(supernet.model.params, grad.params, epoch)
            for layer, g in grad.log_alpha.items():
                arch.log_alpha[layer] -= config.arch_lr * g
            total += grad.task_loss * len(rows)
            for layer, h in grad.lambda_entropy.items():
                entropy[layer] += h * len(rows)
            seen += len(rows)
        loss = total / max(seen, 1)
        entropy = {layer: h / max(seen, 1) for layer, h in entropy.items()}
        epoch_records = _epoch_records(epoch, arch, space, temperature, config.eta, loss, entropy)
        records.extend(epoch_records)
        logger.info(
            "search epoch=%d T=%.4f loss=%.4f lambda_entropy=%s",
            epoch,
            temperature,
            loss,
            [r["lambda_entropy"] for r in epoch_records],
        )

    widths = derive_architecture(arch, space)
    derived = spec.with_proj_dims(widths)
    if inherit_weights:
        model = extract_subnet(supernet, widths)
        # search steps never fold batch statistics into the running ones
        recalibrate_bn(model, dataset, train_config.batch, config.seed)
    else:
        model = HybridDnn(derived, seed=config.seed)
        model, _ = train_model(model, dataset, retrain_config or train_config)
    logger.info("derived widths=%s params=%d", widths, model.parameter_count())

    if log_path is not None:
        write_search_log(log_path, records)
    return SearchResult(widths=widths, spec=derived, model=model, arch=arch, log=records)
