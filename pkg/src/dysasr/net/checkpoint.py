"""
Model checkpoints: layer specs, parameters, BN statistics and the feature
normalizer in one tensor container.
"""

from pathlib import Path
from typing import Any

from dysasr.core.container import read_container, write_container
from dysasr.core.models import HybridDnnSpec
from dysasr.dsp.features import FeatureNormalizer
from dysasr.net.model import HybridDnn

MODEL_MAGIC = b"DYSM"
CHECKPOINT_FORMAT = 1


def save_checkpoint(
    path: Path | str,
    model: HybridDnn,
    normalizer: FeatureNormalizer | None = None,
    meta: dict[str, Any] | None = None,
) -> None:
    tensors = {f"param/{k}": v for k, v in model.params.items()}
    tensors.update({f"bn/{k}": v for k, v in model.bn_state.items()})
    if normalizer is not None:
        tensors["norm/mean"] = normalizer.mean
        tensors["norm/std"] = normalizer.std
    header = {
        "format": CHECKPOINT_FORMAT,
        "spec": model.spec.model_dump(mode="json"),
        "extra": meta or {},
    }
    write_container(path, MODEL_MAGIC, tensors, header)


def load_checkpoint(
    path: Path | str,
) -> tuple[HybridDnn, FeatureNormalizer | None, dict[str, Any]]:
    """
    Returns:
        (model, normalizer or None, extra metadata)
    """
    tensors, header = read_container(path, MODEL_MAGIC)
    if header.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: unsupported checkpoint format {header.get('format')}")
    spec = HybridDnnSpec.model_validate(header["spec"])
    params = {k.removeprefix("param/"): v for k, v in tensors.items() if k.startswith("param/")}
    bn_state = {k.removeprefix("bn/"): v for k, v in tensors.items() if k.startswith("bn/")}
    normalizer = None
    if "norm/mean" in tensors:
        normalizer = FeatureNormalizer(mean=tensors["norm/mean"], std=tensors["norm/std"])
    return HybridDnn(spec, params, bn_state), normalizer, header.get("extra", {})
