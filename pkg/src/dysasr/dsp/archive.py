"""
Feature archive I/O.

Binary layout: magic ``DYSF`` | uint32 T | uint32 D | T*D float32 row-major,
little-endian. A sidecar ``<archive>.desc`` text file holds the frame shift
on its first line and one descriptor label per following line.
"""

import struct
from pathlib import Path

import numpy as np

from dysasr.dsp.features import FeatureMatrix

FEATURE_MAGIC = b"DYSF"


def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".desc")


def write_feature_archive(path: Path | str, m: FeatureMatrix) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(FEATURE_MAGIC)
        f.write(struct.pack("<II", m.n_frames, m.dim))
        f.write(np.ascontiguousarray(m.frames, dtype="<f4").tobytes())
    lines = [repr(float(m.frame_shift_s)), *m.descriptor]
    _sidecar(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_feature_archive(path: Path | str) -> FeatureMatrix:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Feature archive not found: {path}")
    data = path.read_bytes()
    if data[:4] != FEATURE_MAGIC:
        raise ValueError(f"{path}: not a feature archive (magic {data[:4]!r})")
    n_frames, dim = struct.unpack("<II", data[4:12])
    expected = 12 + 4 * n_frames * dim
    if len(data) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(data)}")
    frames = np.frombuffer(data, dtype="<f4", offset=12).reshape(n_frames, dim)

    desc = _sidecar(path)
    if not desc.exists():
        raise FileNotFoundError(f"Feature descriptor not found: {desc}")
    lines = desc.read_text(encoding="utf-8").splitlines()
    return FeatureMatrix(
        frames=frames.astype(np.float64),
        frame_shift_s=float(lines[0]),
        descriptor=lines[1:],
    )
