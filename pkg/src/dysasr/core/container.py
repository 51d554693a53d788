"""
Dysasr Tensor Container

Deterministic binary container for named numpy arrays plus JSON metadata.
Used for model checkpoints and speaker transform stores.

Layout:
    magic (4 bytes) | format version (uint32 LE) | header length (uint64 LE)
    | header (UTF-8 JSON, sorted keys) | tensor data (little-endian, row-major)
"""

import json
import struct
from pathlib import Path
from typing import Any

import numpy as np

CONTAINER_VERSION = 1

_ALLOWED_DTYPES = {"float64", "float32", "int64", "int32"}


def write_container(
    path: Path | str,
    magic: bytes,
    tensors: dict[str, np.ndarray],
    meta: dict[str, Any] | None = None,
) -> None:
    """
    Write named arrays and metadata to ``path``.

    Args:
        path: Output file
        magic: Four identifying bytes (e.g. b"DYSM" for models)
        tensors: Name -> array; written in sorted name order
        meta: JSON-serializable metadata

    Identical inputs always produce identical bytes.
    """
    if len(magic) != 4:
        raise ValueError(f"magic must be 4 bytes, got {magic!r}")

    entries = []
    blobs = []
    offset = 0
    for name in sorted(tensors):
        array = np.asarray(tensors[name])
        dtype = array.dtype.name
        if dtype not in _ALLOWED_DTYPES:
            raise ValueError(f"tensor {name}: unsupported dtype {dtype}")
        blob = np.ascontiguousarray(array, dtype=array.dtype.newbyteorder("<")).tobytes()
        entries.append(
            {"name": name, "dtype": dtype, "shape": list(array.shape), "offset": offset}
        )
        blobs.append(blob)
        offset += len(blob)

    header = json.dumps(
        {"meta": meta or {}, "tensors": entries}, sort_keys=True, separators=(",", ":")
    ).encode("utf-8")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(magic)
        f.write(struct.pack("<IQ", CONTAINER_VERSION, len(header)))
        f.write(header)
        for blob in blobs:
            f.write(blob)


def read_container(
    path: Path | str, magic: bytes
) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    """
    Read a container written by :func:`write_container`.

    Returns:
        (tensors, meta)
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Container not found: {path}")
    data = path.read_bytes()
    if data[:4] != magic:
        raise ValueError(f"{path}: bad magic {data[:4]!r}, expected {magic!r}")
    version, header_len = struct.unpack("<IQ", data[4:16])
    if version != CONTAINER_VERSION:
        raise ValueError(f"{path}: unsupported container version {version}")
    header = json.loads(data[16 : 16 + header_len].decode("utf-8"))
    body = memoryview(data)[16 + header_len :]

    tensors = {}
    for entry in header["tensors"]:
        dtype = np.dtype(entry["dtype"]).newbyteorder("<")
        count = int(np.prod(entry["shape"], dtype=np.int64))
        start = entry["offset"]
        array = np.frombuffer(body, dtype=dtype, count=count, offset=start)
        tensors[entry["name"]] = array.reshape(entry["shape"]).astype(entry["dtype"])
    return tensors, header["meta"]
