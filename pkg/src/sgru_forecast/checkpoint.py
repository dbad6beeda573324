"""Self-describing binary checkpoint for trained (theta, phi).

Layout:
    8 bytes   magic b"SGRUCKPT"
    uint32 LE format version
    uint32 LE header length
    header    UTF-8 JSON, sorted keys: format_version, config, dims, scaler,
              extra, arrays (name + shape, in payload order)
    payload   little-endian float64 arrays, concatenated
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from .data import Scaler
from .exceptions import CheckpointError, CheckpointVersionError, ConfigError, ContractError, DimensionError
from .model import GenerativeParams, InferenceParams, build_model, model_dims
from .trainer import TrainConfig

MAGIC = b"SGRUCKPT"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<II")


@dataclass
class Checkpoint:
    """Restored model, its configuration and the fitted scaler."""
    generative: GenerativeParams
    inference: InferenceParams
    config: TrainConfig
    scaler: Optional[Scaler]
    dims: Dict[str, int]
    extra: Dict[str, Any] = field(default_factory=dict)


def _named_arrays(theta: GenerativeParams, phi: InferenceParams) -> List[tuple]:
    return [(f"generative.{n}", p) for n, p in theta.named_parameters()] + [
        (f"inference.{n}", p) for n, p in phi.named_parameters()
    ]


def save_checkpoint(
    theta: GenerativeParams,
    phi: InferenceParams,
    cfg: TrainConfig,
    scaler: Optional[Scaler],
    path: Union[str, Path],
    extra: Optional[Dict[str, Any]] = None,
) -> Path:
    """Write parameters bit-exactly with config, scaler and free-form ``extra`` metadata."""
    path = Path(path)
    arrays = _named_arrays(theta, phi)
    header = {
        "format_version": FORMAT_VERSION,
        "config": cfg.to_dict(),
        "dims": model_dims(theta, phi),
        "scaler": scaler.to_dict() if scaler is not None else None,
        "extra": extra or {},
        "arrays": [{"name": name, "shape": list(p.shape)} for name, p in arrays],
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(_PREFIX.pack(FORMAT_VERSION, len(header_bytes)))
        fh.write(header_bytes)
        for _, p in arrays:
            fh.write(np.ascontiguousarray(p.value, dtype="<f8").tobytes())
    return path


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    """Read a checkpoint written by :func:`save_checkpoint`.

    Raises:
        FileNotFoundError: If the file does not exist
        CheckpointVersionError: If the format version is not supported
        CheckpointError: If the file is truncated or malformed
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Checkpoint not found: {path}")
    blob = path.read_bytes()

    prefix_end = len(MAGIC) + _PREFIX.size
    if len(blob) < prefix_end or blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"Not a checkpoint file or truncated header: {path}")
    version, header_len = _PREFIX.unpack_from(blob, len(MAGIC))
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(version, FORMAT_VERSION)
    header_end = prefix_end + header_len
    if len(blob) < header_end:
        raise CheckpointError(f"Truncated checkpoint header: {path}")
    try:
        header = json.loads(blob[prefix_end:header_end].decode("utf-8"))
        cfg = TrainConfig.from_dict(header["config"])
        dims = {k: int(v) for k, v in header["dims"].items()}
        input_dim = dims["input_dim"]
        manifest = [(str(a["name"]), tuple(int(s) for s in a["shape"])) for a in header["arrays"]]
        scaler = Scaler.from_dict(header["scaler"]) if header.get("scaler") else None
        extra = dict(header.get("extra") or {})
    except (ConfigError, ValueError, KeyError, TypeError, AttributeError) as exc:
        raise CheckpointError(f"Malformed checkpoint header in {path}: {exc!r}") from exc

    expected = sum(int(np.prod(shape)) for _, shape in manifest) * 8
    if len(blob) - header_end != expected:
        raise CheckpointError(
            f"Checkpoint payload is {len(blob) - header_end} bytes, expected {expected}: {path}"
        )

    state: Dict[str, np.ndarray] = {}
    offset = header_end
    for name, shape in manifest:
        count = int(np.prod(shape))
        state[name] = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).reshape(shape)
        offset += count * 8

    try:
        theta, phi = build_model(input_dim, cfg)
        theta.load_state_dict(_strip(state, "generative."))
        phi.load_state_dict(_strip(state, "inference."))
    except (ConfigError, ContractError, DimensionError) as exc:
        raise CheckpointError(f"Checkpoint does not match its own configuration: {exc}") from exc

    return Checkpoint(theta, phi, cfg, scaler, dims, extra)


def _strip(state: Dict[str, np.ndarray], prefix: str) -> Dict[str, np.ndarray]:
    return {k[len(prefix):]: v for k, v in state.items() if k.startswith(prefix)}
