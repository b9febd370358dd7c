"""Versioned binary checkpoints for model parameters.

Layout: magic ``FSPV``, version u32, then a sequence of named tensors:
name length u32, UTF-8 name bytes, rank u32, dims u32 each, little-endian
float32 data. Model hyperparameters are stored as rank-0 tensors under the
``cfg/`` prefix so a checkpoint is self-describing. Tensors are written in
sorted name order, which makes checkpoint bytes reproducible.
"""

from __future__ import annotations

import dataclasses
import struct
from pathlib import Path

import numpy as np
import torch.nn as nn

from .config import ModelConfig
from .errors import ModelError

CKPT_MAGIC = b"FSPV"
CKPT_VERSION = 1


def save_checkpoint(path, cfg: ModelConfig, arrays: dict[str, np.ndarray]) -> None:
    path = Path(path)
    named: dict[str, np.ndarray] = dict(arrays)
    for field in dataclasses.fields(cfg):
        named[f"cfg/{field.name}"] = np.asarray(float(getattr(cfg, field.name)), dtype=np.float32)
    with path.open("wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<I", CKPT_VERSION))
        for name in sorted(named):
            # np.asarray keeps rank-0 arrays rank 0; tobytes() yields C order
            data = np.asarray(named[name], dtype="<f4")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", data.ndim))
            for dim in data.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(data.tobytes())


def load_checkpoint(path) -> tuple[ModelConfig, dict[str, np.ndarray]]:
    path = Path(path)
    with path.open("rb") as fh:
        if fh.read(4) != CKPT_MAGIC:
            raise ModelError(f"{path}: not a checkpoint file (bad magic)")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != CKPT_VERSION:
            raise ModelError(f"{path}: unsupported checkpoint version {version}")
        named: dict[str, np.ndarray] = {}
        while True:
            header = fh.read(4)
            if not header:
                break
            (name_len,) = struct.unpack("<I", header)
            name = fh.read(name_len).decode("utf-8")
            (rank,) = struct.unpack("<I", fh.read(4))
            dims = struct.unpack(f"<{rank}I", fh.read(4 * rank)) if rank else ()
            count = int(np.prod(dims)) if dims else 1
            payload = fh.read(count * 4)
            if len(payload) != count * 4:
                raise ModelError(f"{path}: truncated tensor {name!r}")
            named[name] = np.frombuffer(payload, dtype="<f4").reshape(dims).copy()

    cfg_kwargs = {}
    for field in dataclasses.fields(ModelConfig):
        key = f"cfg/{field.name}"
        if key not in named:
            raise ModelError(f"{path}: checkpoint missing config entry {key}")
        value = float(named.pop(key))
        cfg_kwargs[field.name] = int(value) if field.type in ("int", int) else value
    return ModelConfig(**cfg_kwargs), named


def module_arrays(module: nn.Module, prefix: str) -> dict[str, np.ndarray]:
    """Flatten a module's state dict to float32 numpy arrays under a prefix."""
    out = {}
    for name, tensor in module.state_dict().items():
        out[f"{prefix}/{name}"] = tensor.detach().cpu().numpy().astype(np.float32)
    return out


def load_module_arrays(module: nn.Module, arrays: dict[str, np.ndarray], prefix: str) -> None:
    """Restore a module from prefixed arrays; dtypes follow the module's own."""
    import torch

    state = module.state_dict()
    update = {}
    for name, tensor in state.items():
        key = f"{prefix}/{name}"
        if key not in arrays:
            raise ModelError(f"checkpoint missing tensor {key}")
        value = arrays[key]
        if tuple(value.shape) != tuple(tensor.shape):
            raise ModelError(
                f"checkpoint tensor {key} has shape {tuple(value.shape)}, expected {tuple(tensor.shape)}"
            )
        update[name] = torch.from_numpy(np.asarray(value)).to(tensor.dtype)
    module.load_state_dict(update)


def has_prefix(arrays: dict[str, np.ndarray], prefix: str) -> bool:
    return any(name.startswith(prefix + "/") for name in arrays)
