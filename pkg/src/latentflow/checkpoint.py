"""Model checkpoint files.

Layout::

    LATENTFLOW-CHECKPOINT <version> <header_bytes>\n
    <JSON header: architecture, activation, seed, normalizer, extras>\n
    <little-endian float64 parameter blob>

The blob is the model's flat parameter vector: each network in layer order
with weights row-major then biases. DeepONet stores branch, trunk and the
output bias; NIF stores ParameterNet, the expansion matrix (row-major,
``n_shape x r``) and the expansion biases.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .dataset import CoordNormalizer
from .deeponet import DeepONetModel
from .nif import NIFModel, ShapeNetArch

CHECKPOINT_VERSION = 1
_MAGIC = "LATENTFLOW-CHECKPOINT"


class CheckpointError(ValueError):
    pass


def save_checkpoint(model, path, seed: int | None = None, extra: dict | None = None) -> Path:
    path = Path(path)
    header = {
        "version": CHECKPOINT_VERSION,
        "architecture": model.describe(),
        "seed": seed,
        "normalizer": model.normalizer.as_dict(),
        "n_params": int(model.theta.size),
        "extra": extra or {},
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(f"{_MAGIC} {CHECKPOINT_VERSION} {len(blob)}\n".encode("ascii"))
        fh.write(blob + b"\n")
        fh.write(np.ascontiguousarray(model.theta, dtype="<f8").tobytes())
    return path


def load_checkpoint(path):
    """Returns ``(model, header)``."""
    path = Path(path)
    with open(path, "rb") as fh:
        try:
            magic, version, nbytes = fh.readline().decode("ascii").split()
            version, nbytes = int(version), int(nbytes)
        except (UnicodeDecodeError, ValueError):
            raise CheckpointError(f"{path}: not a checkpoint file") from None
        if magic != _MAGIC:
            raise CheckpointError(f"{path}: bad magic {magic!r}")
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"{path}: checkpoint version {version} unsupported")
        try:
            header = json.loads(fh.read(nbytes).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"{path}: corrupt header: {exc}") from None
        fh.read(1)
        payload = fh.read()
    if len(payload) != 8 * header["n_params"]:
        raise CheckpointError(
            f"{path}: parameter blob has {len(payload)} bytes, expected {8 * header['n_params']}"
        )
    theta = np.frombuffer(payload, dtype="<f8").astype(float)
    arch = header["architecture"]
    norm = CoordNormalizer(**header["normalizer"])
    if arch["kind"] == "deeponet":
        model = DeepONetModel(arch["branch_dims"], arch["trunk_dims"], theta, arch["activation"],
                              norm, arch["first_omega"], arch["hidden_omega"])
    elif arch["kind"] == "nif":
        dims = arch["shape_dims"]
        shape = ShapeNetArch(dims[0], tuple(dims[1:-1]), dims[-1], arch["shape_activation"])
        model = NIFModel(arch["pnet_dims"], shape, theta, arch["pnet_activation"], norm)
    else:
        raise CheckpointError(f"{path}: unknown model kind {arch['kind']!r}")
    return model, header
