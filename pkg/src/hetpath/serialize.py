"""Binary file formats for model checkpoints and embedding matrices.

Both formats are little-endian with a magic tag, a format version, and
row-major payloads; the full byte layout is documented in docs/formats.md.
Text export of embeddings (TSV) is provided for external plotting tools.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .nn import Model

MODEL_MAGIC = b"HPMD"
EMBED_MAGIC = b"HPEM"
FORMAT_VERSION = 1


class FormatError(ValueError):
    """Corrupt or unsupported binary file."""


def save_model(path: str | Path, model: Model) -> None:
    """Versioned header + JSON manifest + float64 row-major parameter payloads."""
    params = model.parameters()
    meta = {
        "format_version": FORMAT_VERSION,
        "hidden_dim": model.hidden_dim,
        "num_layers": model.num_layers,
        "num_classes": model.num_classes,
        "activation": model.activation,
        "path_names": model.path_names,
        "feature_dims": {t: int(w.values.shape[0]) for t, w in model.proj.items()},
        "params": [
            {"name": name, "shape": list(t.values.shape), "dtype": "float64"}
            for name, t in params
        ],
    }
    blob = json.dumps(meta).encode("utf-8")  # key order mirrors parameter order
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for _, t in params:
            fh.write(np.ascontiguousarray(t.values, dtype="<f8").tobytes())


def load_model(path: str | Path) -> Model:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MODEL_MAGIC:
            raise FormatError(f"not a model checkpoint (magic {magic!r})")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != FORMAT_VERSION:
            raise FormatError(f"unsupported checkpoint version {version}")
        (meta_len,) = struct.unpack("<Q", fh.read(8))
        meta = json.loads(fh.read(meta_len).decode("utf-8"))
        model = Model(
            feature_dims=meta["feature_dims"],
            path_names=meta["path_names"],
            num_classes=meta["num_classes"],
            hidden_dim=meta["hidden_dim"],
            num_layers=meta["num_layers"],
            activation=meta["activation"],
            seed=0,
        )
        state = {}
        for spec in meta["params"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(count * 8)
            if len(raw) != count * 8:
                raise FormatError(f"truncated payload for {spec['name']!r}")
            state[spec["name"]] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
        model.load_state_dict(state)
    return model


def save_embeddings(path: str | Path, z: np.ndarray) -> None:
    """Versioned header + row-major 32-bit floats."""
    z = np.asarray(z)
    if z.ndim != 2:
        raise ValueError(f"embeddings must be 2-D, got shape {z.shape}")
    with open(path, "wb") as fh:
        fh.write(EMBED_MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<QQ", z.shape[0], z.shape[1]))
        fh.write(np.ascontiguousarray(z, dtype="<f4").tobytes())


def load_embeddings(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != EMBED_MAGIC:
            raise FormatError(f"not an embedding file (magic {magic!r})")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != FORMAT_VERSION:
            raise FormatError(f"unsupported embedding version {version}")
        rows, cols = struct.unpack("<QQ", fh.read(16))
        raw = fh.read(rows * cols * 4)
        if len(raw) != rows * cols * 4:
            raise FormatError("truncated embedding payload")
        return np.frombuffer(raw, dtype="<f4").reshape(rows, cols).copy()


def embeddings_to_tsv(path: str | Path, z: np.ndarray) -> None:
    np.savetxt(path, np.asarray(z), delimiter="\t", fmt="%.8g")
