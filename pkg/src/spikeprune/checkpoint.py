"""Self-describing binary checkpoint for a network.

Layout: 8-byte magic b"SPCKPT1\\n", u32 little-endian header length, UTF-8
JSON header (format-version string, layer dims, spiking flags, LIF
parameters, seed, prunable flags, free-form metadata), then for each layer
its weights as row-major little-endian float64 followed by its mask as one
byte per entry. Weights and masks round-trip bit-exactly; writing the same
network twice produces identical bytes.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .network import LifParams, Network, NetworkConfig, WeightLayer

__all__ = ["CheckpointError", "CheckpointVersionError", "save_checkpoint",
           "load_checkpoint", "FORMAT_VERSION"]

MAGIC = b"SPCKPT1\n"
FORMAT_VERSION = "1"


class CheckpointError(ValueError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


def save_checkpoint(path, net: Network, meta: dict | None = None) -> None:
    header = {
        "format_version": FORMAT_VERSION,
        "layer_dims": list(net.config.layer_dims),
        "spiking_flags": list(net.config.spiking_flags),
        "lif_params": [
            {"tau": p.tau, "threshold": p.threshold,
             "reset_value": p.reset_value, "dt": p.dt}
            for p in net.config.lif_params
        ],
        "seed": net.config.seed,
        "prunable": [l.prunable for l in net.layers],
        "meta": meta or {},
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for layer in net.layers:
            f.write(layer.weights.astype("<f8").tobytes(order="C"))
            f.write(layer.mask.astype(np.uint8).tobytes(order="C"))


def load_checkpoint(path):
    """Returns (Network, meta dict). Raises on bad magic or version mismatch."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"not a checkpoint file: bad magic in {path}")
    off = len(MAGIC)
    (header_len,) = struct.unpack_from("<I", blob, off)
    off += 4
    header = json.loads(blob[off:off + header_len].decode("utf-8"))
    off += header_len
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"checkpoint format version {version!r}, expected {FORMAT_VERSION!r}"
        )
    config = NetworkConfig(
        layer_dims=tuple(header["layer_dims"]),
        spiking_flags=tuple(header["spiking_flags"]),
        lif_params=tuple(LifParams(**p) for p in header["lif_params"]),
        seed=header["seed"],
    )
    layers = []
    for i in range(config.n_layers):
        rows, cols = config.layer_dims[i + 1], config.layer_dims[i]
        n = rows * cols
        need = off + n * 8 + n
        if len(blob) < need:
            raise CheckpointError(f"truncated checkpoint payload in {path}")
        w = np.frombuffer(blob, dtype="<f8", count=n, offset=off).reshape(rows, cols)
        off += n * 8
        m = np.frombuffer(blob, dtype=np.uint8, count=n, offset=off).reshape(rows, cols)
        off += n
        layers.append(WeightLayer(weights=w.copy(), mask=m.copy(),
                                  prunable=header["prunable"][i]))
    return Network(config, layers), header.get("meta", {})
