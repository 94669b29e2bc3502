"""Versioned model container.

Layout (all integers little-endian)::

    offset 0   8 bytes   magic  b"IRSRMDL\\0"
    offset 8   uint32    format version (currently 1)
    offset 12  uint32    header length H in bytes
    offset 16  H bytes   UTF-8 JSON header (keys sorted)
    offset 16+H          payload: float32 little-endian arrays, concatenated

The header's ``"arrays"`` entry lists ``[name, shape]`` pairs in payload
order; each array occupies ``prod(shape) * 4`` bytes, row-major. A network
is described by ``{"in_channels": c, "layers": [{"kind", "config",
"params", "buffers"}]}``; its arrays are named ``"<prefix>/<layer index>/<name>"``
and appear in declaration order (parameters, then buffers, per layer).
"""

from __future__ import annotations

import json
import os
import struct

import numpy as np

from .layers import LAYER_KINDS
from .network import Network

MAGIC = b"IRSRMDL\0"
VERSION = 1


class ModelFormatError(ValueError):
    pass


def write_container(path, header: dict, arrays: list[tuple[str, np.ndarray]]) -> None:
    header = dict(header)
    header["arrays"] = [[name, list(np.shape(a))] for name, a in arrays]
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(os.fspath(path), "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(blob)))
        fh.write(blob)
        for _, a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f4").tobytes())


def read_container(path) -> tuple[dict, dict[str, np.ndarray]]:
    path = os.fspath(path)
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != MAGIC:
        raise ModelFormatError(f"{path}: bad magic")
    version, hlen = struct.unpack("<II", raw[8:16])
    if version != VERSION:
        raise ModelFormatError(f"{path}: unsupported container version {version}")
    header = json.loads(raw[16:16 + hlen].decode("utf-8"))
    offset = 16 + hlen
    arrays = {}
    for name, shape in header["arrays"]:
        count = int(np.prod(shape)) if shape else 1
        end = offset + 4 * count
        if end > len(raw):
            raise ModelFormatError(f"{path}: truncated payload at {name}")
        arrays[name] = np.frombuffer(raw[offset:end], dtype="<f4").astype(np.float32).reshape(shape)
        offset = end
    if offset != len(raw):
        raise ModelFormatError(f"{path}: {len(raw) - offset} trailing bytes")
    return header, arrays


def network_spec(net: Network, prefix: str) -> tuple[dict, list[tuple[str, np.ndarray]]]:
    layers, arrays = [], []
    for i, layer in enumerate(net.layers):
        layers.append({"kind": layer.kind, "config": layer.config(),
                       "params": list(layer.params), "buffers": list(layer.buffers)})
        for name, value in list(layer.params.items()) + list(layer.buffers.items()):
            arrays.append((f"{prefix}/{i}/{name}", value))
    return {"in_channels": net.in_channels, "layers": layers}, arrays


def network_from_spec(spec: dict, arrays: dict[str, np.ndarray], prefix: str) -> Network:
    layers = []
    for i, entry in enumerate(spec["layers"]):
        cls = LAYER_KINDS.get(entry["kind"])
        if cls is None:
            raise ModelFormatError(f"unknown layer kind {entry['kind']!r}")
        layer = cls(**entry["config"])
        for store, names in ((layer.params, entry["params"]), (layer.buffers, entry["buffers"])):
            for name in names:
                value = arrays[f"{prefix}/{i}/{name}"]
                if name in store and store[name].shape != value.shape:
                    raise ModelFormatError(f"layer {i}.{name}: shape {value.shape} != {store[name].shape}")
                store[name] = value.copy()
        layers.append(layer)
    return Network(layers, in_channels=spec["in_channels"])


def save_network(path, net: Network, meta: dict | None = None) -> None:
    spec, arrays = network_spec(net, "net")
    write_container(path, {"type": "network", "network": spec, "meta": meta or {}}, arrays)


def load_network(path) -> Network:
    header, arrays = read_container(path)
    if header.get("type") != "network":
        raise ModelFormatError(f"{path}: not a bare network container")
    return network_from_spec(header["network"], arrays, "net")
