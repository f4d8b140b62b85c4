"""Self-describing checkpoint container.

Layout: the magic line ``DIHD1\\n``, an 8-byte little-endian header length,
a UTF-8 JSON header (metadata plus the name/shape/offset of every array),
then the arrays as little-endian float64 in header order.
"""

from __future__ import annotations

import json
import os
import struct

import numpy as np

from .config import RunConfig
from .tensor import ShapeError
from .trainer import ModelState, init_state

MAGIC = b"DIHD1\n"
VERSION = 1


class CheckpointError(ValueError):
    pass


def state_arrays(state: ModelState) -> dict[str, np.ndarray]:
    arrays: dict[str, np.ndarray] = {}
    modules = {"g": state.generator, **{f"d_{s}": d for s, d in state.discriminators.items()}}
    opts = {"g": state.opt_g, **{f"d_{s}": o for s, o in state.opt_d.items()}}
    for prefix, module in modules.items():
        for name, arr in module.state_dict().items():
            arrays[f"{prefix}/{name}"] = arr
    for prefix, opt in opts.items():
        for name in opt.params:
            arrays[f"adam_{prefix}/m/{name}"] = opt.state.m[name]
            arrays[f"adam_{prefix}/v/{name}"] = opt.state.v[name]
    return arrays


def encode_checkpoint(state: ModelState) -> bytes:
    arrays = state_arrays(state)
    entries, offset = [], 0
    for name, arr in arrays.items():
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.size * 8
    header = {
        "version": VERSION,
        "step": state.step,
        "seed": state.seed,
        "config": state.config.to_dict(),
        "toggles": state.toggles,
        "adam_t": {"g": state.opt_g.state.t, **{f"d_{s}": o.state.t for s, o in state.opt_d.items()}},
        "arrays": entries,
    }
    head = json.dumps(header, separators=(",", ":")).encode()
    payload = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in arrays.values())
    return MAGIC + struct.pack("<Q", len(head)) + head + payload


def decode_checkpoint(raw: bytes) -> ModelState:
    if not raw.startswith(MAGIC):
        raise CheckpointError("not a checkpoint: bad magic header")
    pos = len(MAGIC)
    if len(raw) < pos + 8:
        raise CheckpointError("truncated checkpoint header")
    (hlen,) = struct.unpack("<Q", raw[pos : pos + 8])
    pos += 8
    try:
        header = json.loads(raw[pos : pos + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise CheckpointError(f"corrupt checkpoint header: {err}") from None
    if header.get("version") != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {header.get('version')}")
    payload = raw[pos + hlen :]
    state = init_state(RunConfig(**header["config"]))
    expected = state_arrays(state)
    names = [e["name"] for e in header["arrays"]]
    if names != list(expected):
        raise CheckpointError("checkpoint arrays do not match the configured architecture")
    for entry in header["arrays"]:
        target = expected[entry["name"]]
        shape = tuple(entry["shape"])
        if shape != target.shape:
            raise ShapeError(f"{entry['name']}: checkpoint shape {shape} != model shape {target.shape}")
        start, n = entry["offset"], int(np.prod(shape)) * 8
        if start + n > len(payload):
            raise CheckpointError("truncated checkpoint payload")
        target[...] = np.frombuffer(payload[start : start + n], dtype="<f8").reshape(shape)
    state.step = header["step"]
    state.opt_g.state.t = header["adam_t"]["g"]
    for s, opt in state.opt_d.items():
        opt.state.t = header["adam_t"][f"d_{s}"]
    return state


def save_checkpoint(state: ModelState, path: str | os.PathLike) -> None:
    data = encode_checkpoint(state)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def load_checkpoint(path: str | os.PathLike) -> ModelState:
    with open(path, "rb") as fh:
        return decode_checkpoint(fh.read())
