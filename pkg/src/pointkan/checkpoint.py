"""
Binary checkpoints, all integers little-endian:

    b"PKAN"                       magic
    u32                           format version
    u32 + UTF-8 bytes             model config in `key = value` text
    u32                           number of blocks
    per block:
      u32 + UTF-8 bytes           dotted name
      u64                         element count
      float64 × count             values in C order

Parameters come first in `named_parameters()` order, then the batch
normalisation running statistics in `named_buffers()` order. Statistics
which have never been computed are stored with a count of zero.
"""

import struct
from pathlib import Path

import numpy as np

from pointkan.blocks.model import PointKan
from pointkan.config import parse_config_text
from pointkan.errors import CheckpointError, ConfigError
from pointkan.points_file import atomic_write

MAGIC = b"PKAN"
VERSION = 1


def _u32(n: int) -> bytes:
    return struct.pack("<I", n)


def _text(txt: str) -> bytes:
    data = txt.encode("utf-8")
    return _u32(len(data)) + data


def checkpoint_blocks(model: PointKan):
    yield from model.named_parameters()
    yield from model.named_buffers()


def checkpoint_bytes(model: PointKan) -> bytes:
    blocks = list(checkpoint_blocks(model))
    out = [MAGIC, _u32(VERSION), _text(model.config.to_text()), _u32(len(blocks))]
    for name, arr in blocks:
        out.append(_text(name))
        if arr is None:
            out.append(struct.pack("<Q", 0))
        else:
            out.append(struct.pack("<Q", arr.size))
            out.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(out)


def save_checkpoint(path: Path, model: PointKan) -> None:
    atomic_write(path, checkpoint_bytes(model))


class _Reader:
    def __init__(self, data: bytes, source: str):
        self.data = data
        self.source = source
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            msg = f"{self.source}: truncated at byte {self.pos} of {len(self.data)}"
            raise CheckpointError(msg)
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def text(self) -> str:
        raw = self.take(self.u32())
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as e:
            msg = f"{self.source}: bad UTF-8 text at byte {self.pos - len(raw)}"
            raise CheckpointError(msg) from e

    def values(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * count), dtype="<f8").astype(np.float64)


def model_from_bytes(data: bytes, source="<checkpoint>") -> PointKan:
    rdr = _Reader(data, source)
    if (magic := rdr.take(4)) != MAGIC:
        msg = f"{source}: not a checkpoint, magic {magic!r} is not {MAGIC!r}"
        raise CheckpointError(msg)
    if (version := rdr.u32()) != VERSION:
        msg = f"{source}: unsupported checkpoint version {version}, expecting {VERSION}"
        raise CheckpointError(msg)
    try:
        cfg = parse_config_text(rdr.text(), f"{source} config")
    except ConfigError as e:
        raise CheckpointError(str(e)) from e

    model = PointKan(cfg)
    expected = list(checkpoint_blocks(model))
    if (count := rdr.u32()) != len(expected):
        msg = f"{source}: {count} blocks, but the model has {len(expected)}"
        raise CheckpointError(msg)
    for name, arr in expected:
        if (got := rdr.text()) != name:
            msg = f"{source}: found block {got!r} where {name!r} belongs"
            raise CheckpointError(msg)
        size = rdr.u64()
        owner, attr = _owner(model, name)
        if size == 0 and attr in owner.buffers:
            owner.buffers[attr] = None
            continue
        shape = arr.shape if arr is not None else (owner.channels,)
        if size != int(np.prod(shape)):
            msg = f"{source}: block {name!r} has {size} values, expecting shape {shape}"
            raise CheckpointError(msg)
        values = rdr.values(size).reshape(shape)
        if attr in owner.params:
            owner.params[attr][...] = values
        else:
            owner.buffers[attr] = values
    if rdr.pos != len(data):
        msg = f"{source}: {len(data) - rdr.pos} unexpected trailing bytes"
        raise CheckpointError(msg)
    return model


def _owner(model: PointKan, name: str):
    *path, attr = name.split(".")
    mod = model
    for part in path:
        mod = mod.modules[part]
    return mod, attr


def load_checkpoint(path: Path) -> PointKan:
    return model_from_bytes(path.read_bytes(), str(path))
