"""Binary model container.

Layout (all integers little-endian)::

    b"MSIGMDL"            7-byte magic
    u16 version
    u32 header length      followed by a UTF-8 JSON header
    array payload          raw little-endian arrays in header order
    u32 CRC-32             over everything before it

The header records kind, feature mask, metadata and each array's name,
dtype and shape. Arrays are stored as raw bytes, so a reloaded model
predicts bit for bit what the saved one did.
"""

from __future__ import annotations

import json
import os
import struct
import zlib
from pathlib import Path
from typing import BinaryIO, Union

import numpy as np

from ..errors import CorruptModelFile, UnsupportedVersion
from ..signal import Dimension
from .base import ModelKind, VerificationModel

MAGIC = b"MSIGMDL"
VERSION = 1
_DTYPES = {"f8": "<f8", "i8": "<i8"}

Sink = Union[str, os.PathLike, BinaryIO]


def dumps_model(model: VerificationModel) -> bytes:
    arrays, blobs = [], []
    for name in sorted(model.params):
        arr = np.asarray(model.params[name])
        code = "f8" if arr.dtype.kind == "f" else "i8"
        data = np.ascontiguousarray(arr, dtype=_DTYPES[code])
        arrays.append({"name": name, "dtype": code, "shape": list(data.shape)})
        blobs.append(data.tobytes())
    header = json.dumps(
        {
            "kind": model.kind.value,
            "feature_mask": [d.name for d in model.feature_mask],
            "metadata": model.metadata,
            "arrays": arrays,
        },
        sort_keys=True,
    ).encode("utf-8")
    body = MAGIC + struct.pack("<HI", VERSION, len(header)) + header + b"".join(blobs)
    return body + struct.pack("<I", zlib.crc32(body))


def loads_model(raw: bytes) -> VerificationModel:
    if len(raw) < len(MAGIC) + 6 or raw[: len(MAGIC)] != MAGIC:
        raise CorruptModelFile("not a model file (bad magic or too short)")
    version, header_len = struct.unpack_from("<HI", raw, len(MAGIC))
    if version != VERSION:
        raise UnsupportedVersion(f"model file version {version}, this build reads version {VERSION}")
    if len(raw) < 4 or zlib.crc32(raw[:-4]) != struct.unpack("<I", raw[-4:])[0]:
        raise CorruptModelFile("model file checksum mismatch (truncated or damaged)")
    start = len(MAGIC) + 6
    try:
        header = json.loads(raw[start : start + header_len].decode("utf-8"))
        offset = start + header_len
        params = {}
        for spec in header["arrays"]:
            dtype = np.dtype(_DTYPES[spec["dtype"]])
            count = int(np.prod(spec["shape"], dtype=np.int64))
            nbytes = count * dtype.itemsize
            if offset + nbytes > len(raw) - 4:
                raise CorruptModelFile(f"array {spec['name']!r} runs past the end of the file")
            arr = np.frombuffer(raw, dtype=dtype, count=count, offset=offset).reshape(spec["shape"])
            params[spec["name"]] = arr.astype(dtype.newbyteorder("="))
            offset += nbytes
        if offset != len(raw) - 4:
            raise CorruptModelFile("trailing bytes after model payload")
        return VerificationModel(
            ModelKind(header["kind"]),
            params,
            tuple(Dimension[n] for n in header["feature_mask"]),
            header["metadata"],
        )
    except CorruptModelFile:
        raise
    except (ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
        raise CorruptModelFile(f"malformed model header: {exc}") from exc


def save_model(model: VerificationModel, sink: Sink) -> None:
    data = dumps_model(model)
    if hasattr(sink, "write"):
        sink.write(data)
        return
    path = Path(sink)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def load_model(source: Sink) -> VerificationModel:
    if hasattr(source, "read"):
        return loads_model(source.read())
    try:
        return loads_model(Path(source).read_bytes())
    except FileNotFoundError:
        raise CorruptModelFile(f"model file not found: {source}") from None
