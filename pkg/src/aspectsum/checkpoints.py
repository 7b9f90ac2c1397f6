"""Portable model checkpoints: JSON header line + flat little-endian
32-bit float arrays in declared order.

The header is a single UTF-8 JSON object terminated by a newline, with an
``arrays`` list declaring name/shape for each tensor in write order plus
arbitrary model metadata. The binary payload is the concatenation of the
arrays as '<f4'.
"""

from __future__ import annotations

import json
from typing import Mapping

import numpy as np

FORMAT_NAME = "aspectsum-checkpoint"
FORMAT_VERSION = 1


def save_checkpoint(path: str, metadata: dict, arrays: Mapping[str, np.ndarray]) -> None:
    declared = [{"name": name, "shape": list(arr.shape)} for name, arr in arrays.items()]
    header = dict(metadata)
    header["format"] = FORMAT_NAME
    header["format_version"] = FORMAT_VERSION
    header["arrays"] = declared
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for arr in arrays.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_checkpoint(path: str) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        payload = fh.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"{path}: invalid checkpoint header") from exc
    if header.get("format") != FORMAT_NAME:
        raise ValueError(f"{path}: not an {FORMAT_NAME} file")
    arrays: dict[str, np.ndarray] = {}
    offset = 0
    for spec in header["arrays"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = 4 * count
        if offset + nbytes > len(payload):
            raise ValueError(f"{path}: truncated payload at array {spec['name']!r}")
        flat = np.frombuffer(payload[offset : offset + nbytes], dtype="<f4")
        arrays[spec["name"]] = flat.reshape(shape).copy()
        offset += nbytes
    if offset != len(payload):
        raise ValueError(f"{path}: {len(payload) - offset} trailing bytes after declared arrays")
    return header, arrays
