"""Versioned binary checkpoint container.

Layout (all integers little-endian)::

    8 bytes   magic  b"TNOMACKP"
    4 bytes   uint32 format version
    8 bytes   uint64 header length H
    H bytes   UTF-8 JSON header
    ...       concatenated float64 little-endian array payloads

The JSON header holds ``layers`` (list of layer specs), ``meta`` (free-form
dict) and ``arrays``: one ``{"name", "shape", "offset", "nbytes"}`` entry
per array, offsets counted from the start of the payload.
"""

import json
import struct

import numpy as np

MAGIC = b"TNOMACKP"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, arrays, layers=(), meta=None):
    table, blobs, offset = [], [], 0
    for name, arr in arrays.items():
        data = np.ascontiguousarray(arr, dtype="<f8")
        table.append({"name": name, "shape": list(data.shape), "offset": offset,
                      "nbytes": data.nbytes})
        blobs.append(data.tobytes())
        offset += data.nbytes
    header = json.dumps({"layers": list(layers), "meta": meta or {}, "arrays": table},
                        sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<Q", len(header)))
        f.write(header)
        for blob in blobs:
            f.write(blob)


def load_checkpoint(path):
    """Return ``(arrays, layers, meta)``."""
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    (version,) = struct.unpack("<I", raw[8:12])
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    (hlen,) = struct.unpack("<Q", raw[12:20])
    header = json.loads(raw[20:20 + hlen].decode("utf-8"))
    payload = memoryview(raw)[20 + hlen:]
    arrays = {}
    for entry in header["arrays"]:
        start = entry["offset"]
        buf = payload[start:start + entry["nbytes"]]
        arrays[entry["name"]] = np.frombuffer(buf, dtype="<f8").reshape(entry["shape"]).copy()
    return arrays, header["layers"], header["meta"]
