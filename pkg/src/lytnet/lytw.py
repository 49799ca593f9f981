"""LYTW weights container: a versioned little-endian binary format.

Layout: magic ``LYTW``, format version (u32), parameter count (u32), then per
parameter: name length (u32), UTF-8 name bytes, rank (u32), extents (u32 each),
raw float32 little-endian data in row-major order. Round-trips bit-exactly.
"""

import struct

import numpy as np

MAGIC = b"LYTW"
VERSION = 1

_U32 = struct.Struct("<I")


class WeightsFormatError(ValueError):
    pass


def save_weights(path, arrays):
    """Write (name, array) pairs; arrays are stored as little-endian float32."""
    items = list(arrays)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(_U32.pack(VERSION))
        f.write(_U32.pack(len(items)))
        for name, arr in items:
            data = np.ascontiguousarray(arr, dtype="<f4")
            encoded = name.encode("utf-8")
            f.write(_U32.pack(len(encoded)))
            f.write(encoded)
            f.write(_U32.pack(data.ndim))
            for extent in data.shape:
                f.write(_U32.pack(extent))
            f.write(data.tobytes())


def _read_exact(f, n, what):
    buf = f.read(n)
    if len(buf) != n:
        raise WeightsFormatError(f"bad weights file: truncated while reading {what}")
    return buf


def load_weights(path):
    """Read a LYTW file into an ordered name -> float32 array mapping."""
    out = {}
    with open(path, "rb") as f:
        if f.read(len(MAGIC)) != MAGIC:
            raise WeightsFormatError("bad weights file: wrong magic bytes")
        (version,) = _U32.unpack(_read_exact(f, 4, "version"))
        if version != VERSION:
            raise WeightsFormatError(f"bad weights file: unsupported version {version}")
        (count,) = _U32.unpack(_read_exact(f, 4, "parameter count"))
        for i in range(count):
            (name_len,) = _U32.unpack(_read_exact(f, 4, f"name length of entry {i}"))
            name = _read_exact(f, name_len, f"name of entry {i}").decode("utf-8")
            (rank,) = _U32.unpack(_read_exact(f, 4, f"rank of {name!r}"))
            shape = tuple(
                _U32.unpack(_read_exact(f, 4, f"extent of {name!r}"))[0]
                for _ in range(rank)
            )
            n_items = int(np.prod(shape)) if shape else 1
            raw = _read_exact(f, 4 * n_items, f"data of {name!r}")
            arr = np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float32)
            out[name] = arr
    return out
