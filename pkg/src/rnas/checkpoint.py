"""Named-array checkpoint files.

Layout (little endian)::

    b"RNASCKPT"  u32 version  u32 count
    count x [ u16 name_len, name (utf-8), u8 dtype_len, dtype str (ascii),
              u8 ndim, ndim x u64 dims, raw C-order data ]
"""

import struct
from pathlib import Path

import numpy as np

MAGIC = b"RNASCKPT"
VERSION = 1


def save_arrays(path, arrays):
    """Write ``{name: array}`` in sorted name order."""
    chunks = [MAGIC, struct.pack("<II", VERSION, len(arrays))]
    for name in sorted(arrays):
        arr = np.asarray(arrays[name], order="C")
        dt = arr.dtype.newbyteorder("<") if arr.dtype.byteorder == ">" else arr.dtype
        arr = arr.astype(dt, copy=False)
        name_b = name.encode("utf-8")
        dtype_b = dt.str.encode("ascii")
        chunks.append(struct.pack("<H", len(name_b)) + name_b)
        chunks.append(struct.pack("<B", len(dtype_b)) + dtype_b)
        chunks.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape))
        chunks.append(arr.tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_arrays(path):
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    version, count = struct.unpack_from("<II", raw, 8)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    pos = 16
    out = {}
    try:
        for _ in range(count):
            (n,) = struct.unpack_from("<H", raw, pos)
            pos += 2
            name = raw[pos : pos + n].decode("utf-8")
            pos += n
            (n,) = struct.unpack_from("<B", raw, pos)
            pos += 1
            dtype = np.dtype(raw[pos : pos + n].decode("ascii"))
            pos += n
            (ndim,) = struct.unpack_from("<B", raw, pos)
            pos += 1
            shape = struct.unpack_from(f"<{ndim}Q", raw, pos)
            pos += 8 * ndim
            nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
            if pos + nbytes > len(raw):
                raise ValueError(f"{path}: truncated data for {name!r} at byte offset {pos}")
            out[name] = np.frombuffer(raw, dtype=dtype, count=nbytes // dtype.itemsize, offset=pos).reshape(shape).copy()
            pos += nbytes
    except struct.error as exc:
        raise ValueError(f"{path}: truncated header at byte offset {pos}") from exc
    return out


def save_module(path, module):
    save_arrays(path, module.state_dict())


def load_module(path, module, strict=True):
    module.load_state_dict(load_arrays(path), strict=strict)
    return module
