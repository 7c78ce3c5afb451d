"""Binary checkpoint container.

Layout, all integers little-endian:

    magic   4 bytes  "SPDE"
    version u32      currently 1
    config  u32 length + utf-8 text (the full config file content)
    count   u32      number of named arrays
    record  u16 name length + utf-8 name
            u8  dtype code (0 <f4, 1 <f8, 2 <u8, 3 <i8)
            u8  ndim, then ndim * u32 dims
            raw array bytes, C order

Raw bytes round-trip bit-exactly; resuming a run from a checkpoint must be
indistinguishable from never having stopped.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import ParseError

MAGIC = b"SPDE"
VERSION = 1

_CODES = {np.dtype("<f4"): 0, np.dtype("<f8"): 1, np.dtype("<u8"): 2, np.dtype("<i8"): 3}
_DTYPES = {v: k for k, v in _CODES.items()}


def save_arrays(path: str, config_text: str, arrays: dict) -> None:
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<I", VERSION)
    ctext = config_text.encode()
    blob += struct.pack("<I", len(ctext)) + ctext
    blob += struct.pack("<I", len(arrays))
    for name, arr in arrays.items():
        # asarray(order="C"), not ascontiguousarray: the latter promotes 0-d to 1-d
        arr = np.asarray(arr, order="C")
        dt = arr.dtype.newbyteorder("<")
        if dt not in _CODES:
            if arr.dtype.kind == "f":
                dt = np.dtype("<f8") if arr.dtype.itemsize == 8 else np.dtype("<f4")
            elif arr.dtype.kind == "u":
                dt = np.dtype("<u8")
            elif arr.dtype.kind == "i":
                dt = np.dtype("<i8")
            else:
                raise ParseError(f"cannot serialize array {name} of dtype {arr.dtype}")
            arr = arr.astype(dt)
        nb = name.encode()
        blob += struct.pack("<H", len(nb)) + nb
        blob += struct.pack("<BB", _CODES[dt], arr.ndim)
        blob += struct.pack(f"<{arr.ndim}I", *arr.shape)
        blob += arr.astype(dt, copy=False).tobytes()
    with open(path, "wb") as fh:
        fh.write(bytes(blob))


class _Reader:
    def __init__(self, blob: bytes, path: str):
        self.blob, self.pos, self.path = blob, 0, path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise ParseError(f"{self.path}: truncated at byte {self.pos}")
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_arrays(path: str) -> tuple[str, dict]:
    with open(path, "rb") as fh:
        blob = fh.read()
    rd = _Reader(blob, str(path))
    if rd.take(4) != MAGIC:
        raise ParseError(f"{path}: bad magic at byte 0")
    (version,) = rd.unpack("<I")
    if version != VERSION:
        raise ParseError(f"{path}: unsupported version {version}")
    (clen,) = rd.unpack("<I")
    config_text = rd.take(clen).decode()
    (count,) = rd.unpack("<I")
    arrays = {}
    for _ in range(count):
        (nlen,) = rd.unpack("<H")
        name = rd.take(nlen).decode()
        code, ndim = rd.unpack("<BB")
        if code not in _DTYPES:
            raise ParseError(f"{path}: unknown dtype code {code} at byte {rd.pos}")
        shape = rd.unpack(f"<{ndim}I") if ndim else ()
        dt = _DTYPES[code]
        n_items = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        raw = rd.take(n_items * dt.itemsize)
        arrays[name] = np.frombuffer(raw, dtype=dt).reshape(shape).copy()
    if rd.pos != len(blob):
        raise ParseError(f"{path}: {len(blob) - rd.pos} trailing bytes at byte {rd.pos}")
    return config_text, arrays
