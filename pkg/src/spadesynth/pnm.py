"""Binary PPM (P6) and PGM (P5) reading and writing.

Parse failures raise ParseError carrying the byte offset where the problem
was found. Only maxval 255 is supported; that is what the rest of the
package writes.
"""

from __future__ import annotations

import numpy as np

from .errors import ParseError


class _Scanner:
    def __init__(self, blob: bytes, path: str):
        self.blob = blob
        self.pos = 0
        self.path = path

    def fail(self, msg: str):
        raise ParseError(f"{self.path}: {msg} at byte {self.pos}")

    def _skip_space(self):
        # whitespace and '#' comments are legal between header tokens
        while self.pos < len(self.blob):
            c = self.blob[self.pos : self.pos + 1]
            if c.isspace():
                self.pos += 1
            elif c == b"#":
                while self.pos < len(self.blob) and self.blob[self.pos : self.pos + 1] != b"\n":
                    self.pos += 1
            else:
                return

    def token(self) -> bytes:
        self._skip_space()
        start = self.pos
        while self.pos < len(self.blob) and not self.blob[self.pos : self.pos + 1].isspace():
            self.pos += 1
        if self.pos == start:
            self.fail("unexpected end of header")
        return self.blob[start : self.pos]

    def int_token(self, what: str) -> int:
        tok = self.token()
        try:
            val = int(tok)
        except ValueError:
            self.fail(f"non-numeric {what} {tok!r}")
        if val <= 0 and what != "maxval":
            self.fail(f"non-positive {what} {val}")
        return val

    def raster(self, count: int) -> bytes:
        # exactly one whitespace byte separates the header from the raster
        if self.pos >= len(self.blob) or not self.blob[self.pos : self.pos + 1].isspace():
            self.fail("missing whitespace before raster")
        self.pos += 1
        data = self.blob[self.pos : self.pos + count]
        if len(data) < count:
            self.pos += len(data)
            self.fail(f"raster truncated, expected {count} bytes")
        self.pos += count
        return data


def _read(path: str, magic: bytes, channels: int) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    sc = _Scanner(blob, str(path))
    got = sc.token()
    if got != magic:
        sc.pos -= len(got)
        sc.fail(f"bad magic {got!r}, expected {magic.decode()}")
    width = sc.int_token("width")
    height = sc.int_token("height")
    maxval = sc.int_token("maxval")
    if maxval != 255:
        sc.fail(f"unsupported maxval {maxval}")
    raster = sc.raster(width * height * channels)
    arr = np.frombuffer(raster, dtype=np.uint8)
    if channels == 1:
        return arr.reshape(height, width).copy()
    return arr.reshape(height, width, channels).copy()


def read_ppm(path: str) -> np.ndarray:
    """8-bit RGB image, shape (H, W, 3)."""
    return _read(path, b"P6", 3)


def read_pgm(path: str) -> np.ndarray:
    """8-bit gray raster, shape (H, W)."""
    return _read(path, b"P5", 1)


def _write(path: str, magic: bytes, arr: np.ndarray) -> None:
    h, w = arr.shape[:2]
    with open(path, "wb") as fh:
        fh.write(magic + b"\n%d %d\n255\n" % (w, h))
        fh.write(np.ascontiguousarray(arr, dtype=np.uint8).tobytes())


def write_ppm(path: str, img: np.ndarray) -> None:
    if img.ndim != 3 or img.shape[2] != 3:
        raise ParseError(f"{path}: image must be (H, W, 3), got {img.shape}")
    _write(path, b"P6", img)


def write_pgm(path: str, gray: np.ndarray) -> None:
    if gray.ndim != 2:
        raise ParseError(f"{path}: raster must be (H, W), got {gray.shape}")
    _write(path, b"P5", gray)
