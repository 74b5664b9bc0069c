"""Little-endian binary reader/writer helpers used by the on-disk formats."""

import struct

import numpy as np

from .errors import ParseError

F64 = np.dtype("<f8")


class Reader:
    def __init__(self, buf: bytes, path=None):
        self.buf = buf
        self.pos = 0
        self.path = path

    def fail(self, message: str, offset: int | None = None):
        raise ParseError(message, self.pos if offset is None else offset, self.path)

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.buf):
            self.fail(f"truncated file: wanted {n} bytes, {len(self.buf) - self.pos} left")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        size = struct.calcsize("<" + fmt)
        return struct.unpack("<" + fmt, self.take(size))

    def magic(self, expected: bytes):
        got = self.take(len(expected))
        if got != expected:
            self.fail(f"bad magic {got!r}, expected {expected!r}", 0)

    def f64(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * count), dtype=F64).astype(np.float64)

    def array(self, dtype: str, count: int) -> np.ndarray:
        dt = np.dtype(dtype)
        return np.frombuffer(self.take(dt.itemsize * count), dtype=dt).copy()

    def finish(self):
        if self.pos != len(self.buf):
            self.fail(f"{len(self.buf) - self.pos} trailing bytes")


def f64_bytes(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype=F64).tobytes()


def read_file(path) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read: {exc.strerror}", None, path) from exc
