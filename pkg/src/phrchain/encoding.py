"""Canonical binary encoding: length-prefixed concatenation, big-endian.

Every serialized structure in this package is built from two primitives:
fixed-width fields written raw, and variable fields prefixed with a
big-endian u32 length. Persistent files start with a 4-byte magic and a
u16 format version.
"""

from __future__ import annotations

import struct
from pathlib import Path


class FormatError(ValueError):
    """Raised when bytes do not parse as the expected structure."""


def u8(value: int) -> bytes:
    return struct.pack(">B", value)


def u16(value: int) -> bytes:
    return struct.pack(">H", value)


def u32(value: int) -> bytes:
    return struct.pack(">I", value)


def u64(value: int) -> bytes:
    return struct.pack(">Q", value)


def f64(value: float) -> bytes:
    return struct.pack(">d", value)


def prefixed(data: bytes) -> bytes:
    """u32 length followed by the raw bytes."""
    return u32(len(data)) + data


def prefixed_str(text: str) -> bytes:
    return prefixed(text.encode("utf-8"))


class Reader:
    """Sequential decoder over a bytes buffer; raises FormatError on overrun."""

    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self._pos + n > len(self._data):
            raise FormatError(f"truncated input: wanted {n} bytes at offset {self._pos}")
        chunk = self._data[self._pos : self._pos + n]
        self._pos += n
        return chunk

    def u8(self) -> int:
        return struct.unpack(">B", self.take(1))[0]

    def u16(self) -> int:
        return struct.unpack(">H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self.take(8))[0]

    def f64(self) -> float:
        return struct.unpack(">d", self.take(8))[0]

    def prefixed(self) -> bytes:
        return self.take(self.u32())

    def prefixed_str(self) -> str:
        try:
            return self.prefixed().decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError("invalid utf-8 in string field") from exc

    def remaining(self) -> int:
        return len(self._data) - self._pos

    def expect_end(self) -> None:
        if self.remaining() != 0:
            raise FormatError(f"{self.remaining()} trailing bytes after structure")


def write_versioned(path: Path | str, magic: bytes, version: int, payload: bytes) -> None:
    """Persist a payload under a 4-byte magic and u16 version header."""
    if len(magic) != 4:
        raise ValueError("magic must be 4 bytes")
    Path(path).write_bytes(magic + u16(version) + payload)


def read_versioned(path: Path | str, magic: bytes, version: int) -> Reader:
    """Open a versioned file, check magic and version, return a Reader over the payload."""
    data = Path(path).read_bytes()
    if len(data) < 6 or data[:4] != magic:
        raise FormatError(f"not a {magic!r} file: {path}")
    found = struct.unpack(">H", data[4:6])[0]
    if found != version:
        raise FormatError(f"unsupported {magic!r} version {found}, expected {version}")
    return Reader(data[6:])
