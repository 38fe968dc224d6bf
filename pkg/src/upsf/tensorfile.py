"""Binary tensor container and PGM rendering.

Layout of a ``.ut`` file, all integers little-endian u32:

    magic   4 bytes  b"UPSF"
    version u32      currently 1
    dtype   u32      0 = float32, 1 = complex64 (interleaved re, im float32)
    ndim    u32
    dims    ndim * u32
    payload row-major little-endian samples
    crc32   u32      CRC-32 over every preceding byte (header + payload)

Round trips are bit-exact; any version or checksum mismatch is rejected.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

__all__ = ["TensorFileError", "write_tensor", "read_tensor", "file_crc32", "write_pgm"]

MAGIC = b"UPSF"
VERSION = 1

_DTYPE_F32 = 0
_DTYPE_C64 = 1


class TensorFileError(IOError):
    """Malformed, corrupt, or incompatible tensor file."""


def _encode(arr: np.ndarray) -> bytes:
    arr = np.asarray(arr)
    if np.iscomplexobj(arr):
        dtype_code = _DTYPE_C64
        payload = np.ascontiguousarray(arr, dtype="<c8").tobytes()
    else:
        dtype_code = _DTYPE_F32
        payload = np.ascontiguousarray(arr, dtype="<f4").tobytes()
    header = MAGIC + struct.pack("<III", VERSION, dtype_code, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    body = header + payload
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def write_tensor(path, arr: np.ndarray) -> None:
    """Write ``arr`` (real -> float32, complex -> complex64) to ``path``."""
    blob = _encode(arr)
    with open(path, "wb") as fh:
        fh.write(blob)


def read_tensor(path) -> np.ndarray:
    """Read a ``.ut`` file back as float32 or complex64 array."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 20:
        raise TensorFileError(f"{path}: truncated header")
    if blob[:4] != MAGIC:
        raise TensorFileError(f"{path}: bad magic {blob[:4]!r}")
    version, dtype_code, ndim = struct.unpack_from("<III", blob, 4)
    if version != VERSION:
        raise TensorFileError(f"{path}: unsupported version {version} (expected {VERSION})")
    if dtype_code not in (_DTYPE_F32, _DTYPE_C64):
        raise TensorFileError(f"{path}: unknown dtype code {dtype_code}")
    header_len = 16 + 4 * ndim
    if len(blob) < header_len + 4:
        raise TensorFileError(f"{path}: truncated dims")
    dims = struct.unpack_from(f"<{ndim}I", blob, 16)
    sample_size = 4 if dtype_code == _DTYPE_F32 else 8
    count = int(np.prod(dims, dtype=np.int64)) if ndim else 1
    expected = header_len + count * sample_size + 4
    if len(blob) != expected:
        raise TensorFileError(f"{path}: size {len(blob)} != expected {expected}")
    (stored_crc,) = struct.unpack_from("<I", blob, len(blob) - 4)
    actual_crc = zlib.crc32(blob[:-4]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise TensorFileError(f"{path}: CRC mismatch (stored {stored_crc:#010x}, actual {actual_crc:#010x})")
    payload = blob[header_len:-4]
    dtype = "<f4" if dtype_code == _DTYPE_F32 else "<c8"
    return np.frombuffer(payload, dtype=dtype).reshape(dims).copy()


def file_crc32(path) -> int:
    """CRC-32 of a whole file (used in dataset manifests)."""
    crc = 0
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            crc = zlib.crc32(chunk, crc)
    return crc & 0xFFFFFFFF


def write_pgm(path, db_image: np.ndarray, dynamic_range: float = 60.0) -> None:
    """Render a [0, dynamic_range] dB image as binary 8-bit PGM (P5).

    Pixel value = round(255 * dB / dynamic_range).
    """
    img = np.asarray(db_image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"expected a 2D image, got shape {img.shape}")
    gray = np.clip(np.rint(255.0 * img / dynamic_range), 0, 255).astype(np.uint8)
    h, w = gray.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(gray.tobytes())
