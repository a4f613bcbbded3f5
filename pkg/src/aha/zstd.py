"""Minimal ctypes binding to the system libzstd (one-shot frame API).

No Python zstd package is assumed; the shared library ships with the OS.
Only whole-buffer compress/decompress is needed for per-epoch store files.
"""

from __future__ import annotations

import ctypes
import ctypes.util

from .errors import StoreError

DEFAULT_LEVEL = 3

_CONTENTSIZE_UNKNOWN = 2**64 - 1
_CONTENTSIZE_ERROR = 2**64 - 2


def _load() -> ctypes.CDLL:
    name = ctypes.util.find_library("zstd") or "libzstd.so.1"
    try:
        lib = ctypes.CDLL(name)
    except OSError as exc:
        raise StoreError(f"libzstd not available: {exc}") from exc
    lib.ZSTD_compressBound.restype = ctypes.c_size_t
    lib.ZSTD_compressBound.argtypes = [ctypes.c_size_t]
    lib.ZSTD_compress.restype = ctypes.c_size_t
    lib.ZSTD_compress.argtypes = [
        ctypes.c_void_p, ctypes.c_size_t, ctypes.c_char_p, ctypes.c_size_t, ctypes.c_int,
    ]
    lib.ZSTD_decompress.restype = ctypes.c_size_t
    lib.ZSTD_decompress.argtypes = [
        ctypes.c_void_p, ctypes.c_size_t, ctypes.c_char_p, ctypes.c_size_t,
    ]
    lib.ZSTD_isError.restype = ctypes.c_uint
    lib.ZSTD_isError.argtypes = [ctypes.c_size_t]
    lib.ZSTD_getFrameContentSize.restype = ctypes.c_ulonglong
    lib.ZSTD_getFrameContentSize.argtypes = [ctypes.c_char_p, ctypes.c_size_t]
    return lib


_lib: ctypes.CDLL | None = None


def _zstd() -> ctypes.CDLL:
    global _lib
    if _lib is None:
        _lib = _load()
    return _lib


def compress(data: bytes, level: int = DEFAULT_LEVEL) -> bytes:
    lib = _zstd()
    bound = lib.ZSTD_compressBound(len(data))
    dst = ctypes.create_string_buffer(bound)
    n = lib.ZSTD_compress(dst, bound, data, len(data), level)
    if lib.ZSTD_isError(n):
        raise StoreError("zstd compression failed")
    return dst.raw[:n]


def decompress(data: bytes) -> bytes:
    lib = _zstd()
    size = lib.ZSTD_getFrameContentSize(data, len(data))
    if size in (_CONTENTSIZE_UNKNOWN, _CONTENTSIZE_ERROR):
        raise StoreError("not a zstd frame with a known content size")
    dst = ctypes.create_string_buffer(size) if size else ctypes.create_string_buffer(1)
    n = lib.ZSTD_decompress(dst, size, data, len(data))
    if lib.ZSTD_isError(n) or n != size:
        raise StoreError("zstd decompression failed (corrupt frame)")
    return dst.raw[:n]
