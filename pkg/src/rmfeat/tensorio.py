"""Core tensor values and the binary file formats used throughout the package.

Two formats, both little-endian, all floats 32-bit:

FMT1 tensor file (extension ``.rmtf``)::

    magic   4 bytes  b"RMTF"
    version u32      1
    ndim    u32
    dims    u32 * ndim
    dtype   u8       1 = float32
    payload row-major float32, 4 * prod(dims) bytes

RMDS1 descriptor file (extension ``.rmds``)::

    magic   4 bytes  b"RMDS"
    version u32      1
    count   u64
    dim     u32
    record  (count times): id_len u16, id utf-8, dim * float32

Files are bit-exact: writing a tensor and reading it back reproduces the
same bytes in memory.  Readers reject bad magic, unknown versions or
dtypes, truncated payloads and non-finite values, naming the byte offset
of the violation.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Sequence

import numpy as np

from .errors import FormatError, NumericError

TENSOR_MAGIC = b"RMTF"
DESCRIPTOR_MAGIC = b"RMDS"
FORMAT_VERSION = 1
DTYPE_FLOAT32 = 1

_TENSOR_HEAD = struct.Struct("<II")  # version, ndim
_DESC_HEAD = struct.Struct("<IQI")  # version, count, dim


@dataclass(frozen=True)
class FeatureMap:
    """One convolutional activation tensor, laid out (channel, y, x).

    ``data`` is float32 with shape (C, H, W); every value must be finite.
    Instances are immutable and safe to share between threads.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise ValueError(f"feature map must be (C, H, W) with positive dims, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise NumericError("feature map contains non-finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


def l2_normalize(v: np.ndarray) -> np.ndarray:
    """Scale ``v`` to unit Euclidean norm; the zero vector stays zero.

    The norm is accumulated in float64, the result returned as float32.
    Idempotent within float32 rounding.
    """
    v = np.asarray(v, dtype=np.float32)
    if v.ndim != 1 or v.shape[0] < 1:
        raise ValueError(f"expected a 1-d vector, got shape {v.shape}")
    if not np.isfinite(v).all():
        raise NumericError("cannot normalize non-finite vector")
    return _normalize_rows(v[None, :]).astype(np.float32)[0]


def _normalize_rows(x: np.ndarray) -> np.ndarray:
    """Row-wise unit normalization in float64, zero rows preserved."""
    x64 = np.asarray(x, dtype=np.float64)
    norms = np.sqrt(np.einsum("ij,ij->i", x64, x64))
    norms[norms == 0.0] = 1.0
    return x64 / norms[:, None]


def write_tensor(path: str | Path, tensor: np.ndarray | FeatureMap) -> None:
    """Write an n-dimensional float32 tensor as an FMT1 file."""
    if isinstance(tensor, FeatureMap):
        arr = tensor.data
    else:
        arr = np.ascontiguousarray(tensor, dtype=np.float32)
        if not np.isfinite(arr).all():
            raise NumericError("refusing to write non-finite tensor")
    with open(path, "wb") as f:
        f.write(TENSOR_MAGIC)
        f.write(_TENSOR_HEAD.pack(FORMAT_VERSION, arr.ndim))
        f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        f.write(struct.pack("<B", DTYPE_FLOAT32))
        f.write(arr.tobytes())


def read_tensor(path: str | Path) -> np.ndarray:
    """Read an FMT1 file back into a float32 array, validating the format."""
    raw = Path(path).read_bytes()
    if len(raw) < 4 or raw[:4] != TENSOR_MAGIC:
        raise FormatError(f"{path}: bad magic at byte 0, expected {TENSOR_MAGIC!r}")
    if len(raw) < 12:
        raise FormatError(f"{path}: header truncated at byte {len(raw)}")
    version, ndim = _TENSOR_HEAD.unpack_from(raw, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version} at byte 4")
    dims_end = 12 + 4 * ndim
    if ndim < 1 or len(raw) < dims_end + 1:
        raise FormatError(f"{path}: header truncated at byte {len(raw)}")
    dims = struct.unpack_from(f"<{ndim}I", raw, 12)
    if min(dims) < 1:
        raise FormatError(f"{path}: zero-sized dimension in header at byte 12")
    dtype = raw[dims_end]
    if dtype != DTYPE_FLOAT32:
        raise FormatError(f"{path}: unknown dtype {dtype} at byte {dims_end}")
    payload_start = dims_end + 1
    expected = 4 * int(np.prod(dims))
    if len(raw) - payload_start != expected:
        raise FormatError(
            f"{path}: payload truncated at byte {len(raw)}, expected {payload_start + expected} bytes total"
        )
    arr = np.frombuffer(raw, dtype="<f4", count=expected // 4, offset=payload_start)
    finite = np.isfinite(arr)
    if not finite.all():
        bad = int(np.argmin(finite))
        raise FormatError(f"{path}: non-finite value at byte {payload_start + 4 * bad}")
    return arr.reshape(dims).copy()


def write_feature_map(path: str | Path, fm: FeatureMap) -> None:
    write_tensor(path, fm)


def read_feature_map(path: str | Path) -> FeatureMap:
    arr = read_tensor(path)
    if arr.ndim != 3:
        raise FormatError(f"{path}: expected 3 dims for a feature map, got {arr.ndim}")
    return FeatureMap(arr)


class DescriptorWriter:
    """Streams (id, vector) records into an RMDS1 file.

    The record count is patched into the header on close, so the number of
    records does not need to be known up front.  Single writer only.
    """

    def __init__(self, path: str | Path, dim: int):
        if dim < 1:
            raise ValueError("descriptor dim must be positive")
        self.dim = int(dim)
        self.count = 0
        self._seen: set[str] = set()
        self._f: BinaryIO = open(path, "wb")
        self._f.write(DESCRIPTOR_MAGIC)
        self._f.write(_DESC_HEAD.pack(FORMAT_VERSION, 0, self.dim))

    def write(self, image_id: str, vector: np.ndarray) -> None:
        if image_id in self._seen:
            raise FormatError(f"duplicate descriptor id {image_id!r}")
        vec = np.ascontiguousarray(vector, dtype="<f4")
        if vec.shape != (self.dim,):
            raise ValueError(f"descriptor for {image_id!r} has shape {vec.shape}, expected ({self.dim},)")
        ident = image_id.encode("utf-8")
        if len(ident) > 0xFFFF:
            raise ValueError(f"id too long: {image_id!r}")
        self._seen.add(image_id)
        self._f.write(struct.pack("<H", len(ident)))
        self._f.write(ident)
        self._f.write(vec.tobytes())
        self.count += 1

    def close(self) -> None:
        if self._f.closed:
            return
        self._f.seek(8)
        self._f.write(struct.pack("<Q", self.count))
        self._f.close()

    def __enter__(self) -> "DescriptorWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def write_descriptors(path: str | Path, ids: Sequence[str], vectors: np.ndarray) -> None:
    """Write parallel ids / (n, dim) vectors as an RMDS1 file."""
    vectors = np.asarray(vectors, dtype=np.float32)
    if vectors.ndim != 2 or len(ids) != vectors.shape[0]:
        raise ValueError("ids and vectors must be parallel, vectors (n, dim)")
    with DescriptorWriter(path, vectors.shape[1]) as w:
        for ident, vec in zip(ids, vectors):
            w.write(ident, vec)


def read_descriptors(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Read an RMDS1 file into (ids, float32 (count, dim) array).

    Streams the file in chunks; peak memory is the output array plus a
    small parse buffer, so million-record files stay cheap to load.
    """
    with open(path, "rb") as f:
        head = f.read(20)
        if len(head) < 4 or head[:4] != DESCRIPTOR_MAGIC:
            raise FormatError(f"{path}: bad magic at byte 0, expected {DESCRIPTOR_MAGIC!r}")
        if len(head) < 20:
            raise FormatError(f"{path}: header truncated at byte {len(head)}")
        version, count, dim = _DESC_HEAD.unpack(head[4:])
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported version {version} at byte 4")
        if dim < 1:
            raise FormatError(f"{path}: dim must be positive, at byte 16")
        vectors = np.empty((count, dim), dtype=np.float32)
        ids: list[str] = [""] * count
        row_bytes = 4 * dim
        chunk_size = 8 << 20
        buf = b""
        pos = 0
        filled = 0
        offset = 20  # absolute offset of buf[pos] in the file
        while filled < count:
            more = f.read(chunk_size)
            buf = buf[pos:] + more
            pos = 0
            if not more and len(buf) == 0:
                raise FormatError(f"{path}: truncated at byte {offset}, record {filled} of {count}")
            blen = len(buf)
            progressed = False
            while filled < count:
                if pos + 2 > blen:
                    break
                id_len = buf[pos] | (buf[pos + 1] << 8)
                end = pos + 2 + id_len + row_bytes
                if end > blen:
                    break
                ids[filled] = buf[pos + 2 : pos + 2 + id_len].decode("utf-8")
                vectors[filled] = np.frombuffer(buf, dtype="<f4", count=dim, offset=pos + 2 + id_len)
                pos = end
                filled += 1
                progressed = True
            offset += pos
            if not more and not progressed and filled < count:
                raise FormatError(f"{path}: truncated at byte {offset}, record {filled} of {count}")
    return ids, vectors


def iter_descriptors(path: str | Path) -> Iterable[tuple[str, np.ndarray]]:
    """Yield (id, vector) pairs without materializing the whole file."""
    ids, vectors = read_descriptors(path)
    for ident, vec in zip(ids, vectors):
        yield ident, vec
