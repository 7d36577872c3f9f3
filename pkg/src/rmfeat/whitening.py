"""PCA-whitening post-processing for pooled regional vectors.

Fitting: unit-normalize every sample, center on the sample mean, take the
eigendecomposition of the (population) covariance, keep the top ``d``
directions and scale each by ``1 / sqrt(eigenvalue + eps)``.  Applying:

    out = unit(basis @ (unit(v) - mean))

so outputs always have norm 1 (or exactly 0 when the projection
annihilates the input).  One model is fit per pooling mode and shared by
all input resolutions.

The eps guard (default 1e-6) keeps near-singular covariances harmless:
blank, constant regions are common on white-background artwork and can
zero out whole directions.

Model file RMPW1, all little-endian: magic b"RMPW", version u32, D u32,
d u32, eps f32, mean D*f32, eigenvalues d*f32, basis d*D*f32 row-major.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FitError, FormatError
from .tensorio import _normalize_rows

WHITENING_MAGIC = b"RMPW"
WHITENING_VERSION = 1
DEFAULT_EPS = 1e-6


@dataclass(frozen=True)
class WhiteningModel:
    mean: np.ndarray  # (D,) float32
    basis: np.ndarray  # (d, D) float32, rows = scaled principal directions
    eigenvalues: np.ndarray  # (d,) float32, non-increasing
    eps: float

    def __post_init__(self):
        if self.basis.ndim != 2 or self.mean.shape != (self.basis.shape[1],):
            raise ValueError("basis must be (d, D) with mean of length D")
        if self.eigenvalues.shape != (self.basis.shape[0],):
            raise ValueError("need one eigenvalue per basis row")

    @property
    def dim_in(self) -> int:
        return self.basis.shape[1]

    @property
    def dim_out(self) -> int:
        return self.basis.shape[0]


class CovarianceAccumulator:
    """Streaming mean/covariance of unit-normalized rows, float64 sums."""

    def __init__(self, dim: int):
        self.dim = int(dim)
        self.count = 0
        self._sum = np.zeros(dim, dtype=np.float64)
        self._outer = np.zeros((dim, dim), dtype=np.float64)

    def add(self, rows: np.ndarray) -> None:
        rows = np.asarray(rows)
        if rows.ndim != 2 or rows.shape[1] != self.dim:
            raise ValueError(f"expected (n, {self.dim}) rows, got {rows.shape}")
        normed = _normalize_rows(rows)
        self._sum += normed.sum(axis=0)
        self._outer += normed.T @ normed
        self.count += rows.shape[0]

    def moments(self) -> tuple[np.ndarray, np.ndarray]:
        if self.count == 0:
            raise FitError("no samples accumulated")
        mean = self._sum / self.count
        cov = self._outer / self.count - np.outer(mean, mean)
        return mean, cov


def fit(samples: np.ndarray, dim_out: int, eps: float = DEFAULT_EPS) -> WhiteningModel:
    """Fit a whitening model on (n, D) pooled vectors; requires n > dim_out."""
    samples = np.asarray(samples)
    if samples.ndim != 2:
        raise ValueError(f"samples must be (n, D), got {samples.shape}")
    acc = CovarianceAccumulator(samples.shape[1])
    acc.add(samples)
    return fit_accumulated(acc, dim_out, eps)


def fit_accumulated(acc: CovarianceAccumulator, dim_out: int, eps: float = DEFAULT_EPS) -> WhiteningModel:
    if dim_out < 1 or dim_out > acc.dim:
        raise FitError(f"target dim {dim_out} not in [1, {acc.dim}]")
    if acc.count <= dim_out:
        raise FitError(f"need more than {dim_out} samples to fit, got {acc.count}")
    eps = float(np.float32(eps))  # the model file stores eps as float32
    mean, cov = acc.moments()
    eigval, eigvec = np.linalg.eigh(cov)  # ascending
    order = np.argsort(eigval)[::-1][:dim_out]
    eigval = np.maximum(eigval[order], 0.0)
    directions = eigvec[:, order].T  # (d, D)
    # eigh leaves the sign of each vector arbitrary; pin it so repeated
    # fits write byte-identical model files.
    for row in directions:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0.0:
            row *= -1.0
    scale = 1.0 / np.sqrt(eigval + eps)
    basis = (directions * scale[:, None]).astype(np.float32)
    return WhiteningModel(
        mean=mean.astype(np.float32),
        basis=basis,
        eigenvalues=eigval.astype(np.float32),
        eps=float(eps),
    )


def transform(model: WhiteningModel, rows: np.ndarray) -> np.ndarray:
    """Centered projection without the final renormalization, float64 (n, d).

    Inputs are unit-normalized and rounded to float32 first (the same bits
    ``l2_normalize`` produces), so a row equal to the model mean centers to
    exactly zero.
    """
    rows = np.asarray(rows)
    if rows.ndim != 2 or rows.shape[1] != model.dim_in:
        raise ValueError(f"expected (n, {model.dim_in}) rows, got {rows.shape}")
    normalized = _normalize_rows(rows).astype(np.float32)
    centered = normalized.astype(np.float64) - model.mean.astype(np.float64)
    return centered @ model.basis.astype(np.float64).T


def apply_batch(model: WhiteningModel, rows: np.ndarray) -> np.ndarray:
    """Whiten and renormalize rows; float32 (n, d), each row unit or zero."""
    projected = transform(model, rows)
    return _normalize_rows(projected).astype(np.float32)


def apply(model: WhiteningModel, v: np.ndarray) -> np.ndarray:
    """Whiten a single vector: unit(basis @ (unit(v) - mean))."""
    v = np.asarray(v)
    if v.shape != (model.dim_in,):
        raise ValueError(f"expected ({model.dim_in},) vector, got {v.shape}")
    return apply_batch(model, v[None, :])[0]


def write_whitening(path: str | Path, model: WhiteningModel) -> None:
    with open(path, "wb") as f:
        f.write(WHITENING_MAGIC)
        f.write(struct.pack("<III", WHITENING_VERSION, model.dim_in, model.dim_out))
        f.write(struct.pack("<f", model.eps))
        f.write(model.mean.astype("<f4").tobytes())
        f.write(model.eigenvalues.astype("<f4").tobytes())
        f.write(model.basis.astype("<f4").tobytes())


def read_whitening(path: str | Path) -> WhiteningModel:
    raw = Path(path).read_bytes()
    if len(raw) < 4 or raw[:4] != WHITENING_MAGIC:
        raise FormatError(f"{path}: bad magic at byte 0, expected {WHITENING_MAGIC!r}")
    if len(raw) < 20:
        raise FormatError(f"{path}: header truncated at byte {len(raw)}")
    version, dim_in, dim_out = struct.unpack_from("<III", raw, 4)
    if version != WHITENING_VERSION:
        raise FormatError(f"{path}: unsupported version {version} at byte 4")
    (eps,) = struct.unpack_from("<f", raw, 16)
    expected = 20 + 4 * (dim_in + dim_out + dim_out * dim_in)
    if len(raw) != expected:
        raise FormatError(f"{path}: truncated at byte {len(raw)}, expected {expected} bytes")
    off = 20
    mean = np.frombuffer(raw, "<f4", dim_in, off).copy()
    off += 4 * dim_in
    eigenvalues = np.frombuffer(raw, "<f4", dim_out, off).copy()
    off += 4 * dim_out
    basis = np.frombuffer(raw, "<f4", dim_out * dim_in, off).reshape(dim_out, dim_in).copy()
    return WhiteningModel(mean=mean, basis=basis, eigenvalues=eigenvalues, eps=float(eps))
