"""Reduce a region's (C, w, w) activations to one vector.

Three modes: ``mac`` (per-channel spatial max), ``sum`` (per-channel
spatial sum) and ``smac`` (unit-normalized max half concatenated with
unit-normalized sum half, max first, output dim 2C).  Normalizing each
smac half separately keeps the two halves at equal energy: raw sums run
about w^2 times larger than maxima and would otherwise dominate any
downstream projection.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from . import kernels
from .errors import NumericError
from .tensorio import _normalize_rows


class PoolingMode(str, Enum):
    MAC = "mac"
    SUM = "sum"
    SMAC = "smac"

    @classmethod
    def parse(cls, text: str) -> "PoolingMode":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"unknown pooling mode {text!r}, expected mac, sum or smac") from None

    def output_dim(self, channels: int) -> int:
        return 2 * channels if self is PoolingMode.SMAC else channels


def pool(region: np.ndarray, mode: PoolingMode) -> np.ndarray:
    """Pool one (C, h, w) tensor to a float32 vector of dim C (2C for smac)."""
    region = np.ascontiguousarray(region, dtype=np.float32)
    if region.ndim != 3 or min(region.shape) < 1:
        raise ValueError(f"expected (C, h, w) region, got shape {region.shape}")
    if not np.isfinite(region).all():
        raise NumericError("region contains non-finite activations")
    macs = region.max(axis=(1, 2))
    sums = region.sum(axis=(1, 2), dtype=np.float64).astype(np.float32)
    if mode is PoolingMode.MAC:
        return macs
    if mode is PoolingMode.SUM:
        return sums
    return _smac(macs[None, :], sums[None, :])[0]


def pool_region_batch(data: np.ndarray, regions: np.ndarray, mode: PoolingMode) -> np.ndarray:
    """Pool every (x, y, side) window of ``regions`` over one (C, H, W) map.

    The hot path: dispatches to the active kernel lane and returns float32
    (R, C) or (R, 2C) rows in region order.
    """
    macs, sums = kernels.pool_regions(np.ascontiguousarray(data, dtype=np.float32), regions)
    if mode is PoolingMode.MAC:
        return macs
    if mode is PoolingMode.SUM:
        return sums
    return _smac(macs, sums)


def _smac(macs: np.ndarray, sums: np.ndarray) -> np.ndarray:
    left = _normalize_rows(macs).astype(np.float32)
    right = _normalize_rows(sums).astype(np.float32)
    return np.concatenate([left, right], axis=1)
