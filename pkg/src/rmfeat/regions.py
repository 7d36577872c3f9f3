"""Multi-scale square window enumeration over a feature map's spatial grid.

At scale ``s`` (1-based) the window side is ``2 * min(W, H) / (s + 1)``
cells and the sliding stride is 60% of that side.  The integer geometry is:

* emitted side: ``max(1, floor(2 * min(W, H) / (s + 1)))``
* windows per axis: ``ceil((extent - side_exact) / (0.6 * side_exact)) + 1``
  computed from the exact rational side, so on square maps every scale
  yields exactly ``s`` windows per axis and ``s * s`` regions, a total of
  ``sum(s^2 for s in 1..S)`` (30 when S = 4)
* origins: evenly spaced from 0 to ``extent - side`` inclusive, rounded
  half-up to integers, duplicates removed

Everything is exact integer arithmetic, so the enumeration is reproducible
bit-for-bit on any platform.  Regions are emitted scale-major, then
row-major (y outer, x inner).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .tensorio import FeatureMap


@dataclass(frozen=True)
class RegionSpec:
    """Square window on the spatial grid: top-left cell (x, y), side, scale."""

    x: int
    y: int
    side: int
    scale: int


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def _axis_origins(extent: int, min_extent: int, s: int, side: int) -> list[int]:
    # step count from the exact side 2*m/(s+1):
    # (extent - 2m/(s+1)) / (0.6 * 2m/(s+1)) == 5*(extent*(s+1) - 2m) / (6m)
    steps = _ceil_div(5 * (extent * (s + 1) - 2 * min_extent), 6 * min_extent)
    n = steps + 1
    span = extent - side
    if n == 1 or span == 0:
        return [0]
    origins = []
    for i in range(n):
        # round(i * span / (n-1)) half-up, exactly
        o = (2 * i * span + (n - 1)) // (2 * (n - 1))
        if not origins or origins[-1] != o:
            origins.append(o)
    return origins


def region_grid(width: int, height: int, scales: int) -> list[RegionSpec]:
    """Enumerate all square windows for a W x H grid at scales 1..scales."""
    if width < 1 or height < 1 or scales < 1:
        raise ValueError(f"need positive width/height/scales, got {width}x{height} S={scales}")
    m = min(width, height)
    out: list[RegionSpec] = []
    for s in range(1, scales + 1):
        side = max(1, (2 * m) // (s + 1))
        xs = _axis_origins(width, m, s, side)
        ys = _axis_origins(height, m, s, side)
        for y in ys:
            for x in xs:
                out.append(RegionSpec(x=x, y=y, side=side, scale=s))
    return out


@lru_cache(maxsize=256)
def region_matrix(width: int, height: int, scales: int) -> np.ndarray:
    """region_grid packed as a read-only (R, 3) int64 array of (x, y, side)."""
    specs = region_grid(width, height, scales)
    arr = np.array([(r.x, r.y, r.side) for r in specs], dtype=np.int64).reshape(len(specs), 3)
    arr.setflags(write=False)
    return arr


def crop(fm: FeatureMap, region: RegionSpec) -> FeatureMap:
    """Cut the (C, side, side) sub-tensor addressed by ``region``."""
    if region.side < 1 or region.x < 0 or region.y < 0:
        raise ValueError(f"invalid region {region}")
    if region.x + region.side > fm.width or region.y + region.side > fm.height:
        raise ValueError(
            f"region {region} out of bounds for {fm.width}x{fm.height} map"
        )
    sub = fm.data[:, region.y : region.y + region.side, region.x : region.x + region.side]
    return FeatureMap(sub.copy())
