"""Compose full image descriptors from maps, regions, pooling and attention.

Per resolution, every multi-scale square region is pooled, whitened to d
dims and weighted by its attention IDF (weight 1 with attention off); the
weighted vectors are summed across all regions and resolutions in one
fixed order (resolution-major, region-major, float64 accumulator) and the
sum is unit-normalized.  With the default four scales and three
resolutions that is 90 regional terms per image.

``describe_batch`` runs a worker pool over image ids but writes records
strictly in input order, so descriptor files are byte-identical for any
worker count.  Per-image failures are collected into a sidecar manifest
(``id<TAB>status`` lines) instead of aborting the batch.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .attention import AttentionDictionary, attend_batch
from .backbone import DEFAULT_RESOLUTIONS, validate_resolutions
from .errors import BatchError, ConfigError, InputError, RmfeatError
from .pooling import PoolingMode, pool_region_batch
from .regions import region_matrix
from .tensorio import DescriptorWriter, FeatureMap, l2_normalize
from .whitening import WhiteningModel, apply_batch

logger = logging.getLogger(__name__)

DEFAULT_SCALES = 4


@dataclass(frozen=True)
class PipelineConfig:
    whitening: WhiteningModel
    pooling: PoolingMode = PoolingMode.MAC
    multi_resolution: bool = True
    attention: bool = False
    scales: int = DEFAULT_SCALES
    resolutions: tuple[int, ...] = DEFAULT_RESOLUTIONS
    dictionary: AttentionDictionary | None = None

    def __post_init__(self):
        object.__setattr__(self, "resolutions", validate_resolutions(self.resolutions))
        if self.scales < 1:
            raise ConfigError(f"scale count must be positive, got {self.scales}")
        if self.attention and self.dictionary is None:
            raise ConfigError("attention requires a dictionary")
        if self.dictionary is not None and self.dictionary.dim != self.whitening.dim_out:
            raise ConfigError(
                f"dictionary dim {self.dictionary.dim} != whitened dim {self.whitening.dim_out}"
            )

    @property
    def effective_resolutions(self) -> tuple[int, ...]:
        """All resolutions when multi-resolution is on, else the middle one."""
        if self.multi_resolution:
            return self.resolutions
        return (self.resolutions[len(self.resolutions) // 2],)


@dataclass(frozen=True)
class ImageDescriptor:
    image_id: str
    vector: np.ndarray  # (d,) float32, unit norm or zero


def describe(maps: Sequence[FeatureMap], config: PipelineConfig, image_id: str = "") -> ImageDescriptor:
    """Aggregate one image's per-resolution maps into a single descriptor.

    ``maps`` must align with ``config.effective_resolutions``.
    """
    sizes = config.effective_resolutions
    if len(maps) != len(sizes):
        raise ValueError(f"got {len(maps)} maps for {len(sizes)} resolutions")
    channels = maps[0].channels
    expected_dim = config.pooling.output_dim(channels)
    if expected_dim != config.whitening.dim_in:
        raise ConfigError(
            f"pooled dim {expected_dim} does not match whitening input dim {config.whitening.dim_in}"
        )
    total = np.zeros(config.whitening.dim_out, dtype=np.float64)
    for size, fm in zip(sizes, maps):
        if fm.channels != channels:
            raise InputError(image_id, f"channel mismatch across resolutions at {size}")
        try:
            regions = region_matrix(fm.width, fm.height, config.scales)
            pooled = pool_region_batch(fm.data, regions, config.pooling)
            whitened = apply_batch(config.whitening, pooled)
            if config.attention:
                weights = attend_batch(config.dictionary, whitened).astype(np.float64)
                total += whitened.astype(np.float64).T @ weights
            else:
                total += whitened.astype(np.float64).sum(axis=0)
        except InputError:
            raise
        except Exception as exc:
            raise InputError(image_id, f"resolution {size}: {exc}") from exc
    return ImageDescriptor(image_id=image_id, vector=l2_normalize(total.astype(np.float32)))


def describe_from_backbone(backbone, image_id: str, config: PipelineConfig) -> ImageDescriptor:
    maps = backbone.extract(image_id, config.effective_resolutions)
    return describe(maps, config, image_id)


@dataclass(frozen=True)
class BatchReport:
    written: int
    failures: tuple[tuple[str, str], ...]  # (image id, reason)

    @property
    def ok(self) -> bool:
        return not self.failures


def describe_batch(
    image_ids: Sequence[str],
    backbone,
    config: PipelineConfig,
    out_path: str | Path,
    jobs: int = 1,
    manifest_path: str | Path | None = None,
) -> BatchReport:
    """Describe every id and write an RMDS1 file in input order.

    Failures are recorded, not fatal; the batch only errors when every
    single image fails.  Output bytes do not depend on ``jobs``.
    """
    out_path = Path(out_path)
    manifest_path = Path(manifest_path) if manifest_path else out_path.with_suffix(out_path.suffix + ".manifest")

    def work(image_id: str):
        try:
            return describe_from_backbone(backbone, image_id, config), None
        except RmfeatError as exc:
            return None, str(exc)

    if jobs > 1 and len(image_ids) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, image_ids))
    else:
        results = [work(i) for i in image_ids]

    failures: list[tuple[str, str]] = []
    with DescriptorWriter(out_path, config.whitening.dim_out) as writer:
        with open(manifest_path, "w", encoding="utf-8") as manifest:
            for image_id, (descriptor, error) in zip(image_ids, results):
                if descriptor is not None:
                    writer.write(descriptor.image_id, descriptor.vector)
                    manifest.write(f"{image_id}\tok\n")
                else:
                    failures.append((image_id, error))
                    manifest.write(f"{image_id}\tfailed: {error}\n")
    if image_ids and not any(desc is not None for desc, _ in results):
        raise BatchError(f"all {len(image_ids)} images failed; first: {failures[0][1]}")
    if failures:
        logger.warning("%d of %d images failed; see %s", len(failures), len(image_ids), manifest_path)
    return BatchReport(written=len(image_ids) - len(failures), failures=tuple(failures))
