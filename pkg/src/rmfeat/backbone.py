"""Produce per-resolution convolutional feature maps for an image id.

Three interchangeable sources:

* ``tensor-dir`` - the contract-bearing mode: reads pre-extracted FMT1
  tensors from ``<dir>/<image-id>/<size>.rmtf``.
* ``stub`` - a deterministic stand-in CNN (seeded random 1x1 projection,
  ReLU, stride-16 average pooling) so the whole pipeline runs and tests
  without model weights.
* ``onnx`` - runs an ONNX model with dynamic spatial dims; requires the
  optional ``onnxruntime`` package.

Default preprocessing matches the common pretrained-network convention:
bilinear resize to size x size ignoring aspect ratio, then per channel
(pixel / 255 - mean) / std with mean (0.485, 0.456, 0.406) and std
(0.229, 0.224, 0.225), RGB order.  Grayscale inputs are replicated to
three channels.  All of it is overridable through BackboneConfig.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ConfigError, InputError
from .tensorio import FeatureMap, read_feature_map

DEFAULT_RESOLUTIONS = (160, 224, 320)
DEFAULT_MEAN = (0.485, 0.456, 0.406)
DEFAULT_STD = (0.229, 0.224, 0.225)
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".gif", ".webp")


def validate_resolutions(sizes: Sequence[int]) -> tuple[int, ...]:
    sizes = tuple(int(s) for s in sizes)
    if not sizes:
        raise ConfigError("resolution list is empty")
    if any(s < 32 for s in sizes):
        raise ConfigError(f"resolutions must be >= 32 pixels, got {sizes}")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ConfigError(f"resolutions must be strictly increasing, got {sizes}")
    return sizes


@dataclass(frozen=True)
class BackboneConfig:
    mode: str = "tensor-dir"  # tensor-dir | stub | onnx
    tensor_dir: Path | None = None
    images_dir: Path | None = None
    model_path: Path | None = None
    channels: int = 1024
    stride: int = 16
    mean: tuple[float, float, float] = DEFAULT_MEAN
    std: tuple[float, float, float] = DEFAULT_STD
    resolutions: tuple[int, ...] = DEFAULT_RESOLUTIONS
    stub_seed: int = 0

    def __post_init__(self):
        if self.mode not in ("tensor-dir", "stub", "onnx"):
            raise ConfigError(f"unknown backbone mode {self.mode!r}")
        object.__setattr__(self, "resolutions", validate_resolutions(self.resolutions))
        if self.stride < 1 or self.channels < 1:
            raise ConfigError("stride and channels must be positive")


def tensor_path(tensor_dir: Path, image_id: str, size: int) -> Path:
    return Path(tensor_dir) / image_id / f"{size}.rmtf"


def load_image(path: str | Path, image_id: str = "") -> np.ndarray:
    """Decode an image file to an (H, W, 3) uint8 RGB array."""
    image_id = image_id or Path(path).stem
    try:
        with Image.open(path) as img:
            rgb = img.convert("RGB")
            return np.asarray(rgb, dtype=np.uint8)
    except (UnidentifiedImageError, OSError) as exc:
        raise InputError(image_id, f"cannot decode image {path}: {exc}") from exc


def preprocess(
    image: np.ndarray,
    size: int,
    mean: Sequence[float] = DEFAULT_MEAN,
    std: Sequence[float] = DEFAULT_STD,
) -> np.ndarray:
    """Resize and normalize to a float32 (3, size, size) network input.

    ``image`` is (H, W, 3) or (H, W) uint8; grayscale replicates to three
    channels before normalization.
    """
    image = np.asarray(image)
    if image.ndim == 2:
        image = np.stack([image] * 3, axis=-1)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) or (H, W) image, got {image.shape}")
    pil = Image.fromarray(image.astype(np.uint8), mode="RGB")
    resized = np.asarray(pil.resize((size, size), Image.BILINEAR), dtype=np.float32)
    scaled = resized / np.float32(255.0)
    mean_arr = np.asarray(mean, dtype=np.float32).reshape(1, 1, 3)
    std_arr = np.asarray(std, dtype=np.float32).reshape(1, 1, 3)
    normalized = (scaled - mean_arr) / std_arr
    return np.ascontiguousarray(normalized.transpose(2, 0, 1))


class TensorDirBackbone:
    def __init__(self, config: BackboneConfig):
        if config.tensor_dir is None:
            raise ConfigError("tensor-dir mode needs a tensor directory")
        self.config = config
        self.tensor_dir = Path(config.tensor_dir)
        if not self.tensor_dir.is_dir():
            raise ConfigError(f"tensor directory {self.tensor_dir} does not exist")

    def extract(self, image_id: str, sizes: Sequence[int] | None = None) -> list[FeatureMap]:
        sizes = validate_resolutions(sizes or self.config.resolutions)
        maps = []
        for size in sizes:
            path = tensor_path(self.tensor_dir, image_id, size)
            if not path.is_file():
                raise InputError(image_id, f"missing tensor file for resolution {size}: {path}")
            fm = read_feature_map(path)
            if fm.channels != self.config.channels:
                raise InputError(
                    image_id,
                    f"tensor {path} has {fm.channels} channels, expected {self.config.channels}",
                )
            maps.append(fm)
        return maps

    def list_ids(self) -> list[str]:
        return sorted(p.name for p in self.tensor_dir.iterdir() if p.is_dir())


class StubBackbone:
    """Deterministic fake CNN: seeded 1x1 projection, ReLU, strided mean."""

    def __init__(self, config: BackboneConfig):
        if config.images_dir is None:
            raise ConfigError("stub mode needs an images directory")
        self.config = config
        self.images_dir = Path(config.images_dir)
        rng = np.random.default_rng(config.stub_seed)
        self.weights = rng.standard_normal((config.channels, 3)).astype(np.float32)

    def _image_path(self, image_id: str) -> Path:
        for suffix in IMAGE_SUFFIXES:
            candidate = self.images_dir / f"{image_id}{suffix}"
            if candidate.is_file():
                return candidate
        raise InputError(image_id, f"no image file under {self.images_dir}")

    def features_from_array(self, image: np.ndarray, size: int) -> FeatureMap:
        tensor = preprocess(image, size, self.config.mean, self.config.std)
        projected = np.maximum(
            np.tensordot(self.weights, tensor, axes=([1], [0])), 0.0
        )  # (C, size, size)
        stride = self.config.stride
        cells = size // stride
        if cells < 1:
            raise ConfigError(f"resolution {size} smaller than stride {stride}")
        trimmed = projected[:, : cells * stride, : cells * stride].astype(np.float64)
        pooled = trimmed.reshape(self.config.channels, cells, stride, cells, stride).mean(axis=(2, 4))
        return FeatureMap(pooled.astype(np.float32))

    def extract(self, image_id: str, sizes: Sequence[int] | None = None) -> list[FeatureMap]:
        sizes = validate_resolutions(sizes or self.config.resolutions)
        image = load_image(self._image_path(image_id), image_id)
        return [self.features_from_array(image, size) for size in sizes]

    def list_ids(self) -> list[str]:
        return sorted(
            p.stem for p in self.images_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES
        )


class OnnxBackbone:
    """Runs an ONNX model on preprocessed inputs; needs onnxruntime."""

    def __init__(self, config: BackboneConfig):
        if config.model_path is None or config.images_dir is None:
            raise ConfigError("onnx mode needs a model path and an images directory")
        try:
            import onnxruntime
        except ImportError as exc:
            raise ConfigError(
                "onnx mode requires the onnxruntime package (pip install onnxruntime)"
            ) from exc
        self.config = config
        self.images_dir = Path(config.images_dir)
        try:
            self.session = onnxruntime.InferenceSession(
                str(config.model_path), providers=["CPUExecutionProvider"]
            )
        except Exception as exc:
            raise ConfigError(f"cannot load ONNX model {config.model_path}: {exc}") from exc
        self.input_name = self.session.get_inputs()[0].name

    def _image_path(self, image_id: str) -> Path:
        for suffix in IMAGE_SUFFIXES:
            candidate = self.images_dir / f"{image_id}{suffix}"
            if candidate.is_file():
                return candidate
        raise InputError(image_id, f"no image file under {self.images_dir}")

    def extract(self, image_id: str, sizes: Sequence[int] | None = None) -> list[FeatureMap]:
        sizes = validate_resolutions(sizes or self.config.resolutions)
        image = load_image(self._image_path(image_id), image_id)
        maps = []
        for size in sizes:
            tensor = preprocess(image, size, self.config.mean, self.config.std)[None, ...]
            (output,) = self.session.run(None, {self.input_name: tensor})
            fm = FeatureMap(np.asarray(output[0], dtype=np.float32))
            if fm.channels != self.config.channels:
                raise InputError(
                    image_id,
                    f"model produced {fm.channels} channels, expected {self.config.channels}",
                )
            maps.append(fm)
        return maps

    def list_ids(self) -> list[str]:
        return sorted(
            p.stem for p in self.images_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES
        )


def make_backbone(config: BackboneConfig):
    if config.mode == "tensor-dir":
        return TensorDirBackbone(config)
    if config.mode == "stub":
        return StubBackbone(config)
    return OnnxBackbone(config)
