import numpy as np
import pytest
from PIL import Image

from rmfeat.backbone import (
    BackboneConfig,
    StubBackbone,
    TensorDirBackbone,
    load_image,
    make_backbone,
    preprocess,
    tensor_path,
    validate_resolutions,
)
from rmfeat.errors import ConfigError, InputError
from rmfeat.tensorio import write_tensor
from synth import make_tensor_dir


def test_resolution_validation():
    assert validate_resolutions([160, 224, 320]) == (160, 224, 320)
    with pytest.raises(ConfigError):
        validate_resolutions([224, 160])
    with pytest.raises(ConfigError):
        validate_resolutions([16, 64])
    with pytest.raises(ConfigError):
        validate_resolutions([])


def test_preprocess_midgray_centering():
    img = np.full((40, 40, 3), 127.5)
    out = preprocess(img.astype(np.uint8), 64, mean=(0.49803922,) * 3, std=(1.0,) * 3)
    # 127 / 255 == 0.498039..., chosen so centering lands on zero
    img = np.full((40, 40, 3), 127, dtype=np.uint8)
    out = preprocess(img, 64, mean=(127 / 255,) * 3, std=(1.0,) * 3)
    assert out.shape == (3, 64, 64)
    assert np.abs(out).max() < 1e-6


def test_preprocess_single_pixel_upscales_constant():
    img = np.zeros((1, 1, 3), dtype=np.uint8)
    img[0, 0] = (255, 0, 0)
    out = preprocess(img, 160, mean=(0.0, 0.0, 0.0), std=(1.0, 1.0, 1.0))
    assert np.allclose(out[0], 1.0)
    assert np.allclose(out[1], 0.0)
    assert np.allclose(out[2], 0.0)


def test_preprocess_grayscale_replicates_channels():
    img = np.arange(64, dtype=np.uint8).reshape(8, 8)
    # uniform mean/std isolates the replication rule from the per-channel
    # normalization that follows it
    out = preprocess(img, 32, mean=(0.4,) * 3, std=(0.2,) * 3)
    assert np.array_equal(out[0], out[1])
    assert np.array_equal(out[1], out[2])


def test_load_image_error_carries_id(tmp_path):
    bad = tmp_path / "broken.png"
    bad.write_bytes(b"not an image")
    with pytest.raises(InputError, match="broken"):
        load_image(bad)


# --- tensor-dir mode --------------------------------------------------------


def test_tensor_dir_returns_files_bit_exact(tmp_path):
    make_tensor_dir(tmp_path, ["q1"], channels=6, sizes=(160, 224, 320), seed=3)
    config = BackboneConfig(mode="tensor-dir", tensor_dir=tmp_path, channels=6)
    backbone = make_backbone(config)
    maps = backbone.extract("q1")
    assert [m.data.shape for m in maps] == [(6, 10, 10), (6, 14, 14), (6, 20, 20)]
    from rmfeat.tensorio import read_feature_map

    for size, fm in zip((160, 224, 320), maps):
        disk = read_feature_map(tensor_path(tmp_path, "q1", size))
        assert fm.data.tobytes() == disk.data.tobytes()


def test_tensor_dir_missing_resolution_names_id_and_size(tmp_path):
    make_tensor_dir(tmp_path, ["q2"], channels=4, sizes=(160, 320), seed=1)
    config = BackboneConfig(mode="tensor-dir", tensor_dir=tmp_path, channels=4)
    backbone = make_backbone(config)
    with pytest.raises(InputError, match="q2.*224"):
        backbone.extract("q2")


def test_tensor_dir_channel_mismatch(tmp_path):
    make_tensor_dir(tmp_path, ["q3"], channels=4, sizes=(160, 224, 320))
    config = BackboneConfig(mode="tensor-dir", tensor_dir=tmp_path, channels=8)
    with pytest.raises(InputError, match="channels"):
        make_backbone(config).extract("q3")


def test_tensor_dir_spatial_dims_follow_stride(tmp_path):
    # spatial cells = floor(size / stride) for a stride-16 feature tap
    for size in (160, 224, 320):
        cells = size // 16
        (tmp_path / "img").mkdir(exist_ok=True)
        write_tensor(
            tensor_path(tmp_path, "img", size),
            np.zeros((2, cells, cells), dtype=np.float32),
        )
    maps = make_backbone(
        BackboneConfig(mode="tensor-dir", tensor_dir=tmp_path, channels=2)
    ).extract("img")
    assert [(m.height, m.width) for m in maps] == [(10, 10), (14, 14), (20, 20)]


# --- stub mode ---------------------------------------------------------------


def test_stub_constant_image_gives_constant_maps(tmp_path):
    img_dir = tmp_path / "imgs"
    img_dir.mkdir()
    Image.new("RGB", (50, 50), (90, 120, 200)).save(img_dir / "flat.png")
    config = BackboneConfig(mode="stub", images_dir=img_dir, channels=5, stub_seed=4)
    backbone = make_backbone(config)
    maps = backbone.extract("flat")
    assert [m.data.shape for m in maps] == [(5, 10, 10), (5, 14, 14), (5, 20, 20)]
    for fm in maps:
        for c in range(5):
            channel = fm.data[c]
            assert channel.max() - channel.min() < 1e-5


def test_stub_deterministic_across_instances(tmp_path):
    img_dir = tmp_path / "imgs"
    img_dir.mkdir()
    rng = np.random.default_rng(0)
    Image.fromarray(rng.integers(0, 256, size=(64, 64, 3), dtype=np.uint8)).save(img_dir / "a.png")
    config = BackboneConfig(mode="stub", images_dir=img_dir, channels=7, stub_seed=9)
    m1 = StubBackbone(config).extract("a")
    m2 = StubBackbone(config).extract("a")
    for a, b in zip(m1, m2):
        assert a.data.tobytes() == b.data.tobytes()


def test_stub_shares_channel_count_across_resolutions(tmp_path):
    img_dir = tmp_path / "imgs"
    img_dir.mkdir()
    Image.new("RGB", (30, 30), (10, 20, 30)).save(img_dir / "x.png")
    maps = StubBackbone(
        BackboneConfig(mode="stub", images_dir=img_dir, channels=3)
    ).extract("x")
    assert {m.channels for m in maps} == {3}


def test_stub_missing_image(tmp_path):
    img_dir = tmp_path / "imgs"
    img_dir.mkdir()
    backbone = StubBackbone(BackboneConfig(mode="stub", images_dir=img_dir, channels=2))
    with pytest.raises(InputError, match="ghost"):
        backbone.extract("ghost")


def test_onnx_mode_requires_runtime_or_model(tmp_path):
    with pytest.raises(ConfigError):
        make_backbone(BackboneConfig(mode="onnx", images_dir=tmp_path))


def test_unknown_mode_rejected():
    with pytest.raises(ConfigError):
        BackboneConfig(mode="magic")
