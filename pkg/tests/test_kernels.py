"""Both kernel lanes must agree on every input the package feeds them."""

import subprocess
import sys

import numpy as np
import pytest

from rmfeat import kernels


requires_numba = pytest.mark.skipif(not kernels.HAS_NUMBA, reason="numba unavailable")


@requires_numba
def test_pool_regions_lanes_agree():
    rng = np.random.default_rng(0)
    for _ in range(20):
        c = int(rng.integers(1, 12))
        h = int(rng.integers(1, 24))
        w = int(rng.integers(1, 24))
        data = rng.standard_normal((c, h, w)).astype(np.float32)
        fits = min(h, w)
        regions = []
        for _ in range(int(rng.integers(1, 8))):
            side = int(rng.integers(1, fits + 1))
            regions.append(
                [int(rng.integers(0, w - side + 1)), int(rng.integers(0, h - side + 1)), side]
            )
        regions = np.array(regions, dtype=np.int64)
        mac_np, sum_np = kernels.pool_regions_numpy(data, regions)
        mac_nb, sum_nb = kernels.pool_regions_numba(data, regions)
        assert mac_np.tobytes() == mac_nb.tobytes()  # max is order-free
        np.testing.assert_allclose(sum_np, sum_nb, rtol=1e-6, atol=1e-6)


@requires_numba
def test_nearest_centroids_lanes_agree():
    rng = np.random.default_rng(1)
    points = rng.standard_normal((300, 16)).astype(np.float32)
    centroids = rng.standard_normal((20, 16)).astype(np.float64)
    idx_np, d_np = kernels.nearest_centroids_numpy(points, centroids)
    idx_nb, d_nb = kernels.nearest_centroids_numba(points, centroids)
    assert np.array_equal(idx_np, idx_nb)
    np.testing.assert_allclose(d_np, d_nb, rtol=1e-9, atol=1e-9)


@requires_numba
def test_nearest_centroids_tie_break_agrees():
    points = np.array([[0.0, 0.0], [2.0, 2.0]], dtype=np.float32)
    centroids = np.array([[1.0, 1.0], [-1.0, -1.0], [1.0, 1.0]], dtype=np.float64)
    for impl in (kernels.nearest_centroids_numpy, kernels.nearest_centroids_numba):
        idx, _ = impl(points, centroids)
        assert idx[0] == 0  # equidistant to 0, 1 and 2; lowest wins


@requires_numba
def test_sqdist_lanes_agree():
    rng = np.random.default_rng(2)
    queries = rng.standard_normal((7, 12)).astype(np.float64)
    block = rng.standard_normal((91, 12)).astype(np.float32)
    np.testing.assert_allclose(
        kernels.sqdist_numpy(queries, block),
        kernels.sqdist_numba(queries, block),
        rtol=1e-9,
        atol=1e-9,
    )


@requires_numba
def test_cluster_sums_lanes_agree():
    rng = np.random.default_rng(3)
    points = rng.standard_normal((500, 9)).astype(np.float32)
    assign = rng.integers(0, 13, size=500).astype(np.int64)
    s_np, c_np = kernels.cluster_sums_numpy(points, assign, 13)
    s_nb, c_nb = kernels.cluster_sums_numba(points, assign, 13)
    assert np.array_equal(c_np, c_nb)
    np.testing.assert_allclose(s_np, s_nb, rtol=1e-9, atol=1e-9)


def test_default_lane_profile():
    import os

    lanes = kernels.active_lanes()
    assert set(lanes) == {"pool_regions", "cluster_sums", "nearest_centroids", "sqdist"}
    forced = os.environ.get("RMF_KERNELS", "auto")
    if forced in ("numba", "numpy"):
        assert set(lanes.values()) == {forced}
    elif kernels.HAS_NUMBA:
        assert lanes["pool_regions"] == "numba"
        assert lanes["sqdist"] == "numpy"
    else:
        assert set(lanes.values()) == {"numpy"}


@pytest.mark.parametrize("choice", ["numpy", "numba"])
def test_env_flag_forces_lane(choice):
    if choice == "numba" and not kernels.HAS_NUMBA:
        pytest.skip("numba unavailable")
    code = (
        "from rmfeat import kernels; "
        f"assert set(kernels.active_lanes().values()) == {{{choice!r}}}, kernels.active_lanes()"
    )
    subprocess.run(
        [sys.executable, "-c", code],
        check=True,
        env={"RMF_KERNELS": choice, "PATH": "/usr/bin:/bin", "HOME": "/root"},
    )


def test_bad_env_flag_rejected():
    code = "import rmfeat.kernels"
    proc = subprocess.run(
        [sys.executable, "-c", code],
        capture_output=True,
        env={"RMF_KERNELS": "cuda", "PATH": "/usr/bin:/bin", "HOME": "/root"},
    )
    assert proc.returncode != 0
    assert b"RMF_KERNELS" in proc.stderr
