"""Acceptance suite: one test per shipping criterion.

Each test prints a single [PASS]/[FAIL] line (run pytest with -s to see
them inline).  Criterion 1 is the advisory scale statement: absolute
full-scale retrieval numbers need the million-image gallery and real CNN
weights, so it asserts the ablation harness produces the full method grid
and the remaining criteria carry the property load.
"""

import json
import math
import subprocess
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from oracles import enumerate_regions, pool_loops, quantize_scan, topk_full_sort
from rmfeat.attention import AttentionDictionary, compute_idf, document_frequencies, fit_dictionary, quantize_batch
from rmfeat.cli import main
from rmfeat.pooling import PoolingMode, pool
from rmfeat.regions import region_grid
from rmfeat.retrieval import (
    average_precision_at_k,
    build_index,
    evaluate,
    index_from_arrays,
    nar,
    read_metrics,
    search_batch,
)
from rmfeat.tensorio import read_descriptors
from rmfeat.whitening import fit, transform, write_whitening
from synth import make_gallery, random_unit_rows


@contextmanager
def criterion(number: int, title: str):
    try:
        yield
    except BaseException:
        print(f"[FAIL] criterion {number}: {title}")
        raise
    print(f"[PASS] criterion {number}: {title}")


RES = "64,96,128"
CHANNELS = "24"


@pytest.fixture(scope="module")
def pipeline_ws(tmp_path_factory):
    """200 synthetic images (20 planted groups of 3 + 140 distractors),
    extracted with the stub backbone and fit for both pooling modes."""
    root = tmp_path_factory.mktemp("acceptance")
    images = root / "images"
    gt = make_gallery(images, n_groups=20, group_size=3, n_distractors=140, size=96, seed=11)
    from rmfeat.retrieval import write_ground_truth

    write_ground_truth(root / "gt.csv", gt)
    assert (
        main(
            [
                "extract",
                "--images", str(images),
                "--out", str(root / "tensors"),
                "--mode", "stub",
                "--channels", CHANNELS,
                "--resolutions", RES,
            ]
        )
        == 0
    )
    assert (
        main(
            [
                "fit",
                "--tensors", str(root / "tensors"),
                "--out", str(root / "fit"),
                "--pooling", "mac,smac",
                "--sample", "30000",
                "--k", "64",
                "--dim", "16",
                "--scales", "3",
                "--resolutions", RES,
                "--seed", "5",
            ]
        )
        == 0
    )
    return root


def _embed(root: Path, out: Path, pooling: str, multires: str, attention: str, jobs: str) -> Path:
    assert (
        main(
            [
                "embed",
                "--tensors", str(root / "tensors"),
                "--out", str(out),
                "--fit-dir", str(root / "fit"),
                "--pooling", pooling,
                "--multires", multires,
                "--attention", attention,
                "--scales", "3",
                "--resolutions", RES,
                "--jobs", jobs,
            ]
        )
        == 0
    )
    return out


def test_criterion_1_ablation_grid_capability(pipeline_ws, tmp_path):
    with criterion(1, "full ablation grid runs end-to-end (full-scale numbers advisory only)"):
        out = tmp_path / "ablation"
        rc = main(
            [
                "ablate",
                "--tensors", str(pipeline_ws / "tensors"),
                "--gt", str(pipeline_ws / "gt.csv"),
                "--out", str(out),
                "--k", "64",
                "--dim", "16",
                "--scales", "3",
                "--resolutions", RES,
                "--seed", "5",
                "--topk", "10",
            ]
        )
        assert rc == 0
        lines = (out / "ablation.tsv").read_text().splitlines()
        methods = [line.split("\t")[0] for line in lines[1:]]
        assert methods == [
            "R-MAC",
            "R-SMAC",
            "MR-R-MAC",
            "R-MAC w/URA",
            "MR-R-MAC w/URA",
            "MR-R-SMAC w/URA",
        ]
        print(
            "  advisory: absolute Table-level scores (NAR ~0.03 at 256-d) require the "
            "million-image gallery and pretrained CNN weights; not checked at desk scale"
        )


def test_criterion_2_region_grid_oracle():
    with criterion(2, "region grid matches exact-arithmetic oracle on 1,000 random shapes in < 5 s"):
        rng = np.random.default_rng(202)
        start = time.perf_counter()
        for _ in range(1000):
            w = int(rng.integers(1, 65))
            h = int(rng.integers(1, 65))
            s = int(rng.integers(1, 7))
            got = [(r.x, r.y, r.side, r.scale) for r in region_grid(w, h, s)]
            assert got == enumerate_regions(w, h, s), (w, h, s)
            if w == h and w >= 2 * s:
                assert len(got) == sum(i * i for i in range(1, s + 1)), (w, s)
        assert len(region_grid(20, 20, 4)) == 30
        elapsed = time.perf_counter() - start
        assert elapsed < 5.0, f"{elapsed:.2f}s"


def test_criterion_3_pooling_oracle_and_scale_invariance():
    with criterion(3, "1,000 random tensors match triple-loop oracle (1e-6); smac scale-invariant"):
        rng = np.random.default_rng(303)
        for i in range(1000):
            c = int(rng.integers(1, 7))
            w = int(rng.integers(1, 6))
            tensor = rng.standard_normal((c, w, w)).astype(np.float32)
            for mode in PoolingMode:
                got = pool(tensor, mode)
                want = pool_loops(tensor, mode.value)
                np.testing.assert_allclose(got, want, atol=1e-6)
            if i % 10 == 0:
                alpha = float(rng.uniform(1e-3, 100.0))
                positive = rng.uniform(0.05, 1.0, size=(c, w, w)).astype(np.float32)
                base = pool(positive, PoolingMode.SMAC)
                scaled = pool((alpha * positive).astype(np.float32), PoolingMode.SMAC)
                np.testing.assert_allclose(base, scaled, atol=1e-6)


def test_criterion_4_whitening_variance_and_bitstable_files(tmp_path):
    with criterion(4, "whitened training variance 1 +/- 0.05; model files bit-identical across reruns"):
        def build(seed):
            rng = np.random.default_rng(seed)
            scales = np.linspace(3.0, 0.5, 16)
            return (rng.standard_normal((10_000, 16)) * scales).astype(np.float32)

        samples = build(404)
        model = fit(samples, 8)
        out = transform(model, samples)
        variances = out.var(axis=0)
        lam = model.eigenvalues.astype(np.float64)
        assert (lam[:8] > 100 * model.eps).all()  # all kept coords well above eps
        assert (np.abs(variances - 1.0) < 0.05).all(), variances

        again = fit(build(404), 8)
        p1, p2 = tmp_path / "a.rmpw", tmp_path / "b.rmpw"
        write_whitening(p1, model)
        write_whitening(p2, again)
        assert p1.read_bytes() == p2.read_bytes()


def test_criterion_5_attention_oracles():
    with criterion(5, "idf hand corpus exact; quantize matches linear scan on 10,000 vectors; inertia monotone"):
        # hand corpus: documents {a,b}, {a}, {a,c}
        centroids = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]], dtype=np.float32)
        docs = [
            np.array([[0.1, 0.0], [9.8, 0.1]], dtype=np.float32),
            np.array([[0.0, 0.2]], dtype=np.float32),
            np.array([[0.1, 0.1], [0.0, 9.9]], dtype=np.float32),
        ]
        df, n_docs = document_frequencies(centroids, docs)
        idf = compute_idf(df, n_docs)
        assert df.tolist() == [3, 1, 1] and n_docs == 3
        assert idf[0] == 0.0
        assert idf[1] == pytest.approx(math.log(2.0), rel=1e-6)
        assert idf[2] == pytest.approx(math.log(2.0), rel=1e-6)

        rng = np.random.default_rng(505)
        words = rng.standard_normal((256, 12)).astype(np.float32)
        d = AttentionDictionary(centroids=words, df=np.zeros(256, dtype=np.uint64), n_docs=4)
        vectors = rng.standard_normal((10_000, 12)).astype(np.float32)
        got = quantize_batch(d, vectors)
        for v, g in zip(vectors, got):
            assert quantize_scan(words, v) == g

        for seed in range(10):
            data = np.random.default_rng(seed).standard_normal((500, 8)).astype(np.float32)
            km = fit_dictionary(data, k=16, seed=seed)
            for prev, cur in zip(km.inertia_history, km.inertia_history[1:]):
                assert cur <= prev * (1 + 1e-9) + 1e-12


def test_criterion_6_metric_oracles():
    with criterion(6, "nar/map hand values at 1e-9; search equals full-sort oracle on 10,000 vectors with ties"):
        ranking = [f"x{i}" for i in range(8)] + ["r1", "r2"]
        assert abs(nar(ranking, {"r1", "r2"}, 10) - 0.8) < 1e-9
        ap = average_precision_at_k(["r1", "x", "r2"], {"r1", "r2"}, 100)
        assert abs(ap - (1.0 + 2.0 / 3.0) / 2.0) < 1e-9

        vecs = random_unit_rows(10_000, 16, seed=606)
        for src, dst in [(5, 9000), (5, 123), (77, 4000), (77, 8000), (0, 9999)]:
            vecs[dst] = vecs[src]
        ids = [f"g{i:05d}" for i in range(10_000)]
        index = index_from_arrays(ids, vecs)
        queries = np.stack([vecs[5], vecs[77], vecs[42]]).astype(np.float64)
        results = search_batch(index, queries, 100)
        for q, res in zip(queries, results):
            want = topk_full_sort(ids, vecs, q.astype(np.float32), 100)
            assert res.ids == [ident for _, ident in want]
            # the blocked scan computes d^2 in expanded matmul form; for
            # exact-duplicate vectors that leaves ~1e-16 residual, ~1e-8
            # after the square root, so distances match to fp noise only
            np.testing.assert_allclose(res.distances, [dist for dist, _ in want], atol=1e-7)


def test_criterion_7_end_to_end_determinism(pipeline_ws, tmp_path):
    with criterion(7, "200-image stub pipeline byte-identical across reruns at jobs 1 and 8"):
        files = []
        for run in range(2):
            for jobs in ("1", "8"):
                out = _embed(pipeline_ws, tmp_path / f"d_{run}_{jobs}.rmds", "smac", "1", "1", jobs)
                files.append(out)
        blobs = [f.read_bytes() for f in files]
        assert all(b == blobs[0] for b in blobs[1:])

        metric_files = []
        for run in range(2):
            metrics_path = tmp_path / f"metrics_{run}.tsv"
            rc = main(
                [
                    "evaluate",
                    "--gallery", str(files[0]),
                    "--gt", str(pipeline_ws / "gt.csv"),
                    "--out", str(metrics_path),
                    "--topk", "10",
                ]
            )
            assert rc == 0
            metric_files.append(metrics_path.read_bytes())
        assert metric_files[0] == metric_files[1]


def test_criterion_8_sanity_ordering(pipeline_ws, tmp_path):
    with criterion(8, "full method >= 0.9x plain R-MAC on MAP@10; both >= 3x random baseline; < 2 min"):
        start = time.perf_counter()
        gt = {}
        from rmfeat.retrieval import read_ground_truth

        gt = read_ground_truth(pipeline_ws / "gt.csv")

        def map10(desc_path: Path) -> float:
            index = build_index(desc_path)
            qids = sorted(q for q in gt if q in index)
            qvecs = np.stack([index.vector(q) for q in qids]).astype(np.float64)
            metrics, _ = evaluate(index, qids, qvecs, gt, k=10)
            return metrics["map@10"]

        plain = map10(_embed(pipeline_ws, tmp_path / "rmac.rmds", "mac", "0", "0", "1"))
        full = map10(_embed(pipeline_ws, tmp_path / "full.rmds", "smac", "1", "1", "1"))

        ids, _ = read_descriptors(tmp_path / "rmac.rmds")
        rng = np.random.default_rng(5)
        rand_vecs = rng.standard_normal((len(ids), 16)).astype(np.float32)
        rand_vecs /= np.linalg.norm(rand_vecs, axis=1, keepdims=True)
        rand_index = index_from_arrays(ids, rand_vecs)
        qids = sorted(q for q in gt if q in rand_index)
        qvecs = np.stack([rand_index.vector(q) for q in qids]).astype(np.float64)
        rand_metrics, _ = evaluate(rand_index, qids, qvecs, gt, k=10)
        baseline = rand_metrics["map@10"]

        elapsed = time.perf_counter() - start
        print(f"  map@10: full={full:.3f} plain={plain:.3f} random={baseline:.3f} ({elapsed:.0f}s)")
        assert full >= 0.9 * plain, (full, plain)
        assert full >= 3.0 * baseline, (full, baseline)
        assert plain >= 3.0 * baseline, (plain, baseline)
        assert elapsed < 120.0


def test_criterion_9_scale_smoke(tmp_path):
    with criterion(9, "1M x 256 build_index + 100 searches in < 60 s and < 2 GB resident"):
        runner = Path(__file__).parent / "scale_runner.py"
        proc = subprocess.run(
            [sys.executable, str(runner), "1000000", "256", "100", "100", str(tmp_path / "big.rmds")],
            capture_output=True,
            text=True,
            timeout=560,
        )
        assert proc.returncode == 0, proc.stderr[-2000:]
        stats = json.loads(proc.stdout.strip().splitlines()[-1])
        print(
            f"  n={stats['n']} build={stats['build_s']:.1f}s search={stats['search_s']:.1f}s "
            f"rss={stats['peak_rss_gb']:.2f}GB"
        )
        assert stats["n"] == 1_000_000
        assert stats["total_s"] < 60.0, stats
        assert stats["peak_rss_gb"] < 2.0, stats
