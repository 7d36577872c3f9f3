"""Command-line pipeline: extract, fit, embed, search, evaluate, ablate.

Each subcommand reads inputs from files, writes inspectable artifacts and
a resolved-config snapshot, and exits 0 on success, 1 when some items
failed (see the manifest), 2 on fatal errors.  Stages can therefore be
rerun, resumed and diffed independently.
"""

from __future__ import annotations

import argparse
import base64
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import aggregate, attention, retrieval, whitening
from .backbone import BackboneConfig, TensorDirBackbone, make_backbone, tensor_path
from .config import RunConfig
from .errors import BatchError, RmfeatError
from .pooling import PoolingMode, pool_region_batch
from .regions import region_matrix
from .tensorio import read_descriptors, read_feature_map, write_feature_map
from .whitening import CovarianceAccumulator

logger = logging.getLogger(__name__)

DEFAULT_GRID = ("", "smac", "mr", "ura", "mr+ura", "mr+smac+ura")


def _read_id_file(path: str | Path) -> list[str]:
    return [line.strip() for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]


def _combo_name(combo: frozenset[str]) -> str:
    name = "R-SMAC" if "smac" in combo else "R-MAC"
    if "mr" in combo:
        name = "MR-" + name
    if "ura" in combo:
        name += " w/URA"
    return name


def _parse_combos(text: str) -> list[frozenset[str]]:
    combos = []
    for chunk in text.split(","):
        toggles = frozenset(t.strip().lower() for t in chunk.split("+") if t.strip())
        unknown = toggles - {"mr", "smac", "ura"}
        if unknown:
            raise RmfeatError(f"unknown ablation toggles {sorted(unknown)}; use mr, smac, ura")
        combos.append(toggles)
    return combos


# ---------------------------------------------------------------------------
# extract


def cmd_extract(args) -> int:
    cfg = RunConfig.resolve(
        {
            "images": args.images,
            "out": args.out,
            "mode": args.mode,
            "model": args.model,
            "resolutions": args.resolutions,
            "channels": args.channels,
            "stride": args.stride,
            "stub_seed": args.stub_seed,
            "jobs": args.jobs,
        },
        config_file=args.config,
    )
    out_dir = Path(cfg.get("out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    backbone_config = BackboneConfig(
        mode=cfg.get("mode"),
        images_dir=Path(cfg.get("images")),
        model_path=Path(cfg.get("model")) if cfg.get("model") else None,
        channels=cfg.get_int("channels"),
        stride=cfg.get_int("stride"),
        resolutions=cfg.get_int_list("resolutions"),
        stub_seed=cfg.get_int("stub_seed"),
    )
    backbone = make_backbone(backbone_config)
    ids = _read_id_file(args.ids) if args.ids else backbone.list_ids()
    sizes = backbone_config.resolutions

    def work(image_id: str) -> str | None:
        paths = {size: tensor_path(out_dir, image_id, size) for size in sizes}
        todo = [s for s, p in paths.items() if args.force or not p.is_file()]
        if not todo:
            return None
        try:
            maps = backbone.extract(image_id, sizes)
        except RmfeatError as exc:
            return str(exc)
        (out_dir / image_id).mkdir(exist_ok=True)
        for size, fm in zip(sizes, maps):
            if size in todo:
                write_feature_map(paths[size], fm)
        return None

    failures = 0
    with open(out_dir / "extract.manifest", "w", encoding="utf-8") as manifest:
        for image_id in ids:
            error = work(image_id)
            if error is None:
                manifest.write(f"{image_id}\tok\n")
            else:
                failures += 1
                manifest.write(f"{image_id}\tfailed: {error}\n")
    cfg.write_snapshot(out_dir, "extract")
    if ids and failures == len(ids):
        print(f"extract: all {failures} images failed", file=sys.stderr)
        return 2
    if failures:
        print(f"extract: {failures} of {len(ids)} images failed", file=sys.stderr)
        return 1
    print(f"extract: wrote tensors for {len(ids)} images to {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# fit


def _pooled_image(backbone: TensorDirBackbone, image_id: str, sizes, scales: int, mode: PoolingMode) -> np.ndarray:
    """All regional pooled vectors of one image, resolution-major."""
    blocks = []
    for fm in backbone.extract(image_id, sizes):
        regions = region_matrix(fm.width, fm.height, scales)
        blocks.append(pool_region_batch(fm.data, regions, mode))
    return np.concatenate(blocks, axis=0)


def fit_artifacts(
    tensors: Path,
    out_dir: Path,
    mode: PoolingMode,
    cfg: RunConfig,
    ids: list[str] | None = None,
) -> tuple[Path, Path]:
    """Fit the whitening model and attention dictionary for one pooling mode."""
    sizes = cfg.get_int_list("resolutions")
    scales = cfg.get_int("scales")
    dim = cfg.get_int("dim")
    k = cfg.get_int("k")
    seed = cfg.get_int("seed")
    sample = cfg.get_int("sample")
    kmeans_cap = cfg.get_int("kmeans_sample")
    backbone = TensorDirBackbone(BackboneConfig(mode="tensor-dir", tensor_dir=tensors, channels=_probe_channels(tensors), resolutions=sizes))
    if ids is None:
        ids = backbone.list_ids()
    if not ids:
        raise RmfeatError(f"no image tensors under {tensors}")
    rng = np.random.default_rng(seed)
    if sample < len(ids):
        picked = rng.choice(len(ids), size=sample, replace=False)
        sample_ids = [ids[i] for i in sorted(picked)]
    else:
        if sample > len(ids):
            logger.warning("sample %d larger than gallery %d, clamping", sample, len(ids))
        sample_ids = list(ids)

    acc: CovarianceAccumulator | None = None
    pooled_blocks: list[np.ndarray] = []
    for image_id in sample_ids:
        pooled = _pooled_image(backbone, image_id, sizes, scales, mode)
        if acc is None:
            acc = CovarianceAccumulator(pooled.shape[1])
        acc.add(pooled)
        pooled_blocks.append(pooled)
    model = whitening.fit_accumulated(acc, dim, cfg.get_float("eps"))

    sample_matrix = np.concatenate(pooled_blocks, axis=0)
    del pooled_blocks
    if kmeans_cap and sample_matrix.shape[0] > kmeans_cap:
        picked = np.sort(rng.choice(sample_matrix.shape[0], size=kmeans_cap, replace=False))
        sample_matrix = sample_matrix[picked]
    whitened_sample = whitening.apply_batch(model, sample_matrix)
    del sample_matrix
    km = attention.fit_dictionary(whitened_sample, k=k, seed=seed)

    def documents():
        for image_id in ids:
            yield whitening.apply_batch(model, _pooled_image(backbone, image_id, sizes, scales, mode))

    dictionary = attention.build_dictionary(km.centroids, documents())

    out_dir.mkdir(parents=True, exist_ok=True)
    whitening_path = out_dir / f"whitening-{mode.value}.rmpw"
    dictionary_path = out_dir / f"dictionary-{mode.value}.rmdc"
    whitening.write_whitening(whitening_path, model)
    attention.write_dictionary(dictionary_path, dictionary)
    print(
        f"fit[{mode.value}]: whitening {model.dim_in}->{model.dim_out} on {acc.count} regions, "
        f"dictionary k={dictionary.k} over {dictionary.n_docs} images"
    )
    return whitening_path, dictionary_path


def _probe_channels(tensors: Path) -> int:
    """Channel count of the first tensor file found under the directory."""
    for sub in sorted(Path(tensors).iterdir()):
        if sub.is_dir():
            for f in sorted(sub.glob("*.rmtf")):
                return read_feature_map(f).channels
    raise RmfeatError(f"no .rmtf files under {tensors}")


def cmd_fit(args) -> int:
    cfg = RunConfig.resolve(
        {
            "tensors": args.tensors,
            "out": args.out,
            "pooling": args.pooling,
            "sample": args.sample,
            "kmeans_sample": args.kmeans_sample,
            "k": args.k,
            "dim": args.dim,
            "scales": args.scales,
            "resolutions": args.resolutions,
            "seed": args.seed,
            "eps": args.eps,
        },
        config_file=args.config,
    )
    out_dir = Path(cfg.get("out"))
    tensors = Path(cfg.get("tensors"))
    ids = _read_id_file(args.ids) if args.ids else None
    for mode_text in cfg.get("pooling").split(","):
        mode = PoolingMode.parse(mode_text)
        fit_artifacts(tensors, out_dir, mode, cfg, ids)
    cfg.write_snapshot(out_dir, "fit")
    return 0


# ---------------------------------------------------------------------------
# embed


def _load_pipeline(cfg: RunConfig, fit_dir: Path | None, whitening_path, dictionary_path, mode: PoolingMode, use_attention: bool):
    if whitening_path is None:
        if fit_dir is None:
            raise RmfeatError("need --fit-dir or an explicit --whitening path")
        whitening_path = Path(fit_dir) / f"whitening-{mode.value}.rmpw"
    model = whitening.read_whitening(whitening_path)
    dictionary = None
    if use_attention:
        if dictionary_path is None:
            if fit_dir is None:
                raise RmfeatError("need --fit-dir or an explicit --dictionary path")
            dictionary_path = Path(fit_dir) / f"dictionary-{mode.value}.rmdc"
        dictionary = attention.read_dictionary(dictionary_path)
    return model, dictionary


def cmd_embed(args) -> int:
    cfg = RunConfig.resolve(
        {
            "tensors": args.tensors,
            "out": args.out,
            "pooling": args.pooling,
            "scales": args.scales,
            "resolutions": args.resolutions,
            "jobs": args.jobs,
            "multires": args.multires,
            "attention": args.attention,
        },
        config_file=args.config,
    )
    mode = PoolingMode.parse(cfg.get("pooling"))
    use_attention = cfg.get_bool("attention")
    model, dictionary = _load_pipeline(
        cfg, Path(args.fit_dir) if args.fit_dir else None, args.whitening, args.dictionary, mode, use_attention
    )
    channels = model.dim_in // 2 if mode is PoolingMode.SMAC else model.dim_in
    tensors = Path(cfg.get("tensors"))
    backbone = TensorDirBackbone(
        BackboneConfig(mode="tensor-dir", tensor_dir=tensors, channels=channels, resolutions=cfg.get_int_list("resolutions"))
    )
    ids = _read_id_file(args.ids) if args.ids else backbone.list_ids()
    pipeline = aggregate.PipelineConfig(
        whitening=model,
        pooling=mode,
        multi_resolution=cfg.get_bool("multires"),
        attention=use_attention,
        scales=cfg.get_int("scales"),
        resolutions=cfg.get_int_list("resolutions"),
        dictionary=dictionary,
    )
    out_path = Path(cfg.get("out"))
    out_path.parent.mkdir(parents=True, exist_ok=True)
    try:
        report = aggregate.describe_batch(
            ids, backbone, pipeline, out_path, jobs=cfg.get_int("jobs"), manifest_path=args.manifest
        )
    except BatchError as exc:
        print(f"embed: {exc}", file=sys.stderr)
        return 2
    cfg.write_snapshot(out_path.parent, "embed")
    print(f"embed: wrote {report.written} descriptors to {out_path}")
    if report.failures:
        print(f"embed: {len(report.failures)} images failed", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# search / evaluate


def _load_queries(args, index: retrieval.DescriptorIndex, gt=None) -> tuple[list[str], np.ndarray]:
    if args.queries:
        qids, qvecs = read_descriptors(args.queries)
        return qids, qvecs
    if getattr(args, "query_ids", None):
        qids = _read_id_file(args.query_ids)
    elif gt is not None:
        qids = sorted(gt)
    else:
        raise RmfeatError("need --queries or --query-ids")
    missing = [q for q in qids if q not in index]
    if missing:
        raise RmfeatError(f"query ids not in gallery: {missing[:5]}{'...' if len(missing) > 5 else ''}")
    return qids, np.stack([index.vector(q) for q in qids])


def cmd_search(args) -> int:
    cfg = RunConfig.resolve({"topk": args.topk, "exclude_self": args.exclude_self}, config_file=args.config)
    index = retrieval.build_index(args.gallery)
    qids, qvecs = _load_queries(args, index)
    results = retrieval.search_batch(
        index, qvecs.astype(np.float64), cfg.get_int("topk"), qids, exclude_self=cfg.get_bool("exclude_self")
    )
    retrieval.write_rankings(args.out, results)
    print(f"search: wrote top-{cfg.get_int('topk')} rankings for {len(qids)} queries to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = RunConfig.resolve({"topk": args.topk, "exclude_self": args.exclude_self}, config_file=args.config)
    index = retrieval.build_index(args.gallery)
    gt = retrieval.read_ground_truth(args.gt)
    qids, qvecs = _load_queries(args, index, gt)
    metrics, results = retrieval.evaluate(
        index,
        qids,
        qvecs.astype(np.float64),
        gt,
        k=cfg.get_int("topk"),
        exclude_self=cfg.get_bool("exclude_self"),
    )
    retrieval.write_metrics(args.out, metrics)
    if args.rankings:
        retrieval.write_rankings(args.rankings, results, top=cfg.get_int("topk"))
    for name in sorted(metrics):
        print(f"{name}\t{metrics[name]!r}")
    return 0


# ---------------------------------------------------------------------------
# ablate


def cmd_ablate(args) -> int:
    cfg = RunConfig.resolve(
        {
            "tensors": args.tensors,
            "out": args.out,
            "sample": args.sample,
            "kmeans_sample": args.kmeans_sample,
            "k": args.k,
            "dim": args.dim,
            "scales": args.scales,
            "resolutions": args.resolutions,
            "seed": args.seed,
            "topk": args.topk,
            "jobs": args.jobs,
            "eps": args.eps,
            "exclude_self": args.exclude_self,
        },
        config_file=args.config,
    )
    out_dir = Path(cfg.get("out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    tensors = Path(cfg.get("tensors"))
    gt = retrieval.read_ground_truth(args.gt)
    combos = _parse_combos(args.combos) if args.combos is not None else [frozenset(c.split("+")) - {""} for c in DEFAULT_GRID]
    topk = cfg.get_int("topk")

    modes = {PoolingMode.SMAC if "smac" in combo else PoolingMode.MAC for combo in combos}
    artifacts = {}
    for mode in sorted(modes, key=lambda m: m.value):
        artifacts[mode] = fit_artifacts(tensors, out_dir / "fit", mode, cfg)

    channels = _probe_channels(tensors)
    backbone = TensorDirBackbone(
        BackboneConfig(mode="tensor-dir", tensor_dir=tensors, channels=channels, resolutions=cfg.get_int_list("resolutions"))
    )
    ids = backbone.list_ids()
    rows = []
    for combo in combos:
        mode = PoolingMode.SMAC if "smac" in combo else PoolingMode.MAC
        whitening_path, dictionary_path = artifacts[mode]
        model = whitening.read_whitening(whitening_path)
        dictionary = attention.read_dictionary(dictionary_path) if "ura" in combo else None
        pipeline = aggregate.PipelineConfig(
            whitening=model,
            pooling=mode,
            multi_resolution="mr" in combo,
            attention="ura" in combo,
            scales=cfg.get_int("scales"),
            resolutions=cfg.get_int_list("resolutions"),
            dictionary=dictionary,
        )
        name = _combo_name(combo)
        slug = name.lower().replace(" ", "-").replace("/", "")
        desc_path = out_dir / f"{slug}.rmds"
        aggregate.describe_batch(ids, backbone, pipeline, desc_path, jobs=cfg.get_int("jobs"))
        index = retrieval.build_index(desc_path)
        qids = sorted(q for q in gt if q in index)
        if not qids:
            raise RmfeatError("no ground-truth query id has a descriptor")
        qvecs = np.stack([index.vector(q) for q in qids]).astype(np.float64)
        metrics, _ = retrieval.evaluate(
            index, qids, qvecs, gt, k=topk, exclude_self=cfg.get_bool("exclude_self")
        )
        rows.append((name, model.dim_out, metrics["nar"], metrics[f"map@{topk}"]))

    if args.baseline:
        rng = np.random.default_rng(cfg.get_int("seed"))
        vecs = rng.standard_normal((len(ids), cfg.get_int("dim"))).astype(np.float32)
        vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
        index = retrieval.index_from_arrays(ids, vecs)
        qids = sorted(q for q in gt if q in index)
        qvecs = np.stack([index.vector(q) for q in qids]).astype(np.float64)
        metrics, _ = retrieval.evaluate(
            index, qids, qvecs, gt, k=topk, exclude_self=cfg.get_bool("exclude_self")
        )
        rows.append(("random-baseline", cfg.get_int("dim"), metrics["nar"], metrics[f"map@{topk}"]))

    table_path = out_dir / "ablation.tsv"
    with open(table_path, "w", encoding="utf-8") as f:
        f.write(f"Method\tDIM\tNAR\tMAP@{topk}\n")
        for name, dim, nar_value, map_value in rows:
            f.write(f"{name}\t{dim}\t{nar_value!r}\t{map_value!r}\n")
    cfg.write_snapshot(out_dir, "ablate")
    width = max(len(r[0]) for r in rows)
    print(f"{'Method'.ljust(width)}  DIM  NAR      MAP@{topk}")
    for name, dim, nar_value, map_value in rows:
        print(f"{name.ljust(width)}  {dim:<4d} {nar_value:.4f}  {map_value:.4f}")
    return 0


# ---------------------------------------------------------------------------
# contact sheet


def _find_image(images_dir: Path, image_id: str) -> Path | None:
    from .backbone import IMAGE_SUFFIXES

    for suffix in IMAGE_SUFFIXES:
        candidate = images_dir / f"{image_id}{suffix}"
        if candidate.is_file():
            return candidate
    return None


def cmd_contact_sheet(args) -> int:
    rankings = retrieval.read_rankings(args.rankings)
    images_dir = Path(args.images)
    top = args.top
    parts = [
        "<!doctype html><html><head><meta charset='utf-8'><title>retrieval contact sheet</title>",
        "<style>body{font-family:sans-serif}td{text-align:center;padding:4px}"
        "img{width:96px;height:96px;object-fit:contain;border:1px solid #ccc}"
        ".q{background:#eef}</style></head><body><table>",
    ]
    for query_id in sorted(rankings):
        cells = [f"<td class='q'>{_img_tag(images_dir, query_id, args.embed_images)}<br>query {query_id}</td>"]
        for gallery_id, distance in rankings[query_id][:top]:
            cells.append(
                f"<td>{_img_tag(images_dir, gallery_id, args.embed_images)}<br>{gallery_id}<br>d={distance:.3f}</td>"
            )
        parts.append("<tr>" + "".join(cells) + "</tr>")
    parts.append("</table></body></html>")
    Path(args.out).write_text("\n".join(parts), encoding="utf-8")
    print(f"contact-sheet: wrote {args.out}")
    if args.png:
        _contact_png(rankings, images_dir, Path(args.png), top)
        print(f"contact-sheet: wrote {args.png}")
    return 0


def _img_tag(images_dir: Path, image_id: str, embed: bool) -> str:
    path = _find_image(images_dir, image_id)
    if path is None:
        return "<div style='width:96px;height:96px;background:#ddd'>missing</div>"
    if embed:
        payload = base64.b64encode(path.read_bytes()).decode("ascii")
        return f"<img src='data:image/{path.suffix.lstrip('.')};base64,{payload}'>"
    return f"<img src='{path.as_posix()}'><!-- {image_id} -->"


def _contact_png(rankings, images_dir: Path, out: Path, top: int, thumb: int = 96) -> None:
    from PIL import Image

    queries = sorted(rankings)
    cols = 1 + top
    sheet = Image.new("RGB", (cols * thumb, len(queries) * thumb), "white")
    for row, query_id in enumerate(queries):
        ids = [query_id] + [g for g, _ in rankings[query_id][:top]]
        for col, image_id in enumerate(ids):
            path = _find_image(images_dir, image_id)
            if path is None:
                continue
            with Image.open(path) as img:
                tile = img.convert("RGB").resize((thumb, thumb))
            sheet.paste(tile, (col * thumb, row * thumb))
    sheet.save(out)


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rmfeat", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="write per-resolution feature tensors for every image")
    p.add_argument("--images", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ids")
    p.add_argument("--mode", choices=["stub", "onnx"], default=None)
    p.add_argument("--model")
    p.add_argument("--channels")
    p.add_argument("--stride")
    p.add_argument("--stub-seed", dest="stub_seed")
    p.add_argument("--resolutions")
    p.add_argument("--jobs")
    p.add_argument("--force", action="store_true")
    p.add_argument("--config")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("fit", help="fit whitening + attention dictionary from gallery tensors")
    p.add_argument("--tensors", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ids")
    p.add_argument("--pooling", help="comma-separated modes, e.g. mac,smac")
    p.add_argument("--sample")
    p.add_argument("--kmeans-sample", dest="kmeans_sample")
    p.add_argument("--k")
    p.add_argument("--dim")
    p.add_argument("--scales")
    p.add_argument("--resolutions")
    p.add_argument("--seed")
    p.add_argument("--eps")
    p.add_argument("--config")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("embed", help="aggregate descriptors for every image into an .rmds file")
    p.add_argument("--tensors", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ids")
    p.add_argument("--fit-dir", dest="fit_dir")
    p.add_argument("--whitening")
    p.add_argument("--dictionary")
    p.add_argument("--pooling")
    p.add_argument("--multires", choices=["0", "1"])
    p.add_argument("--attention", choices=["0", "1"])
    p.add_argument("--scales")
    p.add_argument("--resolutions")
    p.add_argument("--jobs")
    p.add_argument("--manifest")
    p.add_argument("--config")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("search", help="top-K nearest gallery entries per query")
    p.add_argument("--gallery", required=True)
    p.add_argument("--queries")
    p.add_argument("--query-ids", dest="query_ids")
    p.add_argument("--out", required=True)
    p.add_argument("--topk")
    p.add_argument("--exclude-self", dest="exclude_self", choices=["0", "1"])
    p.add_argument("--config")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("evaluate", help="NAR and MAP@K against a ground-truth csv")
    p.add_argument("--gallery", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--queries")
    p.add_argument("--query-ids", dest="query_ids")
    p.add_argument("--out", required=True)
    p.add_argument("--rankings")
    p.add_argument("--topk")
    p.add_argument("--exclude-self", dest="exclude_self", choices=["0", "1"])
    p.add_argument("--config")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="run every toggle combination and tabulate NAR / MAP")
    p.add_argument("--tensors", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--combos", help="comma-separated toggle sets, e.g. ',smac,mr+smac+ura'")
    p.add_argument("--baseline", action="store_true", help="add a seeded random-descriptor row")
    p.add_argument("--sample")
    p.add_argument("--kmeans-sample", dest="kmeans_sample")
    p.add_argument("--k")
    p.add_argument("--dim")
    p.add_argument("--scales")
    p.add_argument("--resolutions")
    p.add_argument("--seed")
    p.add_argument("--eps")
    p.add_argument("--topk")
    p.add_argument("--jobs")
    p.add_argument("--exclude-self", dest="exclude_self", choices=["0", "1"])
    p.add_argument("--config")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("contact-sheet", help="HTML (optionally PNG) grid of top results per query")
    p.add_argument("--rankings", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--png")
    p.add_argument("--embed-images", dest="embed_images", action="store_true")
    p.set_defaults(func=cmd_contact_sheet)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (RmfeatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
