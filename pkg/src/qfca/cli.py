"""Command-line surface: detect, evaluate, bench and synth subcommands.

Machine-readable output (JSON lines / CSV) goes to stdout; human summaries
go to stderr. Exit codes: 0 ok, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import asdict

import numpy as np

from . import __version__
from .features import (FeatureMap, FilterBankConfig, extract_filterbank,
                       load_external_features)
from .metrics import EvalSample, MetricReport
from .pooling import box_average, naive_box_average
from .scoring import (AnomalyMap, PipelineConfig, detect, save_heatmap_pgm,
                      upsample_scores)
from .synth import KINDS, SynthConfig, generate_dataset
from .tensor_io import Tensor, load_dataset, load_image, load_mask, write_tensor


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--bins", type=int, default=16)
    p.add_argument("--patch-size", type=int, default=9)
    p.add_argument("--pca-components", type=int, default=0)
    p.add_argument("--sigma-s", type=float, default=1.0)
    p.add_argument("--sigma-p", type=float, default=math.inf)
    p.add_argument("--reference", default="median-quan",
                   choices=("median-quan", "mean-quan", "quan-median",
                            "quan-mean"))
    p.add_argument("--sample-budget", type=int, default=4096)
    p.add_argument("--threads", type=int, default=0,
                   help="cap the worker pool; 0 = all logical cores")


def _pipeline_config(args) -> PipelineConfig:
    return PipelineConfig(
        n_bins=args.bins,
        patch_size=args.patch_size,
        sigma_p=args.sigma_p,
        sigma_s=args.sigma_s,
        pca_components=args.pca_components,
        reference_mode=args.reference,
        sample_budget=args.sample_budget,
    )


def _apply_threads(n: int) -> None:
    if n > 0:
        import numba
        numba.set_num_threads(n)


def _load_config_file(path: str) -> dict:
    """TOML-like key=value file; values parsed as JSON when possible."""
    values: dict = {}
    with open(path) as f:
        for line in f:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"bad config line: {line!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            try:
                values[key] = json.loads(val)
            except json.JSONDecodeError:
                values[key] = val
    return values


def _manifest(args, cfg: PipelineConfig, inputs: list[str],
              timings: dict, seed: int | None = None) -> dict:
    return {
        "version": __version__,
        "config": asdict(cfg),
        "inputs": inputs,
        "timings_ms": {k: round(v, 3) for k, v in timings.items()},
        "seed": seed,
    }


def _features_for_image(path: str, args) -> FeatureMap:
    image = load_image(path).to_array()
    return extract_filterbank(image, FilterBankConfig())


def cmd_detect(args) -> int:
    _apply_threads(args.threads)
    cfg = _pipeline_config(args)
    t0 = time.perf_counter()
    timings: dict = {}
    if args.features:
        f = load_external_features(args.features)
        src = args.features
    else:
        f = _features_for_image(args.image, args)
        src = args.image
    timings["features_ms"] = (time.perf_counter() - t0) * 1e3
    amap = detect(f, cfg, timings=timings)
    wall_ms = (time.perf_counter() - t0) * 1e3
    timings["total_ms"] = wall_ms

    if args.out:
        if args.out.endswith(".pgm"):
            save_heatmap_pgm(amap.scores, args.out)
        else:
            scores = amap.scores
            if args.full_resolution:
                h, w = amap.scores.shape
                scores = upsample_scores(scores, h * f.scale, w * f.scale)
            write_tensor(Tensor.from_array(scores.astype(np.float32)),
                         args.out)
    if args.manifest:
        with open(args.manifest, "w") as fh:
            json.dump(_manifest(args, cfg, [src], timings), fh, indent=2)
            fh.write("\n")
    print(json.dumps({"image_score": amap.image_score,
                      "wall_time_ms": round(wall_ms, 3)}))
    print(f"detect: {src} score={amap.image_score:.6g} "
          f"({wall_ms:.1f} ms)", file=sys.stderr)
    return 0


def _majority_downsample(mask: np.ndarray, factor: int) -> np.ndarray:
    h = (mask.shape[0] // factor) * factor
    w = (mask.shape[1] // factor) * factor
    blocks = mask[:h, :w].reshape(h // factor, factor, w // factor, factor)
    return blocks.mean(axis=(1, 3)) > 0.5


def evaluate_class(root: str, class_name: str, cfg: PipelineConfig,
                   args) -> list[EvalSample]:
    index = load_dataset(root, class_name, layout=args.layout)
    samples = []
    for s in index.samples:
        if args.features_dir:
            stem = os.path.splitext(os.path.basename(s.image_path))[0]
            fpath = os.path.join(args.features_dir, class_name,
                                 s.defect_type, stem + ".qtf")
            f = load_external_features(fpath)
        else:
            f = _features_for_image(s.image_path, args)
        amap = detect(f, cfg)
        img_h = f.values.shape[1] * f.scale
        img_w = f.values.shape[2] * f.scale
        if s.mask_path is None:
            mask_img = np.zeros((img_h, img_w), dtype=bool)
        else:
            mask_img = load_mask(s.mask_path, size=(img_h, img_w))
        if args.mask_mode == "downsample-mask":
            scores = amap.scores
            mask = _majority_downsample(mask_img, f.scale)
            border = cfg.border
        else:
            scores = upsample_scores(amap.scores, img_h, img_w)
            mask = mask_img
            border = cfg.border * f.scale
        samples.append(EvalSample(scores=scores, mask=mask,
                                  image_label=s.is_anomalous, border=border))
    return samples


def cmd_evaluate(args) -> int:
    _apply_threads(args.threads)
    cfg = _pipeline_config(args)
    classes = [c for c in args.classes.split(",") if c]
    report = MetricReport()
    for cname in classes:
        if not os.path.isdir(os.path.join(args.dataset, cname)):
            print(f"error: class {cname} not found under {args.dataset}",
                  file=sys.stderr)
            return 2
        samples = evaluate_class(args.dataset, cname, cfg, args)
        row = report.add_class(cname, samples)
        print(f"{cname}: " + " ".join(
            f"{k}={row[k]:.4f}" for k in ("pro", "auroc_s", "f1", "auroc_c")
            if row.get(k) is not None), file=sys.stderr)
    print(json.dumps(report.to_dict(), sort_keys=True))
    return 0


def _time_runs(fn, repeats: int) -> tuple[float, float, float]:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append((time.perf_counter() - t0) * 1e3)
    arr = np.array(times)
    return (float(np.median(arr)), float(np.percentile(arr, 10)),
            float(np.percentile(arr, 90)))


def _bench_rows(args) -> list[tuple[str, str, float, float, float]]:
    rng = np.random.default_rng(0)
    rows = []
    if args.suite == "pooling":
        h = w = args.sizes
        channels = args.channels
        planes = rng.random((channels, h, w), dtype=np.float32)
        for k in args.kernels:
            def sat_run():
                for p in planes:
                    box_average(p, k, pad="zero")
            def naive_run():
                for p in planes:
                    naive_box_average(p, k, pad="zero")
            rows.append(("pooling", f"sat-k{k}", *_time_runs(sat_run, args.repeats)))
            rows.append(("pooling", f"naive-k{k}",
                         *_time_runs(naive_run, args.repeats)))
    elif args.suite in ("patch", "bins"):
        f = FeatureMap(values=rng.random((32, args.sizes, args.sizes),
                                         dtype=np.float32), scale=1)
        params = args.kernels if args.suite == "patch" else args.bins_list
        detect(f, PipelineConfig())  # warm up the jitted kernel
        for p in params:
            cfg = (PipelineConfig(patch_size=p) if args.suite == "patch"
                   else PipelineConfig(n_bins=p))
            rows.append((args.suite, str(p),
                         *_time_runs(lambda: detect(f, cfg), args.repeats)))
    elif args.suite == "pipeline":
        f = FeatureMap(values=rng.random((32, args.sizes, args.sizes),
                                         dtype=np.float32), scale=1)
        detect(f, PipelineConfig())
        for label, cfg in (("qfca", PipelineConfig()),
                           ("qfca+", PipelineConfig(pca_components=10))):
            rows.append(("pipeline", label,
                         *_time_runs(lambda: detect(f, cfg), args.repeats)))
    else:
        raise ValueError(f"unknown suite {args.suite!r}")
    return rows


def cmd_bench(args) -> int:
    _apply_threads(args.threads)
    rows = _bench_rows(args)
    print("suite,param,median_ms,p10,p90")
    for suite, param, med, p10, p90 in rows:
        print(f"{suite},{param},{med:.3f},{p10:.3f},{p90:.3f}")
    return 0


def cmd_synth(args) -> int:
    kinds = tuple(KINDS) if args.kind == "all" else (args.kind,)
    cfg = SynthConfig(anomaly=args.anomaly, size=args.size, seed=args.seed,
                      n_images=args.n_images, anomaly_frac=args.anomaly_frac)
    names = generate_dataset(args.out, cfg, kinds=kinds)
    print(json.dumps({"classes": names, "out": args.out, "seed": args.seed}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qfca",
        description="Quantized patch-transport texture anomaly localization")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="score a single image or feature file")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--image")
    src.add_argument("--features")
    p.add_argument("--out", help="heatmap path (.qtf or .pgm)")
    p.add_argument("--full-resolution", action="store_true",
                   help="upsample the exported heatmap to image resolution")
    p.add_argument("--manifest", help="write a JSON run manifest here")
    _add_pipeline_flags(p)
    p.set_defaults(fn=cmd_detect)

    p = sub.add_parser("evaluate", help="run metrics over a dataset tree")
    p.add_argument("--dataset", required=True)
    p.add_argument("--layout", default="mvtec", choices=("mvtec",))
    p.add_argument("--classes", required=True)
    p.add_argument("--features-dir",
                   help="directory of precomputed QTF feature files")
    p.add_argument("--mask-mode", default="upsample-scores",
                   choices=("upsample-scores", "downsample-mask"))
    _add_pipeline_flags(p)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("bench", help="timing suites (CSV on stdout)")
    p.add_argument("--suite", required=True,
                   choices=("pooling", "patch", "bins", "pipeline"))
    p.add_argument("--sizes", type=int, default=128)
    p.add_argument("--channels", type=int, default=64)
    p.add_argument("--kernels", type=lambda s: [int(x) for x in s.split(",")],
                   default=[3, 9, 31])
    p.add_argument("--bins-list", type=lambda s: [int(x) for x in s.split(",")],
                   default=[2, 4, 8, 16, 32])
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--threads", type=int, default=0)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("synth", help="generate a mini MVTec-layout dataset")
    p.add_argument("--kind", default="all", choices=KINDS + ("all",))
    p.add_argument("--anomaly", default="square", choices=("square", "blob"))
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--n-images", type=int, default=10)
    p.add_argument("--anomaly-frac", type=float, default=0.02)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    # --config provides defaults; explicit flags override them
    if "--config" in argv:
        i = argv.index("--config")
        try:
            path = argv[i + 1]
        except IndexError:
            parser.error("--config requires a path")
        del argv[i:i + 2]
        try:
            values = _load_config_file(path)
        except (OSError, ValueError) as e:
            print(f"error: {e}", file=sys.stderr)
            return 2
        for sp in parser._subparsers._group_actions[0].choices.values():
            known = {a.dest for a in sp._actions}
            sp.set_defaults(**{k: v for k, v in values.items() if k in known})
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        return args.fn(args)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
