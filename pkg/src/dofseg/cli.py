"""Command-line interface: segment, evaluate, diagnose, similarity, synth.

Exit codes: 0 success, 1 error, 2 segmented but empty (no candidates or
no clusters; the empty mask is still written).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields
from pathlib import Path

import numpy as np

from dofseg import evaluation, imagefiles, synthetic
from dofseg.colorspace import ImageDecodeError, LabImage
from dofseg.pipeline import PipelineParams, segment
from dofseg.scoring import ScoringParams, deviation_score_map, hos_map

log = logging.getLogger("dofseg")

EXIT_OK, EXIT_ERROR, EXIT_EMPTY = 0, 1, 2

# flag name -> PipelineParams field
PARAM_FLAGS = {
    "theta_score": float,
    "theta_eps": float,
    "sigma": float,
    "theta_dist": float,
    "theta_rec": float,
    "theta_rel": float,
    "theta_dbscan": float,
    "working_size": int,
    "r": int,
    "sbo_support": str,
}


class CliError(Exception):
    pass


def threads() -> int:
    raw = os.environ.get("DOFSEG_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise CliError(f"DOFSEG_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise CliError("DOFSEG_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def pmap(fn, items):
    """Map in parallel, results in input order."""
    items = list(items)
    n = min(threads(), max(1, len(items)))
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _add_param_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("pipeline parameters")
    for name, typ in PARAM_FLAGS.items():
        flag = "--radius" if name == "r" else "--" + name.replace("_", "-")
        kwargs = {"dest": name, "type": typ, "default": None}
        if name == "sbo_support":
            kwargs["choices"] = ("hull", "members")
        g.add_argument(flag, **kwargs)


def params_from(args) -> PipelineParams:
    given = {f.name: getattr(args, f.name) for f in fields(PipelineParams) if getattr(args, f.name, None) is not None}
    try:
        return PipelineParams(**given)
    except ValueError as exc:
        raise CliError(str(exc)) from None


def _emit_json(obj, path: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_segment(args) -> int:
    params = params_from(args)
    img = imagefiles.read_image(args.input)
    report = segment(img, params)
    imagefiles.write_mask(args.output, report.mask)
    if args.report:
        _emit_json(report.to_dict(timings=not args.no_timings), args.report)
    if args.dump_dir:
        dump_stages(report, Path(args.dump_dir))
    if args.figure:
        from dofseg.plotting import stage_figure

        stage_figure(img.rgb, report, args.figure)
    if report.empty:
        log.warning("%s: %s, wrote empty mask", args.input, report.flag.replace("_", " "))
        return EXIT_EMPTY
    return EXIT_OK


def dump_stages(report, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    art = report.artifacts
    shape = report.working_shape
    zeros = np.zeros(shape, dtype=bool)
    imagefiles.write_gray(out / "01_score.png", art.score_working if art.score_working is not None else zeros)
    clusters = art.cluster_labels if art.cluster_labels is not None else np.full(shape, -1)
    imagefiles.write_labels(out / "02_clusters.png", clusters)
    imagefiles.write_mask(out / "03_approx_mask.png", art.approx_mask if art.approx_mask is not None else zeros)
    regions = art.region_labels if art.region_labels is not None else np.full(shape, -1)
    imagefiles.write_labels(out / "04_regions.png", regions)
    imagefiles.write_mask(out / "05_final_mask.png", report.mask)


def cmd_evaluate(args) -> int:
    if args.manifest:
        if args.pred or args.truth:
            raise CliError("use either --manifest or --pred/--truth")
        return _evaluate_manifest(args)
    if not (args.pred and args.truth):
        raise CliError("--pred and --truth are both required without --manifest")
    rec = evaluation.spatial_distortion(imagefiles.read_mask(args.pred), imagefiles.read_mask(args.truth))
    _emit_json(rec.to_dict(), args.report)
    return EXIT_OK


def _evaluate_manifest(args) -> int:
    params = params_from(args)
    rows = evaluation.read_manifest(args.manifest)
    for row in rows:
        if not row.get("mask_path"):
            raise CliError(f"{args.manifest}: every row needs a mask_path")

    def run(row):
        img = imagefiles.read_image(row["path"])
        truth = imagefiles.read_mask(row["mask_path"])
        t0 = time.perf_counter()
        rep = segment(img, params)
        elapsed = (time.perf_counter() - t0) * 1000.0
        rec = evaluation.spatial_distortion(rep.mask, truth)
        out = {"path": row["path"], **rec.to_dict(), "flag": rep.flag}
        if not args.no_timings:
            out["runtime_ms"] = round(elapsed, 3)
        return out

    records = pmap(run, rows)
    result = {"images": records, "summary": evaluation.summarize(r["d"] for r in records)}
    if not args.no_timings:
        result["runtime_summary_ms"] = evaluation.summarize(r["runtime_ms"] for r in records)
    _emit_json(result, args.report)
    if args.figure:
        from dofseg.plotting import distortion_figure

        distortion_figure([Path(r["path"]).stem for r in records], [r["d"] for r in records], result["summary"], args.figure)
    return EXIT_OK


def cmd_diagnose(args) -> int:
    img = imagefiles.read_image(args.input)
    if args.method == "deviation":
        try:
            sp = ScoringParams(sigma=args.sigma, theta_score=args.theta_score, r=args.radius)
        except ValueError as exc:
            raise CliError(str(exc)) from None
        values = deviation_score_map(img, sp)
    else:
        values = hos_map(img)
    imagefiles.write_gray(args.output, values)
    return EXIT_OK


def cmd_similarity(args) -> int:
    if args.bins < 1:
        raise CliError("--bins must be >= 1")
    if args.p < 1:
        raise CliError("--p must be >= 1")
    params = params_from(args)
    manifest = evaluation.load_class_manifest(args.manifest)
    bad = manifest.singleton_classes()
    if bad:
        raise CliError("classes with fewer than two images: " + ", ".join(bad))
    keys = [k for k, _ in manifest.entries]
    images = dict(zip(keys, pmap(imagefiles.read_image, keys)))
    masks = None
    if args.use_masks:
        given = manifest.masks or {}

        def mask_for(key):
            if key in given:
                return imagefiles.read_mask(given[key])
            return segment(images[key], params).mask

        masks = dict(zip(keys, pmap(mask_for, keys)))
        empty = [k for k, m in masks.items() if not m.any()]
        if empty:
            raise CliError("empty masks, nothing to histogram: " + ", ".join(empty))
    report = evaluation.similarity_report(manifest, images, masks, bins=args.bins, p=args.p)
    _emit_json(report, args.report)
    if args.figure:
        from dofseg.plotting import similarity_figure

        similarity_figure(report, args.figure)
    return EXIT_OK


def _blur_range(text: str) -> tuple[float, float]:
    try:
        if ":" in text:
            lo, hi = (float(v) for v in text.split(":", 1))
        else:
            lo = hi = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"blur must be SIGMA or LO:HI, got {text!r}") from None
    if lo < 0 or hi < lo:
        raise argparse.ArgumentTypeError("blur range must satisfy 0 <= LO <= HI")
    return lo, hi


def cmd_synth(args) -> int:
    if args.count < 0:
        raise CliError("--count must be >= 0")
    if args.classes < 1:
        raise CliError("--classes must be >= 1")
    if args.size < 64:
        raise CliError("--size must be >= 64")
    out = Path(args.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        rows = []
        for i, (label, image, truth) in enumerate(
            synthetic.class_suite(args.count, args.classes, args.seed, args.blur, (args.size, args.size))
        ):
            img_name, mask_name = f"image_{i:03d}.png", f"truth_{i:03d}.png"
            imagefiles.write_rgb(out / img_name, image)
            imagefiles.write_mask(out / mask_name, truth)
            rows.append((img_name, mask_name, label))
        with open(out / "manifest.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["path", "mask_path", "class"])
            writer.writerows(rows)
    except OSError as exc:
        raise CliError(f"cannot write to {out}: {exc}") from None
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    # argparse would exit with 2, which is reserved for empty segmentations
    def error(self, message):
        raise CliError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dofseg", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="extract the in-focus object mask")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True, help="mask PNG (0 / 255)")
    p.add_argument("--report", help="write a JSON segmentation report")
    p.add_argument("--dump-dir", help="write per-stage PNGs here")
    p.add_argument("--figure", help="write a matplotlib overview of all stages")
    p.add_argument("--no-timings", action="store_true", help="omit timings from the report")
    _add_param_flags(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("evaluate", help="spatial distortion of masks")
    p.add_argument("--pred")
    p.add_argument("--truth")
    p.add_argument("--manifest", help="CSV with path,mask_path: segment each image and score it")
    p.add_argument("--report", help="JSON output path (default stdout)")
    p.add_argument("--figure", help="bar chart of per-image distortion (manifest mode)")
    p.add_argument("--no-timings", action="store_true")
    _add_param_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("diagnose", help="write a sharpness score map")
    p.add_argument("input")
    p.add_argument("--method", choices=("deviation", "hos"), default="deviation")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--sigma", type=float, default=0.9)
    p.add_argument("--theta-score", type=float, default=50.0)
    p.add_argument("--radius", type=int, default=1)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("similarity", help="inner/inter-class histogram distances")
    p.add_argument("--manifest", required=True, help="CSV with path,class[,mask_path]")
    p.add_argument("--bins", type=int, default=12)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--use-masks", action="store_true", help="compare against masked histograms")
    p.add_argument("--report", help="JSON output path (default stdout)")
    p.add_argument("--figure")
    _add_param_flags(p)
    p.set_defaults(func=cmd_similarity)

    p = sub.add_parser("synth", help="generate seeded synthetic scenes with ground truth")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--blur", type=_blur_range, default=(6.0, 12.0), help="SIGMA or LO:HI")
    p.add_argument("--classes", type=int, default=1)
    p.add_argument("--size", type=int, default=400)
    p.set_defaults(func=cmd_synth)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    pre = _Parser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if not known.config:
        return parser.parse_args(rest)
    try:
        config = json.loads(Path(known.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config {known.config}: {exc}") from None
    if not isinstance(config, dict):
        raise CliError("config must be a JSON object")
    config = {k.replace("-", "_"): v for k, v in config.items()}
    if "radius" in config:
        config["r"] = config.pop("radius")
    # defaults go on the subparsers so the command line still wins
    for action in parser._subparsers._group_actions:
        for sp in action.choices.values():
            sp.set_defaults(**config)
    args = parser.parse_args(rest)
    if isinstance(getattr(args, "blur", None), str):
        args.blur = _blur_range(args.blur)
    return args


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except CliError as exc:
        print(f"dofseg: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, ImageDecodeError, ValueError, OSError) as exc:
        print(f"dofseg: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
