"""``ccbench`` command line.

Exit codes: 0 success, 1 usage error, 2 data error, 3 lint failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .errors import CCBenchError
from .estimators import estimate, parse_estimator
from .evaluation import (
    METHODOLOGY_WARNING,
    EvaluationRun,
    evaluate,
    oracle_mismatch_experiment,
    read_estimates_csv,
    tabulate_runs,
    write_estimates_csv,
    write_table_csv,
)
from .groundtruth import (
    GroundTruthTable,
    diff_ground_truths,
    extract_ground_truth,
    read_annotations,
)
from .hygiene import (
    SEVERITIES,
    HygieneReport,
    audit_folds,
    camera_split_analysis,
    detect_unsubtracted_black,
    make_folds,
    pipeline_forensics,
    uniform_illumination_check,
)
from .imaging import (
    DEFAULT_SATURATION_MARGIN,
    rb_chromaticity,
    read_ppm16,
    saturation_mask,
    subtract_black,
    write_json,
    write_ppm16,
)
from .synthetic import CameraModel, make_benchmark

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_LINT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -- helpers --------------------------------------------------------------------


def _echo(args) -> dict:
    """Options that produced an output; output locations are left out so the
    same command writes identical bytes wherever it is pointed."""
    skip = {"func", "out", "out_dir", "report"}
    cfg = {}
    for k, v in sorted(vars(args).items()):
        if k in skip:
            continue
        cfg[k] = [str(x) for x in v] if isinstance(v, list) else v
    return cfg


def _provenance_path(path) -> Path:
    return Path(f"{path}.provenance.json")


def _read_provenance(path) -> dict:
    p = _provenance_path(path)
    if p.exists():
        with open(p) as f:
            return json.load(f)
    return {}


def _load_manifest(path) -> tuple[dict, Path]:
    path = Path(path)
    with open(path) as f:
        return json.load(f), path.parent


def _images_from(args) -> list[Path]:
    images = [Path(p) for p in (args.images or [])]
    if getattr(args, "manifest", None):
        manifest, root = _load_manifest(args.manifest)
        images += [root / e["image"] for e in manifest.get("images", []) if "image" in e]
    if not images:
        raise UsageError("no input images (give paths or --manifest)")
    return images


def _pipeline_flags(args) -> None:
    if args.subtract_black and args.unsafe_allow_unsubtracted:
        raise UsageError("--subtract-black and --unsafe-allow-unsubtracted are mutually exclusive")


def _prepare(path, subtract: bool, unsafe: bool):
    """Load an image and bring it to the requested pipeline state."""
    img = read_ppm16(path)
    if img.black_subtracted:
        return img, "subtracted"
    if subtract:
        return subtract_black(img), "subtracted"
    if unsafe:
        return img, "unsubtracted"
    raise CCBenchError(
        f"{path}: black level not subtracted; pass --subtract-black "
        "(or --unsafe-allow-unsubtracted to reproduce the wrong pipeline on purpose)"
    )


def _estimate_job(job):
    path, spec_text, subtract, unsafe, margin = job
    img, pipeline = _prepare(path, subtract, unsafe)
    mask = saturation_mask(img, margin) if margin is not None else None
    e = estimate(img, parse_estimator(spec_text), mask, allow_unsubtracted=unsafe)
    return Path(path).stem, e.rgb.tolist(), pipeline


def _extract_job(job):
    path, ann, subtract, unsafe, margin = job
    img, pipeline = _prepare(path, subtract, unsafe)
    e = extract_ground_truth(img, ann, saturation_mask(img, margin), allow_unsubtracted=unsafe)
    return Path(path).stem, e.rgb.tolist(), img.camera_id, pipeline


def _pool_map(fn, jobs, n_workers):
    # results come back in input order whatever the worker count
    if n_workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(fn, jobs))


def _combined_pipeline(pipelines) -> str:
    return "unsubtracted" if "unsubtracted" in pipelines else "subtracted"


def _write_text(path, text: str) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _taint_notice(pipeline: str) -> None:
    if pipeline == "unsubtracted":
        print(f"METHODOLOGY WARNING: {METHODOLOGY_WARNING}", file=sys.stderr)


# -- subcommands ----------------------------------------------------------------


def cmd_subtract(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for path in _images_from(args):
        img = read_ppm16(path)
        write_ppm16(subtract_black(img), out / Path(path).name)
    return EXIT_OK


def cmd_estimate(args) -> int:
    _pipeline_flags(args)
    spec = parse_estimator(args.estimator)
    margin = None if args.no_mask else args.margin
    jobs = [(str(p), spec.describe(), args.subtract_black, args.unsafe_allow_unsubtracted, margin)
            for p in _images_from(args)]
    results = _pool_map(_estimate_job, jobs, args.jobs)
    estimates = {}
    for image_id, rgb, _ in results:
        if image_id in estimates:
            raise CCBenchError(f"duplicate image id {image_id!r}")
        estimates[image_id] = rgb
    pipeline = _combined_pipeline(r[2] for r in results)
    write_estimates_csv(estimates, args.out)
    write_json(_provenance_path(args.out), {"kind": "estimates", "estimator": spec.describe(),
                                            "pipeline": pipeline, "config": _echo(args)})
    _taint_notice(pipeline)
    return EXIT_OK


def cmd_extract_gt(args) -> int:
    _pipeline_flags(args)
    annotations = read_annotations(args.annotations)
    jobs = []
    for path in _images_from(args):
        image_id = Path(path).stem
        if image_id not in annotations:
            raise CCBenchError(f"no patch annotation for {image_id!r}")
        ann = annotations[image_id]
        if args.inset is not None:
            ann = type(ann)(ann.image_id, ann.patches, args.inset)
        jobs.append((str(path), ann, args.subtract_black, args.unsafe_allow_unsubtracted,
                     args.margin))
    results = _pool_map(_extract_job, jobs, args.jobs)
    table = GroundTruthTable.from_items((i, rgb, cam) for i, rgb, cam, _ in results)
    pipeline = _combined_pipeline(r[3] for r in results)
    table.to_csv(args.out)
    write_json(_provenance_path(args.out), {"kind": "ground_truth", "pipeline": pipeline,
                                            "config": _echo(args)})
    _taint_notice(pipeline)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    estimates = read_estimates_csv(args.estimates)
    gt = GroundTruthTable.from_csv(args.gt)
    prov = _read_provenance(args.estimates)
    gt_prov = _read_provenance(args.gt)
    pipeline = args.pipeline or prov.get("pipeline", "subtracted")
    estimator = args.estimator or prov.get("estimator", "unknown")
    gt_id = args.gt_id or f"{Path(args.gt).name}:{gt_prov.get('pipeline', 'unknown')}"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        run = evaluate(estimates, gt, estimator, pipeline, gt_id)
    run.config = _echo(args)
    _taint_notice(pipeline)
    runs = [run]
    for other in args.compare or []:
        with open(other) as f:
            runs.append(EvaluationRun.from_dict(json.load(f)))
    if len(runs) > 1 or args.format == "csv":
        rows = tabulate_runs(runs, force_mixed=args.force_mixed)
    if args.format == "csv":
        if args.out in (None, "-"):
            raise UsageError("--format csv needs --out")
        write_table_csv(rows, args.out)
        return EXIT_OK
    report = run.to_dict()
    if len(runs) > 1:
        report["table"] = rows
    _write_text(args.out, _dump(report))
    return EXIT_OK


def cmd_diff_gt(args) -> int:
    a = GroundTruthTable.from_csv(args.a)
    b = GroundTruthTable.from_csv(args.b)
    diff = diff_ground_truths(a, b)
    if args.format == "csv":
        lines = ["image_id,angle"] + [f"{k},{v!r}" for k, v in diff.per_image_angle.items()]
        _write_text(args.out, "\n".join(lines) + "\n")
    else:
        report = diff.to_dict()
        report["config"] = _echo(args)
        _write_text(args.out, _dump(report))
    return EXIT_OK


def _regions_file(path) -> dict:
    with open(path) as f:
        return json.load(f)


def cmd_lint(args) -> int:
    report = HygieneReport()
    images = []
    gt = None
    if args.manifest:
        manifest, root = _load_manifest(args.manifest)
        images += [root / e["image"] for e in manifest.get("images", []) if "image" in e]
        if manifest.get("ground_truth") and not args.gt:
            gt = GroundTruthTable.from_csv(root / manifest["ground_truth"])
    images += [Path(p) for p in args.images or []]
    if args.gt:
        gt = GroundTruthTable.from_csv(args.gt)

    for path in images:
        img = read_ppm16(path)
        report.extend(detect_unsubtracted_black(img, args.pedestal_threshold, Path(path).stem))

    if gt is not None:
        counts = {}
        for rec in gt.records.values():
            counts[rec.camera_id] = counts.get(rec.camera_id, 0) + 1
        if min(counts.values()) >= 2:
            report.extend(camera_split_analysis(gt, args.split_factor).finding)
        if args.folds:
            spec = make_folds(gt.ids, _fold_count(args.folds), "external", source=args.folds)
            report.extend(audit_folds(spec, gt, args.centroid_threshold))

    if args.regions:
        by_path = {Path(p).stem: p for p in images}
        for image_id, regions in _regions_file(args.regions).items():
            if image_id not in by_path:
                raise CCBenchError(f"regions given for unknown image {image_id!r}")
            img = read_ppm16(by_path[image_id])
            if not img.black_subtracted:
                img = subtract_black(img)
            report.extend(uniform_illumination_check(img, regions, args.uniform_threshold,
                                                     image_id=image_id).findings)

    if args.run_a or args.run_b:
        if not (args.run_a and args.run_b and args.gt_sub and args.gt_unsub):
            raise UsageError("pipeline forensics needs --run-a, --run-b, --gt-sub and --gt-unsub")
        report.extend(pipeline_forensics(
            read_estimates_csv(args.run_a), read_estimates_csv(args.run_b),
            GroundTruthTable.from_csv(args.gt_sub), GroundTruthTable.from_csv(args.gt_unsub),
            names=(Path(args.run_a).name, Path(args.run_b).name)))

    if not report.findings:
        raise UsageError("nothing to lint (give --manifest, images, --gt, --regions or runs)")
    out = report.to_dict()
    out["config"] = _echo(args)
    out["failed"] = report.failed(args.fail_on)
    _write_text(args.out, _dump(out))
    return EXIT_LINT if report.failed(args.fail_on) else EXIT_OK


def _fold_count(path) -> int:
    with open(path) as f:
        return len(json.load(f)["folds"])


def _ids_and_table(args):
    """Ordered ids plus a camera-bearing table (if any) for auditing."""
    if args.manifest:
        manifest, root = _load_manifest(args.manifest)
        entries = manifest.get("images", [])
        ids = [str(e["image_id"]) for e in entries]
        gt_path = manifest.get("ground_truth")
        if gt_path and (root / gt_path).exists():
            table = GroundTruthTable.from_csv(root / gt_path)
        else:
            # camera-only manifest: a neutral placeholder illuminant keeps the
            # composition audit meaningful without real ground truth
            table = GroundTruthTable.from_items(
                (str(e["image_id"]), (1.0, 1.0, 1.0), e.get("camera_id", "unknown"))
                for e in entries)
        return ids, table
    if args.gt:
        table = GroundTruthTable.from_csv(args.gt)
        return table.ids, table
    raise UsageError("folds needs --manifest or --gt")


def cmd_folds(args) -> int:
    ids, table = _ids_and_table(args)
    spec = make_folds(ids, args.k, args.mode, args.seed, args.source)
    findings = audit_folds(spec, table, args.centroid_threshold)
    fold_doc = spec.to_dict()
    fold_doc["config"] = _echo(args)
    _write_text(args.out, _dump(fold_doc))
    report = HygieneReport(findings).to_dict()
    report["config"] = _echo(args)
    if args.report:
        Path(args.report).write_text(_dump(report))
    else:
        sys.stderr.write(_dump(report))
    return EXIT_OK


def _cameras(args):
    cams = [CameraModel.gaussian("camera_a", black_level=args.black_level,
                                 saturation_level=args.saturation)]
    if args.cameras == 2:
        cams.append(CameraModel.gaussian("camera_b", shift=args.shift,
                                         black_level=args.black_level,
                                         saturation_level=args.saturation))
    return cams


def _split(args, n):
    if args.split is None:
        return None
    split = [int(v) for v in args.split.split(",")]
    if len(split) != args.cameras or sum(split) != n:
        raise UsageError(f"--split must list {args.cameras} counts summing to {n}")
    return split


def cmd_simulate(args) -> int:
    if args.cameras not in (1, 2):
        raise UsageError("--cameras must be 1 or 2")
    dataset = make_benchmark(args.n, _cameras(args), (args.cct_min, args.cct_max), args.seed,
                             _split(args, args.n), args.width, args.height,
                             noise_sigma=args.noise)
    dataset.config["cli"] = _echo(args)
    dataset.write(args.out, inject_black=not args.no_black)
    return EXIT_OK


def cmd_oracle(args) -> int:
    levels = [float(v) for v in args.black_levels.split(",")]
    dataset = make_benchmark(args.n, _cameras(args), (args.cct_min, args.cct_max), args.seed,
                             _split(args, args.n))
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for bl in levels:
            wrong, right = oracle_mismatch_experiment(dataset, bl)
            rows.append({"black_level": bl, "wrong_run": wrong.to_dict(),
                         "right_run": right.to_dict()})
    medians = [r["wrong_run"]["stats"]["median"] for r in rows]
    report = {
        "experiment": "oracle_mismatch",
        "runs": rows,
        "wrong_median_by_black_level": dict(zip([f"{v:g}" for v in levels], medians)),
        "monotonic_nondecreasing": all(b >= a for a, b in zip(medians, medians[1:])),
        "config": _echo(args),
    }
    _write_text(args.out, _dump(report))
    return EXIT_OK


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def chroma_svg(points: dict, size: int = 480) -> str:
    """Self-contained SVG scatter of rb chromaticities, one color per camera."""
    allpts = np.vstack([p for p in points.values()])
    lo, hi = allpts.min(axis=0), allpts.max(axis=0)
    pad = 0.05 * max(float((hi - lo).max()), 1e-3)
    lo, hi = lo - pad, hi + pad
    span = max(float((hi - lo).max()), 1e-9)
    m = 50
    scale = (size - 2 * m) / span

    def xy(p):
        return m + (p[0] - lo[0]) * scale, size - m - (p[1] - lo[1]) * scale

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
             f'viewBox="0 0 {size} {size}">',
             f'<rect width="{size}" height="{size}" fill="white"/>',
             f'<line x1="{m}" y1="{size - m}" x2="{size - m}" y2="{size - m}" stroke="black"/>',
             f'<line x1="{m}" y1="{m}" x2="{m}" y2="{size - m}" stroke="black"/>',
             f'<text x="{size / 2:.0f}" y="{size - 15}" text-anchor="middle" '
             f'font-size="14">r = R/(R+G+B)</text>',
             f'<text x="15" y="{size / 2:.0f}" text-anchor="middle" font-size="14" '
             f'transform="rotate(-90 15 {size / 2:.0f})">b = B/(R+G+B)</text>']
    for n, (cam, pts) in enumerate(sorted(points.items())):
        color = _PALETTE[n % len(_PALETTE)]
        for p in pts:
            x, y = xy(p)
            parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2.5" fill="{color}"/>')
        parts.append(f'<text x="{size - m - 100}" y="{m + 18 * n}" font-size="12" '
                     f'fill="{color}">{cam}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cmd_plot_chroma(args) -> int:
    gt = GroundTruthTable.from_csv(args.gt)
    lines = ["image_id,r,b,camera_id"]
    points: dict[str, list] = {}
    for image_id, rec in gt.records.items():
        r, b = rb_chromaticity(rec.illuminant)
        lines.append(f"{image_id},{r!r},{b!r},{rec.camera_id}")
        points.setdefault(rec.camera_id, []).append((r, b))
    prefix = Path(args.out)
    Path(f"{prefix}.csv").write_text("\n".join(lines) + "\n")
    Path(f"{prefix}.svg").write_text(chroma_svg({k: np.array(v) for k, v in points.items()}))
    return EXIT_OK


# -- parser ---------------------------------------------------------------------


def _add_pipeline(p):
    p.add_argument("--subtract-black", action="store_true",
                   help="subtract the sidecar black level before processing")
    p.add_argument("--unsafe-allow-unsubtracted", action="store_true",
                   help="process raw images as-is; taints every downstream report")
    p.add_argument("--margin", type=float, default=DEFAULT_SATURATION_MARGIN,
                   help="saturation clip margin (fraction)")


def _add_images(p):
    p.add_argument("images", nargs="*", help="16-bit PPM files with .meta.json sidecars")
    p.add_argument("--manifest", help="dataset manifest listing images")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ccbench", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ccbench {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("subtract", help="subtract black level from images")
    _add_images(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_subtract)

    p = sub.add_parser("estimate", help="run a statistics-based estimator")
    _add_images(p)
    _add_pipeline(p)
    p.add_argument("--estimator", default="gray-world",
                   help='e.g. "gray-world", "shades-of-gray:p=6", "gray-edge:n=1,p=1,sigma=6"')
    p.add_argument("--no-mask", action="store_true", help="keep clipped pixels")
    p.add_argument("--out", required=True, help="estimates CSV")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("extract-gt", help="ground truth from annotated achromatic patches")
    _add_images(p)
    _add_pipeline(p)
    p.add_argument("--annotations", required=True)
    p.add_argument("--inset", type=float, help="override annotation inset")
    p.add_argument("--out", required=True, help="ground-truth CSV")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_extract_gt)

    p = sub.add_parser("evaluate", help="angular-error statistics of estimates")
    p.add_argument("--estimates", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--gt-id", help="ground-truth version tag")
    p.add_argument("--pipeline", choices=("subtracted", "unsubtracted"),
                   help="override the pipeline recorded with the estimates")
    p.add_argument("--estimator", help="override the estimator recorded with the estimates")
    p.add_argument("--compare", nargs="*", help="earlier run reports to tabulate alongside")
    p.add_argument("--force-mixed", action="store_true",
                   help="tabulate runs scored against different ground truths")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("diff-gt", help="per-image angle between two ground-truth tables")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_diff_gt)

    p = sub.add_parser("lint", help="dataset hygiene checks")
    _add_images(p)
    p.add_argument("--gt")
    p.add_argument("--folds", help="fold file to audit")
    p.add_argument("--regions", help="JSON {image_id: {label: quad}} of achromatic regions")
    p.add_argument("--run-a")
    p.add_argument("--run-b")
    p.add_argument("--gt-sub")
    p.add_argument("--gt-unsub")
    p.add_argument("--pedestal-threshold", type=float, default=0.01)
    p.add_argument("--split-factor", type=float, default=3.0)
    p.add_argument("--centroid-threshold", type=float, default=0.02)
    p.add_argument("--uniform-threshold", type=float, default=1.0)
    p.add_argument("--fail-on", choices=SEVERITIES[1:], default="fail")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_lint)

    p = sub.add_parser("folds", help="make and audit cross-validation folds")
    p.add_argument("--manifest")
    p.add_argument("--gt")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--mode", choices=("none", "seeded", "external"), default="none")
    p.add_argument("--seed", type=int)
    p.add_argument("--source", help="fold file for --mode external")
    p.add_argument("--centroid-threshold", type=float, default=0.02)
    p.add_argument("--out", default="-", help="fold file")
    p.add_argument("--report", help="audit findings JSON (default: stderr)")
    p.set_defaults(func=cmd_folds)

    for name, func, helptext in (("simulate", cmd_simulate, "render a synthetic benchmark"),
                                 ("oracle-experiment", cmd_oracle,
                                  "perfect oracle under wrong vs right methodology")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--n", type=int, default=50 if name != "simulate" else 20)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--cameras", type=int, default=1)
        p.add_argument("--split", help="images per camera, e.g. 86,482")
        p.add_argument("--shift", type=float, default=20.0, help="camera_b peak shift (nm)")
        p.add_argument("--cct-min", type=float, default=2500.0)
        p.add_argument("--cct-max", type=float, default=7500.0)
        p.add_argument("--black-level", type=float, default=129.0)
        p.add_argument("--saturation", type=float, default=3692.0)
        if name == "simulate":
            p.add_argument("--width", type=int, default=96)
            p.add_argument("--height", type=int, default=64)
            p.add_argument("--noise", type=float, default=0.0)
            p.add_argument("--no-black", action="store_true", help="write pedestal-free images")
            p.add_argument("--out", required=True, help="output directory")
        else:
            p.add_argument("--black-levels", default="64,129,256,512")
            p.add_argument("--out", default="-")
        p.set_defaults(func=func)

    p = sub.add_parser("plot-chroma", help="rb-chromaticity scatter as CSV + SVG")
    p.add_argument("gt")
    p.add_argument("--out", required=True, help="output prefix")
    p.set_defaults(func=cmd_plot_chroma)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            raise UsageError("missing subcommand (see --help)")
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be >= 1")
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CCBenchError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run())
