"""Command-line interface.

Subcommands cover the full pipeline: ``evaluate`` scores predictions against
ground truth, ``curves`` probes measure decay under center deviation,
``stats`` summarizes a dataset, ``masks`` converts boxes to masks and back,
``interpolate`` fills short track gaps, and ``pairwise``/``loss`` expose the
scalar kernels for other tooling.

Conventions: exit 0 on success, 1 on data/validation problems, 2 on bad
usage or parameter values.  Errors go to stderr as one JSON object per line.
Outputs are deterministic (sorted keys, fixed row order, no timestamps), and
every file written gets a ``<name>.meta.json`` sidecar recording the exact
invocation.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

from . import __version__
from .boxes import BBox
from .data import (
    MODALITIES,
    dataset_stats,
    interpolate_dataset,
    load_ground_truth,
    load_predictions,
    save_ground_truth,
    save_predictions,
    Detection,
)
from .errors import ConfigError, DataError, WarpError
from .evaluation import DEFAULT_THRESHOLDS, EvalConfig, deviation_curve, evaluate
from .losses import fd_check, loss
from .masks import load_mask, mask_to_bboxes, rasterize, save_mask
from .metrics import MEASURE_IDS, pairwise, resolve


class _ValidationFailed(Exception):
    def __init__(self, issues):
        super().__init__(f"{len(issues)} validation issue(s)")
        self.issues = issues


def _print_error(code: str, message: str, record: dict | None = None) -> None:
    obj = {"error": code, "message": message}
    if record is not None:
        obj["record"] = record
    print(json.dumps(obj, sort_keys=True), file=sys.stderr)


def _write_json(obj, path: str) -> None:
    with open(path, "w") as f:
        json.dump(obj, f, sort_keys=True, separators=(",", ":"))
        f.write("\n")


def _write_csv(rows, path: str) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        for row in rows:
            writer.writerow([str(c) for c in row])


def _write_sidecar(out_path: str, argv: list[str]) -> None:
    _write_json({"package": "safit", "version": __version__, "argv": argv}, out_path + ".meta.json")


def _load_gt(path: str):
    ds = load_ground_truth(path)
    if ds.issues:
        raise _ValidationFailed(ds.issues)
    return ds


def _parse_thresholds(text: str) -> tuple[float, ...]:
    """Accept 'start:step:stop' (inclusive) or a comma list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"thresholds range must be start:step:stop, got {text!r}")
        start, step, stop = (float(p) for p in parts)
        if step <= 0:
            raise ConfigError(f"threshold step must be > 0, got {step}")
        out = []
        i = 0
        while True:
            t = round(start + i * step, 10)
            if t > stop + 1e-9:
                break
            out.append(t)
            i += 1
        return tuple(out)
    return tuple(float(p) for p in text.split(","))


def _parse_scale_bins(text: str) -> tuple[tuple[str, float, float], ...]:
    bins = []
    for part in text.split(","):
        fields = part.split(":")
        if len(fields) != 3:
            raise ConfigError(f"scale bin must be name:lo:hi, got {part!r}")
        name, lo, hi = fields
        bins.append((name, float(lo), math.inf if hi == "inf" else float(hi)))
    return tuple(bins)


def _parse_box(text: str) -> BBox:
    parts = text.split(",")
    if len(parts) != 4:
        raise ConfigError(f"box must be cx,cy,w,h, got {text!r}")
    return BBox(*(float(p) for p in parts))


def _eval_config(args) -> EvalConfig:
    kwargs = {}
    if args.scale_bins:
        kwargs["scale_bins"] = _parse_scale_bins(args.scale_bins)
    return EvalConfig(
        measure=args.measure,
        c=args.c,
        k=args.k,
        thresholds=_parse_thresholds(args.thresholds),
        max_detections=args.max_detections,
        recall_points=args.recall_points,
        modality=args.modality,
        light_vision=args.light_vision,
        per_light_vision=args.per_light_vision,
        workers=args.workers,
        **kwargs,
    )


def _add_measure_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--measure", default="safit", choices=MEASURE_IDS, help="affinity measure (default: safit)")
    p.add_argument("--c", type=float, default=32.0, help="scale balance constant for the adaptive measures (default: 32)")
    p.add_argument("--k", type=float, default=None, help="normalization constant for plain nwd (default: same as --c)")


def cmd_evaluate(args) -> int:
    ds = _load_gt(args.gt)
    preds = load_predictions(args.pred, images=ds.images, categories=ds.categories)
    if preds.issues:
        raise _ValidationFailed(preds.issues)
    config = _eval_config(args)
    report = evaluate(ds, preds, config)
    _write_json(report.to_json_dict(), args.out)
    _write_sidecar(args.out, args.argv)
    if args.csv:
        _write_csv(report.to_csv_rows(), args.csv)
        _write_sidecar(args.csv, args.argv)
    return 0


def cmd_curves(args) -> int:
    sizes = [float(s) for s in args.sizes.split(",")]
    results = [(s, deviation_curve(s, args.max_dev, args.measure, args.c, args.k)) for s in sizes]
    if args.out.endswith(".json"):
        obj = {
            "measure": args.measure,
            "params": _eval_config_params(args),
            "max_dev": args.max_dev,
            "curves": [
                {"size": s, "values": [v for _, v in curve]} for s, curve in results
            ],
        }
        _write_json(obj, args.out)
    else:
        rows = [("size", "deviation", "measure", "value")]
        for s, curve in results:
            for d, v in curve:
                rows.append((s, d, args.measure, repr(v)))
        _write_csv(rows, args.out)
    _write_sidecar(args.out, args.argv)
    return 0


def _eval_config_params(args) -> dict:
    if args.measure in ("safit", "safit_s", "safit_g"):
        return {"c": args.c}
    if args.measure == "nwd":
        return {"k": args.k if args.k is not None else args.c}
    return {}


def cmd_stats(args) -> int:
    ds = _load_gt(args.gt)
    report = dataset_stats(ds, modality=args.modality)
    if args.out.endswith(".csv"):
        _write_csv(report.to_csv_rows(), args.out)
    else:
        _write_json(report.to_json_dict(), args.out)
    _write_sidecar(args.out, args.argv)
    if args.csv:
        _write_csv(report.to_csv_rows(), args.csv)
        _write_sidecar(args.csv, args.argv)
    return 0


def cmd_masks(args) -> int:
    if args.gt:
        ds = _load_gt(args.gt)
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        groups: dict[tuple[int, int, str], list] = {}
        for a in ds.annotations:
            if args.modality is not None and a.modality != args.modality:
                continue
            groups.setdefault((a.frame_id, a.class_id, a.modality), []).append(a.bbox)
        written = 0
        for (img_id, class_id, modality) in sorted(groups):
            img = ds.images[img_id]
            values = rasterize(
                groups[(img_id, class_id, modality)],
                (img.width, img.height),
                mode=args.mode,
                sigma_divisor=args.sigma_divisor,
            )
            name = f"mask_{img_id:06d}_{class_id:03d}_{modality}.{args.mask_format}"
            save_mask(values, str(out_dir / name))
            written += 1
        print(json.dumps({"written": written, "dir": str(out_dir)}, sort_keys=True))
        return 0

    # reverse direction: recover detections from mask files
    src = Path(args.from_dir)
    if not src.is_dir():
        raise DataError(f"mask directory {src} does not exist")
    detections: list[Detection] = []
    for path in sorted(src.iterdir()):
        stem, ext = path.stem, path.suffix
        if ext not in (".png", ".npy") or not stem.startswith("mask_"):
            continue
        fields = stem.split("_")
        if len(fields) != 4:
            raise DataError(f"mask file name {path.name} is not mask_<image>_<class>_<modality>")
        img_id, class_id, modality = int(fields[1]), int(fields[2]), fields[3]
        values = load_mask(str(path))
        for box, score in mask_to_bboxes(values, threshold=args.mask_threshold, connectivity=args.connectivity):
            detections.append(
                Detection(frame_id=img_id, class_id=class_id, bbox=box, score=score, modality=modality)
            )
    save_predictions(detections, args.out)
    _write_sidecar(args.out, args.argv)
    print(json.dumps({"detections": len(detections), "out": args.out}, sort_keys=True))
    return 0


def cmd_interpolate(args) -> int:
    ds = _load_gt(args.gt)
    before = len(ds.annotations)
    filled, open_gaps = interpolate_dataset(ds, max_gap=args.max_gap)
    save_ground_truth(filled, args.out)
    _write_sidecar(args.out, args.argv)
    print(
        json.dumps(
            {
                "added": len(filled.annotations) - before,
                "open_gaps": [list(g) for g in open_gaps],
            },
            sort_keys=True,
        )
    )
    return 0


def _load_box_list(path: str) -> list[BBox]:
    try:
        with open(path) as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        raise DataError(f"{path} is not valid JSON: {e}") from e
    if not isinstance(raw, list):
        raise DataError(f"{path} must contain a JSON list of [cx, cy, w, h] boxes")
    boxes = []
    for i, rec in enumerate(raw):
        if not isinstance(rec, list) or len(rec) != 4:
            raise DataError(f"{path}[{i}] must be [cx, cy, w, h]")
        try:
            boxes.append(BBox(*(float(v) for v in rec)))
        except (TypeError, ValueError) as e:
            raise DataError(f"{path}[{i}]: {e}") from e
    return boxes


def cmd_pairwise(args) -> int:
    a = _load_box_list(args.boxes_a)
    b = _load_box_list(args.boxes_b)
    fn = resolve(args.measure, args.c, args.k)
    obj = {
        "measure": args.measure,
        "params": _eval_config_params(args),
        "shape": [len(a), len(b)],
        "values": pairwise(fn, a, b),
    }
    if args.out:
        _write_json(obj, args.out)
        _write_sidecar(args.out, args.argv)
    else:
        print(json.dumps(obj, sort_keys=True, separators=(",", ":")))
    return 0


def cmd_loss(args) -> int:
    result = loss(args.measure, args.pred, args.gt, args.c, args.k)
    fd = None
    if args.fd_check:
        err = fd_check(args.measure, args.pred, args.gt, args.c, args.k, step=args.step)
        fd = None if math.isnan(err) else err
    obj = {
        "measure": args.measure,
        "params": _eval_config_params(args),
        "loss": result.value,
        "gradient": list(result.gradient),
        "nondifferentiable": result.nondifferentiable,
        "fd_error": fd,
    }
    if args.out:
        _write_json(obj, args.out)
        _write_sidecar(args.out, args.argv)
    else:
        print(json.dumps(obj, sort_keys=True, separators=(",", ":")))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="safit",
        description="Scale-adaptive detection evaluation and measure toolkit.",
    )
    parser.add_argument("--version", action="version", version=f"safit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    default_workers = os.environ.get("SAFIT_WORKERS", "1")

    p = sub.add_parser("evaluate", help="score predictions against ground truth")
    p.add_argument("--gt", required=True, help="ground-truth JSON file")
    p.add_argument("--pred", required=True, help="prediction JSON file")
    _add_measure_flags(p)
    p.add_argument("--thresholds", default="0.5:0.05:0.95", help="'start:step:stop' or comma list (default: 0.5:0.05:0.95)")
    p.add_argument("--max-detections", type=int, default=300, help="per image and class (default: 300)")
    p.add_argument("--recall-points", type=int, default=101, help="interpolation grid size (default: 101)")
    p.add_argument("--modality", choices=MODALITIES, default=None, help="restrict to one modality")
    p.add_argument("--light-vision", default=None, help="restrict to sequences with this light level")
    p.add_argument("--per-light-vision", action="store_true", help="add a per-light-level table")
    p.add_argument("--scale-bins", default=None, help="override bins as name:lo:hi,... (hi of last must be inf)")
    p.add_argument("--workers", type=int, default=int(default_workers), help="parallel units; output is identical for any value (default: $SAFIT_WORKERS or 1)")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--csv", default=None, help="also write the flat CSV report here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("curves", help="measure decay under diagonal center deviation")
    p.add_argument("--sizes", default="4,8,16,32,64,128", help="comma list of square gt sizes (default: 4,8,16,32,64,128)")
    p.add_argument("--max-dev", type=int, default=20, help="largest deviation in px (default: 20)")
    _add_measure_flags(p)
    p.add_argument("--out", required=True, help="output path (.csv rows or .json)")
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("stats", help="dataset summary: densities, scale histogram, light levels")
    p.add_argument("--gt", required=True, help="ground-truth JSON file")
    p.add_argument("--modality", choices=MODALITIES, default=None, help="tally one modality stream")
    p.add_argument("--out", required=True, help="output path (.json or .csv)")
    p.add_argument("--csv", default=None, help="also write the CSV form here")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("masks", help="rasterize boxes to masks, or recover boxes from masks")
    direction = p.add_mutually_exclusive_group(required=True)
    direction.add_argument("--gt", help="rasterize: ground-truth JSON file")
    direction.add_argument("--from-dir", help="recover: directory of mask files")
    p.add_argument("--mode", choices=("hard", "soft"), default="hard", help="rasterization mode (default: hard)")
    p.add_argument("--sigma-divisor", type=float, default=4.0, help="soft mode: sigma = extent/divisor (default: 4)")
    p.add_argument("--modality", choices=MODALITIES, default=None, help="rasterize only this modality")
    p.add_argument("--mask-format", choices=("png", "npy"), default="png", help="output format (default: png)")
    p.add_argument("--out-dir", default=None, help="rasterize: output directory")
    p.add_argument("--mask-threshold", type=float, default=0.5, help="recover: binarization threshold (default: 0.5)")
    p.add_argument("--connectivity", type=int, choices=(4, 8), default=8, help="recover: component connectivity (default: 8)")
    p.add_argument("--out", default=None, help="recover: predictions JSON path")
    p.set_defaults(func=cmd_masks)

    p = sub.add_parser("interpolate", help="fill short track gaps by linear interpolation")
    p.add_argument("--gt", required=True, help="ground-truth JSON file")
    p.add_argument("--max-gap", type=int, default=5, help="largest gap (missing frames) to fill (default: 5)")
    p.add_argument("--out", required=True, help="output ground-truth JSON path")
    p.set_defaults(func=cmd_interpolate)

    p = sub.add_parser("pairwise", help="dense affinity table between two box lists")
    _add_measure_flags(p)
    p.add_argument("--boxes-a", required=True, help="JSON file: list of [cx, cy, w, h] rows")
    p.add_argument("--boxes-b", required=True, help="JSON file: list of [cx, cy, w, h] rows")
    p.add_argument("--out", default=None, help="output JSON path (default: stdout)")
    p.set_defaults(func=cmd_pairwise)

    p = sub.add_parser("loss", help="loss value and analytic gradient for one box pair")
    _add_measure_flags(p)
    p.add_argument("--pred", type=_parse_box, required=True, help="predicted box as cx,cy,w,h")
    p.add_argument("--gt", type=_parse_box, required=True, help="ground-truth box as cx,cy,w,h")
    p.add_argument("--fd-check", action="store_true", help="also report the finite-difference error")
    p.add_argument("--step", type=float, default=1e-6, help="central difference step (default: 1e-6)")
    p.add_argument("--out", default=None, help="output JSON path (default: stdout)")
    p.set_defaults(func=cmd_loss)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    args.argv = argv
    try:
        if args.command == "masks":
            if args.gt and not args.out_dir:
                parser.error("masks --gt requires --out-dir")
            if args.from_dir and not args.out:
                parser.error("masks --from-dir requires --out")
        return args.func(args)
    except _ValidationFailed as e:
        for issue in e.issues:
            _print_error(issue.code, issue.message, issue.record)
        return 1
    except ConfigError as e:
        _print_error("config", str(e))
        return 2
    except WarpError as e:
        _print_error("warp", str(e))
        return 1
    except DataError as e:
        _print_error("data", str(e))
        return 1
    except FileNotFoundError as e:
        _print_error("missing-file", str(e))
        return 1
    except SystemExit as e:  # parser.error inside command dispatch
        return int(e.code or 0)


if __name__ == "__main__":
    sys.exit(main())
