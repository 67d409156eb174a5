"""Evaluate one detector run under several affinity measures side by side.

Prints an aligned table of overall and per-scale-bin AP/AR for each measure
and writes the full reports as JSON.  The interesting column is the tiny end
of the scale axis: overlap-based measures crater there under pixel-level
jitter, the size-adaptive blend does not.
"""

import argparse
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from safit import EvalConfig, MEASURE_IDS, evaluate, load_ground_truth, load_predictions


def fmt(v):
    return "   --" if v is None else f"{v:.3f}"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--gt", default="demo_data/gt.json")
    ap.add_argument("--pred", default="demo_data/pred.json")
    ap.add_argument("--measures", default="iou,safit", help=f"comma list from {','.join(MEASURE_IDS)}")
    ap.add_argument("--c", type=float, default=32.0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out-dir", default=None, help="also write report_<measure>.json files here")
    args = ap.parse_args()

    measures = [m.strip() for m in args.measures.split(",") if m.strip()]
    bad = [m for m in measures if m not in MEASURE_IDS]
    if bad:
        ap.error(f"unknown measure(s): {', '.join(bad)}")

    ds = load_ground_truth(args.gt)
    preds = load_predictions(args.pred, ds.images, ds.categories)
    issues = ds.issues + preds.issues
    if issues:
        for issue in issues:
            print(json.dumps(issue.to_dict()), file=sys.stderr)
        raise SystemExit(1)

    reports = {}
    for m in measures:
        reports[m] = evaluate(ds, preds, EvalConfig(measure=m, c=args.c, workers=args.workers))

    first = reports[measures[0]]
    bin_keys = [k for k in first.metric_keys() if k.startswith("AP_")]

    width = max(len(m) for m in measures) + 2
    print(f"{'':16}" + "".join(f"{m:>{width}}" for m in measures))
    for key in ("AP", "AP50", "AP75", "AR"):
        print(f"{key:16}" + "".join(f"{fmt(reports[m].overall[key]):>{width}}" for m in measures))
    print()
    print("AP by scale bin")
    for key in bin_keys:
        vals = "".join(f"{fmt(reports[m].overall.get(key)):>{width}}" for m in measures)
        print(f"{key[3:]:16}" + vals)

    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for m, rep in reports.items():
            path = out / f"report_{m}.json"
            path.write_text(json.dumps(rep.to_json_dict(), indent=2, sort_keys=True) + "\n")
        print(f"\nwrote {len(reports)} report(s) to {out}")


if __name__ == "__main__":
    main()
