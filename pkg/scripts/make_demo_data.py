"""Generate a small synthetic tracking dataset plus a noisy detector run.

Objects are linear tracks with sizes drawn across all five scale bins, so the
per-bin tables in the demo evaluation are populated.  The fake detector
jitters each ground-truth box by a fixed pixel sigma, which is exactly the
regime where overlap scores collapse on tiny boxes while center-distance
scores do not.
"""

import argparse
import json
import random
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from safit import parse_ground_truth, parse_predictions, save_ground_truth, save_predictions

IMG_W, IMG_H = 1280, 1024

# one nominal box size per scale bin: areas 36, 144, 576, 4096, 16384
SIZES = (6, 12, 24, 64, 128)

CLASSES = [(1, "pedestrian"), (2, "cyclist"), (3, "vehicle")]


def build_ground_truth(rng, n_sequences, n_frames, n_tracks):
    sequences = []
    images = []
    annotations = []
    img_id = 1
    ann_id = 1
    for s in range(n_sequences):
        sid = f"seq{s:02d}"
        light = "high" if s % 2 == 0 else "low"
        sequences.append({"id": sid, "scene": "urban", "light_vision": light})
        frame_ids = []
        for f in range(n_frames):
            images.append(
                {"id": img_id, "width": IMG_W, "height": IMG_H, "sequence_id": sid, "frame_index": f}
            )
            frame_ids.append(img_id)
            img_id += 1
        for t in range(n_tracks):
            size = SIZES[t % len(SIZES)]
            cat = CLASSES[t % len(CLASSES)][0]
            modality = "thermal" if light == "low" and t % 2 == 0 else "visible"
            x = rng.uniform(size, IMG_W - 2 * size)
            y = rng.uniform(size, IMG_H - 2 * size)
            vx = rng.uniform(-2, 2)
            vy = rng.uniform(-2, 2)
            for f, iid in enumerate(frame_ids):
                bx = min(max(x + vx * f, 0.0), IMG_W - size)
                by = min(max(y + vy * f, 0.0), IMG_H - size)
                annotations.append(
                    {
                        "id": ann_id,
                        "image_id": iid,
                        "category_id": cat,
                        "bbox": [round(bx, 2), round(by, 2), size, size],
                        "track_id": s * n_tracks + t,
                        "modality": modality,
                    }
                )
                ann_id += 1
    return {
        "schema_version": "1",
        "images": images,
        "categories": [{"id": c, "name": n} for c, n in CLASSES],
        "sequences": sequences,
        "annotations": annotations,
    }


def fake_detector(rng, gt_obj, sigma, miss_rate, fp_rate):
    """Jitter every kept box by N(0, sigma) per coordinate; score falls off
    with the jitter magnitude so the PR sweep has something to rank."""
    detections = []
    for a in gt_obj["annotations"]:
        if rng.random() < miss_rate:
            continue
        x, y, w, h = a["bbox"]
        dx, dy = rng.gauss(0, sigma), rng.gauss(0, sigma)
        dw, dh = rng.gauss(0, sigma / 2), rng.gauss(0, sigma / 2)
        score = max(0.05, min(0.99, 0.95 - 0.08 * (abs(dx) + abs(dy)) / max(sigma, 1e-9) * 0.5 + rng.gauss(0, 0.03)))
        detections.append(
            {
                "image_id": a["image_id"],
                "category_id": a["category_id"],
                "bbox": [round(x + dx, 3), round(y + dy, 3), round(max(1.0, w + dw), 3), round(max(1.0, h + dh), 3)],
                "score": round(score, 4),
                "modality": a.get("modality", "visible"),
            }
        )
    n_fp = int(len(detections) * fp_rate)
    image_ids = [im["id"] for im in gt_obj["images"]]
    for _ in range(n_fp):
        size = rng.choice(SIZES)
        detections.append(
            {
                "image_id": rng.choice(image_ids),
                "category_id": rng.choice(CLASSES)[0],
                "bbox": [
                    round(rng.uniform(0, IMG_W - size), 3),
                    round(rng.uniform(0, IMG_H - size), 3),
                    size,
                    size,
                ],
                "score": round(rng.uniform(0.05, 0.6), 4),
            }
        )
    return detections


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="demo_data")
    ap.add_argument("--seed", default="demo", help="any string; feeds random.Random")
    ap.add_argument("--sequences", type=int, default=2)
    ap.add_argument("--frames", type=int, default=30)
    ap.add_argument("--tracks", type=int, default=10, help="tracks per sequence")
    ap.add_argument("--sigma", type=float, default=2.0, help="detector jitter in pixels")
    ap.add_argument("--miss-rate", type=float, default=0.08)
    ap.add_argument("--fp-rate", type=float, default=0.10)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    gt_obj = build_ground_truth(rng, args.sequences, args.frames, args.tracks)
    det_records = fake_detector(rng, gt_obj, args.sigma, args.miss_rate, args.fp_rate)

    # round-trip through the parsers so anything malformed fails here, not
    # in the consumer
    ds = parse_ground_truth(gt_obj)
    preds = parse_predictions(det_records, ds.images, ds.categories)
    fatal = [i for i in ds.issues + preds.issues]
    if fatal:
        for issue in fatal:
            print(json.dumps(issue.to_dict()), file=sys.stderr)
        raise SystemExit(1)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_ground_truth(ds, out / "gt.json")
    save_predictions(preds, out / "pred.json")
    print(
        json.dumps(
            {
                "out_dir": str(out),
                "images": len(ds.images),
                "annotations": len(ds.annotations),
                "detections": len(preds.detections),
            }
        )
    )


if __name__ == "__main__":
    main()
