"""Builders for the synthetic datasets and box pairs used across the suite."""

from __future__ import annotations

import json
import random

from safit import BBox, Detection, PredictionSet, parse_ground_truth, parse_predictions

IMG_W, IMG_H = 640, 512


def smooth_pair(p: BBox, gt: BBox, margin: float = 1e-3) -> bool:
    """No edge ties, no touching overlap, no coincident Gaussian embedding:
    everything the gradients flag as a kink, plus a safety margin so central
    differences stay on one branch."""
    x1, y1, x2, y2 = p.to_corners()
    gx1, gy1, gx2, gy2 = gt.to_corners()
    if min(abs(x1 - gx1), abs(x2 - gx2), abs(y1 - gy1), abs(y2 - gy2)) < margin:
        return False
    iw = min(x2, gx2) - max(x1, gx1)
    ih = min(y2, gy2) - max(y1, gy1)
    if abs(iw) < margin or abs(ih) < margin:
        return False
    d2 = (p.cx - gt.cx) ** 2 + (p.cy - gt.cy) ** 2 + ((p.w - gt.w) / 2) ** 2 + ((p.h - gt.h) / 2) ** 2
    return d2 > margin


def random_smooth_pair(rng: random.Random) -> tuple[BBox, BBox]:
    while True:
        gt = BBox(rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(2, 60), rng.uniform(2, 60))
        p = BBox(
            gt.cx + rng.uniform(-20, 20),
            gt.cy + rng.uniform(-20, 20),
            rng.uniform(2, 60),
            rng.uniform(2, 60),
        )
        if smooth_pair(p, gt):
            return p, gt


def gt_dict(annotations, images=None, categories=None, sequences=None, **extra) -> dict:
    if images is None:
        ids = sorted({a["image_id"] for a in annotations}) or [1]
        images = [
            {"id": i, "width": IMG_W, "height": IMG_H, "sequence_id": "s1", "frame_index": n}
            for n, i in enumerate(ids)
        ]
    if categories is None:
        cids = sorted({a["category_id"] for a in annotations}) or [1]
        categories = [{"id": c, "name": f"class{c}"} for c in cids]
    if sequences is None:
        sequences = [{"id": "s1", "scene": "urban", "light_vision": "high"}]
    return {
        "schema_version": "1",
        "images": images,
        "categories": categories,
        "sequences": sequences,
        "annotations": annotations,
        **extra,
    }


def write_json(path, obj) -> str:
    with open(path, "w") as f:
        json.dump(obj, f)
    return str(path)


def load_pair(gt_obj: dict, pred_records: list):
    """Parse a raw gt dict and prediction records into validated objects."""
    ds = parse_ground_truth(gt_obj)
    assert not ds.issues, ds.issues
    ps = parse_predictions(pred_records, images=ds.images, categories=ds.categories)
    assert not ps.issues, ps.issues
    return ds, ps


def random_micro_fixture(rng: random.Random, n_classes: int = 2):
    """A small random scene: <= 4 GT and <= 6 detections per image.

    Boxes stay clear of the image border so no loader clipping kicks in, and
    scores are raw floats so ordering ties cannot occur.
    """
    n_images = rng.randint(1, 3)
    annotations = []
    preds = []
    ann_id = 1
    for img in range(1, n_images + 1):
        for _ in range(rng.randint(0, 4)):
            w = rng.uniform(3, 120)
            h = rng.uniform(3, 120)
            cx = rng.uniform(w / 2 + 1, IMG_W - w / 2 - 1)
            cy = rng.uniform(h / 2 + 1, IMG_H - h / 2 - 1)
            cls = rng.randint(1, n_classes)
            annotations.append(
                {
                    "id": ann_id,
                    "image_id": img,
                    "category_id": cls,
                    "bbox": [cx - w / 2, cy - h / 2, w, h],
                    "ignore": rng.random() < 0.2,
                }
            )
            ann_id += 1
            if rng.random() < 0.8 and sum(p["image_id"] == img for p in preds) < 6:
                pw = max(2.0, w * rng.uniform(0.7, 1.4))
                ph = max(2.0, h * rng.uniform(0.7, 1.4))
                preds.append(
                    {
                        "image_id": img,
                        "category_id": cls,
                        "bbox": [
                            cx - pw / 2 + rng.uniform(-6, 6),
                            cy - ph / 2 + rng.uniform(-6, 6),
                            pw,
                            ph,
                        ],
                        "score": rng.random(),
                    }
                )
        for _ in range(rng.randint(0, 2)):
            if sum(p["image_id"] == img for p in preds) >= 6:
                break
            w = rng.uniform(3, 60)
            h = rng.uniform(3, 60)
            preds.append(
                {
                    "image_id": img,
                    "category_id": rng.randint(1, n_classes),
                    "bbox": [rng.uniform(1, 400), rng.uniform(1, 350), w, h],
                    "score": rng.random(),
                }
            )
    images = [
        {"id": i, "width": IMG_W, "height": IMG_H, "sequence_id": "s1", "frame_index": i}
        for i in range(1, n_images + 1)
    ]
    categories = [{"id": c, "name": f"class{c}"} for c in range(1, n_classes + 1)]
    return gt_dict(annotations, images=images, categories=categories), preds


def perfect_predictions(ds) -> list[Detection]:
    """One detection exactly on top of every non-ignored annotation."""
    out = []
    # descending distinct scores keep the greedy order unambiguous
    n = sum(1 for a in ds.annotations if not a.ignore)
    step = 0.5 / max(n, 1)
    i = 0
    for a in ds.annotations:
        if a.ignore:
            continue
        out.append(
            Detection(
                frame_id=a.frame_id,
                class_id=a.class_id,
                bbox=a.bbox,
                score=1.0 - i * step,
                modality=a.modality,
            )
        )
        i += 1
    return out
