"""Dataset model: schema types, taxonomy bins, loaders and track utilities.

Files are COCO-style JSON with a few extra fields (sequences table, track ids,
modality, ignore regions, interpolation flags).  Plain COCO files load fine;
the extensions default.  Record-level problems are collected as machine
readable issues on the returned object instead of raising, so a caller can
report all of them at once; structural breakage (not a JSON object, missing
top-level tables) raises :class:`DataError`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .boxes import BBox
from .errors import ConfigError, DataError, WarpError

MODALITIES = ("visible", "thermal")
LIGHT_LEVELS = ("high", "medium", "low", "invisible")

# object scale taxonomy over box area in px^2, left-closed [lo, hi).
# the first bin absorbs everything below 64 so the bins partition (0, inf).
SCALE_BINS = (
    ("extremely_tiny", 0.0, 64.0),
    ("tiny", 64.0, 256.0),
    ("small", 256.0, 1024.0),
    ("medium", 1024.0, 9216.0),
    ("large", 9216.0, math.inf),
)
SCALE_BIN_NAMES = tuple(name for name, _, _ in SCALE_BINS)

# sequence density (mean annotations per frame), left-closed [lo, hi)
DENSITY_BINS = (
    ("sparse", 0.0, 10.0),
    ("medium", 10.0, 50.0),
    ("dense", 50.0, math.inf),
)

# box overhang beyond the image that is clipped without comment; anything
# larger is clipped too but recorded as a validation issue
CLIP_TOLERANCE = 0.5


def scale_bin_of_area(area: float) -> str:
    if not area > 0:
        raise ConfigError(f"area must be > 0, got {area!r}")
    for name, lo, hi in SCALE_BINS:
        if lo <= area < hi:
            return name
    raise AssertionError("unreachable: bins partition (0, inf)")


def scale_level(box: BBox) -> str:
    """Taxonomy bin for a box, keyed on its pixel area."""
    return scale_bin_of_area(box.area())


def density_level(density: float) -> str:
    """Taxonomy bin for a sequence's mean annotations per frame."""
    if not (isinstance(density, (int, float)) and math.isfinite(density) and density >= 0):
        raise ConfigError(f"density must be finite and >= 0, got {density!r}")
    for name, lo, hi in DENSITY_BINS:
        if lo <= density < hi:
            return name
    raise AssertionError("unreachable")


@dataclass
class ValidationIssue:
    code: str
    message: str
    record: dict

    def to_dict(self) -> dict:
        return {"error": self.code, "message": self.message, "record": self.record}


@dataclass
class ImageInfo:
    id: int
    width: int
    height: int
    sequence_id: str = "default"
    frame_index: int | None = None


@dataclass
class SequenceMeta:
    sequence_id: str
    scene: str = "unknown"
    light_vision: str | None = None  # one of LIGHT_LEVELS when known
    fps: float | None = None


@dataclass
class Annotation:
    """Ground-truth box.  ``frame_id`` is the image id it belongs to."""

    frame_id: int
    class_id: int
    bbox: BBox
    track_id: int | None = None
    modality: str = "visible"
    ignore: bool = False
    interpolated: bool = False
    occlusion: str | None = None
    id: int | None = None
    # xywh exactly as read from the file (post-clip); keeps serialization
    # byte-stable instead of re-deriving top-left form from the center form
    bbox_xywh: tuple[float, float, float, float] | None = None

    def xywh(self) -> tuple[float, float, float, float]:
        return self.bbox_xywh if self.bbox_xywh is not None else self.bbox.to_xywh()


@dataclass
class Detection:
    """Predicted box with confidence."""

    frame_id: int
    class_id: int
    bbox: BBox
    score: float
    modality: str = "visible"
    id: int | None = None
    bbox_xywh: tuple[float, float, float, float] | None = None

    def xywh(self) -> tuple[float, float, float, float]:
        return self.bbox_xywh if self.bbox_xywh is not None else self.bbox.to_xywh()


@dataclass
class GroundTruthDataset:
    images: dict[int, ImageInfo]
    categories: dict[int, str]
    sequences: dict[str, SequenceMeta]
    annotations: list[Annotation]
    issues: list[ValidationIssue] = field(default_factory=list)
    schema_version: str = "1"

    def images_by_sequence(self) -> dict[str, list[ImageInfo]]:
        out: dict[str, list[ImageInfo]] = {}
        for img in self.images.values():
            out.setdefault(img.sequence_id, []).append(img)
        return out


@dataclass
class PredictionSet:
    detections: list[Detection]
    issues: list[ValidationIssue] = field(default_factory=list)
    schema_version: str = "1"


# ---------------------------------------------------------------------------
# homography


class Homography:
    """3x3 projective transform on pixel coordinates.

    Rejects effectively singular matrices at construction: |det| must exceed
    1e-12 * ||H||_F**3 (the determinant of a matrix with entries of magnitude
    ||H|| scales like ||H||**3, so the tolerance is scale-free).
    """

    def __init__(self, matrix):
        m = np.asarray(matrix, dtype=float)
        if m.shape != (3, 3):
            raise ConfigError(f"homography must be 3x3, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ConfigError("homography entries must be finite")
        norm = float(np.linalg.norm(m))
        if abs(float(np.linalg.det(m))) <= 1e-12 * norm**3:
            raise ConfigError("homography is singular within tolerance")
        self.matrix = m

    @classmethod
    def identity(cls) -> "Homography":
        return cls(np.eye(3))

    @classmethod
    def translation(cls, dx: float, dy: float) -> "Homography":
        return cls([[1.0, 0.0, dx], [0.0, 1.0, dy], [0.0, 0.0, 1.0]])

    @classmethod
    def scaling(cls, sx: float, sy: float | None = None) -> "Homography":
        sy = sx if sy is None else sy
        return cls([[sx, 0.0, 0.0], [0.0, sy, 0.0], [0.0, 0.0, 1.0]])

    def apply(self, x: float, y: float) -> tuple[float, float]:
        """Map one point; raises WarpError at or beyond the horizon line."""
        nx, ny, den = self.matrix @ (x, y, 1.0)
        if abs(den) <= 1e-12 * max(1.0, abs(nx), abs(ny)):
            raise WarpError(f"point ({x}, {y}) maps to the horizon (denominator {den})")
        return (nx / den, ny / den)

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.matrix))


def warp_bbox(
    h: Homography, box: BBox, clip_to: tuple[float, float] | None = None
) -> BBox | None:
    """Axis-aligned hull of the box's four warped corners.

    With ``clip_to = (width, height)`` the result is clipped to the image;
    returns None when nothing of the box survives clipping.
    """
    x1, y1, x2, y2 = box.to_corners()
    pts = [h.apply(x, y) for x in (x1, x2) for y in (y1, y2)]
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    nx1, ny1, nx2, ny2 = min(xs), min(ys), max(xs), max(ys)
    if clip_to is not None:
        w, hh = clip_to
        nx1, nx2 = max(nx1, 0.0), min(nx2, float(w))
        ny1, ny2 = max(ny1, 0.0), min(ny2, float(hh))
        if nx2 - nx1 <= 0 or ny2 - ny1 <= 0:
            return None
    return BBox.from_corners(nx1, ny1, nx2, ny2)


# ---------------------------------------------------------------------------
# track interpolation

MAX_INTERP_GAP = 5  # missing frames; longer occlusions stay unsolved


def interpolate_track(
    track: Sequence[Annotation], max_gap: int = MAX_INTERP_GAP
) -> tuple[list[Annotation], list[tuple[int, int]]]:
    """Fill short temporal gaps in one track by linear interpolation.

    ``frame_id`` is interpreted as the temporal frame number here (callers
    working with arbitrary image ids should renumber first, see
    :func:`interpolate_dataset`).  Gaps of 1..max_gap missing frames are
    filled by interpolating (cx, cy, w, h) linearly between the bracketing
    boxes; longer gaps are left open and reported as (start_frame, end_frame)
    pairs of the bracketing annotated frames.
    """
    if not track:
        return [], []
    ref = track[0]
    for a in track[1:]:
        if (a.track_id, a.class_id, a.modality) != (ref.track_id, ref.class_id, ref.modality):
            raise DataError(
                f"track mixes identities: ({a.track_id}, {a.class_id}, {a.modality!r}) vs "
                f"({ref.track_id}, {ref.class_id}, {ref.modality!r})"
            )
    frames = [a.frame_id for a in track]
    if any(b <= a for a, b in zip(frames, frames[1:])):
        raise DataError(f"track frames must be strictly increasing, got {frames}")

    out: list[Annotation] = [track[0]]
    open_gaps: list[tuple[int, int]] = []
    for prev, nxt in zip(track, track[1:]):
        missing = nxt.frame_id - prev.frame_id - 1
        if 1 <= missing <= max_gap:
            b0, b1 = prev.bbox, nxt.bbox
            span = nxt.frame_id - prev.frame_id
            for f in range(prev.frame_id + 1, nxt.frame_id):
                t = (f - prev.frame_id) / span
                box = BBox(
                    b0.cx + t * (b1.cx - b0.cx),
                    b0.cy + t * (b1.cy - b0.cy),
                    b0.w + t * (b1.w - b0.w),
                    b0.h + t * (b1.h - b0.h),
                )
                out.append(
                    Annotation(
                        frame_id=f,
                        class_id=ref.class_id,
                        bbox=box,
                        track_id=ref.track_id,
                        modality=ref.modality,
                        interpolated=True,
                    )
                )
        elif missing > max_gap:
            open_gaps.append((prev.frame_id, nxt.frame_id))
        out.append(nxt)
    return out, open_gaps


def interpolate_dataset(
    ds: GroundTruthDataset, max_gap: int = MAX_INTERP_GAP
) -> tuple[GroundTruthDataset, list[tuple[str, int, str, int, int]]]:
    """Interpolate every track in a dataset.

    Tracks are grouped by (sequence, track id, modality); temporal order
    comes from the images' frame_index (falling back to image id).  Filled
    boxes are attached to the image at the interpolated frame; gaps whose
    frames have no image, and gaps longer than ``max_gap``, are reported as
    (sequence_id, track_id, modality, start_frame, end_frame).
    """
    frame_of = {
        img.id: img.frame_index if img.frame_index is not None else img.id
        for img in ds.images.values()
    }
    image_at = {
        (img.sequence_id, frame_of[img.id]): img.id for img in ds.images.values()
    }

    groups: dict[tuple, list[Annotation]] = {}
    passthrough: list[Annotation] = []
    for a in ds.annotations:
        if a.track_id is None:
            passthrough.append(a)
        else:
            seq = ds.images[a.frame_id].sequence_id
            groups.setdefault((seq, a.track_id, a.modality), []).append(a)

    new_annotations = list(passthrough)
    open_gaps: list[tuple[str, int, str, int, int]] = []
    for (seq, track_id, modality), anns in sorted(
        groups.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2])
    ):
        anns = sorted(anns, key=lambda a: frame_of[a.frame_id])
        # run the core fill in frame-number space, then map back to image ids
        renumbered = [
            Annotation(
                frame_id=frame_of[a.frame_id],
                class_id=a.class_id,
                bbox=a.bbox,
                track_id=a.track_id,
                modality=a.modality,
                ignore=a.ignore,
                interpolated=a.interpolated,
                occlusion=a.occlusion,
                id=a.id,
                bbox_xywh=a.bbox_xywh,
            )
            for a in anns
        ]
        filled, gaps = interpolate_track(renumbered, max_gap=max_gap)
        open_gaps.extend((seq, track_id, modality, lo, hi) for lo, hi in gaps)
        by_frame = {frame_of[a.frame_id]: a for a in anns}
        for a in filled:
            if a.frame_id in by_frame:
                new_annotations.append(by_frame[a.frame_id])
            elif (seq, a.frame_id) in image_at:
                new_annotations.append(
                    Annotation(
                        frame_id=image_at[(seq, a.frame_id)],
                        class_id=a.class_id,
                        bbox=a.bbox,
                        track_id=a.track_id,
                        modality=a.modality,
                        interpolated=True,
                    )
                )
            else:
                open_gaps.append((seq, track_id, modality, a.frame_id, a.frame_id))
    return (
        GroundTruthDataset(
            images=dict(ds.images),
            categories=dict(ds.categories),
            sequences=dict(ds.sequences),
            annotations=new_annotations,
            issues=[],
            schema_version=ds.schema_version,
        ),
        open_gaps,
    )


# ---------------------------------------------------------------------------
# loaders / savers


def _as_number(value) -> float | None:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return None
    if not math.isfinite(value):
        return None
    return float(value)


def _parse_bbox(raw) -> tuple[float, float, float, float] | None:
    if not isinstance(raw, (list, tuple)) or len(raw) != 4:
        return None
    vals = [_as_number(v) for v in raw]
    if any(v is None for v in vals):
        return None
    return tuple(vals)  # type: ignore[return-value]


def _clip_xywh(
    xywh: tuple[float, float, float, float], width: float, height: float
) -> tuple[tuple[float, float, float, float] | None, float]:
    """Clip a top-left box to [0, width] x [0, height].

    Returns (clipped box or None if nothing remains, worst overhang in px).
    """
    x, y, w, h = xywh
    overhang = max(0.0, -x, -y, (x + w) - width, (y + h) - height)
    if overhang == 0.0:
        # leave in-bounds boxes untouched; recomputing w from corners would
        # perturb the raw floats and break byte-stable round-trips
        return xywh, 0.0
    x1, y1 = max(x, 0.0), max(y, 0.0)
    x2, y2 = min(x + w, width), min(y + h, height)
    if x2 - x1 <= 0 or y2 - y1 <= 0:
        return None, overhang
    return (x1, y1, x2 - x1, y2 - y1), overhang


def parse_ground_truth(obj: dict) -> GroundTruthDataset:
    if not isinstance(obj, dict):
        raise DataError("ground-truth file must contain a JSON object")
    for key in ("images", "annotations", "categories"):
        if not isinstance(obj.get(key), list):
            raise DataError(f"ground-truth file missing list field {key!r}")

    issues: list[ValidationIssue] = []

    images: dict[int, ImageInfo] = {}
    for i, rec in enumerate(obj["images"]):
        rid = rec.get("id") if isinstance(rec, dict) else None
        w = rec.get("width") if isinstance(rec, dict) else None
        h = rec.get("height") if isinstance(rec, dict) else None
        if not isinstance(rid, int) or not isinstance(w, (int, float)) or not isinstance(h, (int, float)) or w <= 0 or h <= 0:
            issues.append(ValidationIssue("image", "image needs integer id and positive width/height", {"index": i}))
            continue
        if rid in images:
            issues.append(ValidationIssue("duplicate-image", f"image id {rid} seen twice", {"image_id": rid}))
            continue
        images[rid] = ImageInfo(
            id=rid,
            width=int(w),
            height=int(h),
            sequence_id=str(rec.get("sequence_id", "default")),
            frame_index=rec.get("frame_index") if isinstance(rec.get("frame_index"), int) else None,
        )

    categories: dict[int, str] = {}
    for i, rec in enumerate(obj["categories"]):
        rid = rec.get("id") if isinstance(rec, dict) else None
        if not isinstance(rid, int):
            issues.append(ValidationIssue("category", "category needs an integer id", {"index": i}))
            continue
        if rid in categories:
            issues.append(ValidationIssue("duplicate-category", f"category id {rid} seen twice", {"category_id": rid}))
            continue
        categories[rid] = str(rec.get("name", rid))

    sequences: dict[str, SequenceMeta] = {}
    for i, rec in enumerate(obj.get("sequences", []) or []):
        sid = str(rec.get("id")) if isinstance(rec, dict) and rec.get("id") is not None else None
        if sid is None:
            issues.append(ValidationIssue("sequence", "sequence needs an id", {"index": i}))
            continue
        light = rec.get("light_vision")
        if light is not None and light not in LIGHT_LEVELS:
            issues.append(
                ValidationIssue("light-vision", f"unknown light_vision {light!r} on sequence {sid}", {"sequence_id": sid})
            )
            light = None
        fps = _as_number(rec.get("fps")) if rec.get("fps") is not None else None
        sequences[sid] = SequenceMeta(sequence_id=sid, scene=str(rec.get("scene", "unknown")), light_vision=light, fps=fps)
    # images may reference sequences the table does not list (plain COCO)
    for img in images.values():
        sequences.setdefault(img.sequence_id, SequenceMeta(sequence_id=img.sequence_id))

    annotations: list[Annotation] = []
    seen_tracks: set[tuple[int, int, str]] = set()
    for i, rec in enumerate(obj["annotations"]):
        if not isinstance(rec, dict):
            issues.append(ValidationIssue("annotation", "annotation must be an object", {"index": i}))
            continue
        ident = {"index": i, **({"id": rec["id"]} if isinstance(rec.get("id"), int) else {})}
        img_id = rec.get("image_id")
        if img_id not in images:
            issues.append(ValidationIssue("unknown-image", f"annotation references missing image {img_id!r}", ident))
            continue
        cat_id = rec.get("category_id")
        if cat_id not in categories:
            issues.append(ValidationIssue("unknown-category", f"annotation references missing category {cat_id!r}", ident))
            continue
        xywh = _parse_bbox(rec.get("bbox"))
        if xywh is None or xywh[2] <= 0 or xywh[3] <= 0:
            issues.append(ValidationIssue("bbox-extent", f"bbox must be 4 finite numbers with positive extent, got {rec.get('bbox')!r}", ident))
            continue
        img = images[img_id]
        clipped, overhang = _clip_xywh(xywh, img.width, img.height)
        if clipped is None:
            issues.append(ValidationIssue("bbox-degenerate", f"bbox {xywh} lies outside image {img_id}", ident))
            continue
        if overhang > CLIP_TOLERANCE:
            issues.append(
                ValidationIssue("bbox-bounds", f"bbox {xywh} exceeds image {img_id} by {overhang:.3g} px (clipped)", ident)
            )
        modality = str(rec.get("modality", "visible"))
        if modality not in MODALITIES:
            issues.append(ValidationIssue("modality", f"unknown modality {modality!r}", ident))
        track_id = rec.get("track_id") if isinstance(rec.get("track_id"), int) else None
        if track_id is not None:
            key = (img_id, track_id, modality)
            if key in seen_tracks:
                issues.append(
                    ValidationIssue("duplicate-track", f"track {track_id} appears twice on image {img_id} ({modality})", ident)
                )
                continue
            seen_tracks.add(key)
        annotations.append(
            Annotation(
                frame_id=img_id,
                class_id=cat_id,
                bbox=BBox.from_xywh(*clipped),
                track_id=track_id,
                modality=modality,
                ignore=bool(rec.get("ignore", rec.get("iscrowd", False))),
                interpolated=bool(rec.get("interpolated", False)),
                occlusion=str(rec["occlusion"]) if rec.get("occlusion") is not None else None,
                id=rec.get("id") if isinstance(rec.get("id"), int) else None,
                bbox_xywh=clipped,
            )
        )

    return GroundTruthDataset(
        images=images,
        categories=categories,
        sequences=sequences,
        annotations=annotations,
        issues=issues,
        schema_version=str(obj.get("schema_version", "1")),
    )


def load_ground_truth(path: str | Path) -> GroundTruthDataset:
    try:
        with open(path) as f:
            obj = json.load(f)
    except json.JSONDecodeError as e:
        raise DataError(f"{path} is not valid JSON: {e}") from e
    return parse_ground_truth(obj)


def parse_predictions(
    obj,
    images: Mapping[int, ImageInfo] | None = None,
    categories: Mapping[int, str] | None = None,
) -> PredictionSet:
    if isinstance(obj, dict):
        records = obj.get("predictions")
        version = str(obj.get("schema_version", "1"))
        if not isinstance(records, list):
            raise DataError("prediction file must contain a 'predictions' list (or be a bare list)")
    elif isinstance(obj, list):
        records, version = obj, "1"
    else:
        raise DataError("prediction file must contain a JSON object or list")

    issues: list[ValidationIssue] = []
    detections: list[Detection] = []
    for i, rec in enumerate(records):
        if not isinstance(rec, dict):
            issues.append(ValidationIssue("prediction", "prediction must be an object", {"index": i}))
            continue
        ident = {"index": i}
        img_id = rec.get("image_id")
        if not isinstance(img_id, int):
            issues.append(ValidationIssue("unknown-image", f"prediction needs an integer image_id, got {img_id!r}", ident))
            continue
        if images is not None and img_id not in images:
            issues.append(ValidationIssue("unknown-image", f"prediction references missing image {img_id}", ident))
            continue
        cat_id = rec.get("category_id")
        if not isinstance(cat_id, int) or (categories is not None and cat_id not in categories):
            issues.append(ValidationIssue("unknown-category", f"prediction references missing category {cat_id!r}", ident))
            continue
        xywh = _parse_bbox(rec.get("bbox"))
        if xywh is None or xywh[2] <= 0 or xywh[3] <= 0:
            issues.append(ValidationIssue("bbox-extent", f"bbox must be 4 finite numbers with positive extent, got {rec.get('bbox')!r}", ident))
            continue
        score = _as_number(rec.get("score"))
        if score is None or not 0.0 <= score <= 1.0:
            issues.append(ValidationIssue("score-range", f"score must lie in [0, 1], got {rec.get('score')!r}", ident))
            continue
        modality = str(rec.get("modality", "visible"))
        if modality not in MODALITIES:
            issues.append(ValidationIssue("modality", f"unknown modality {modality!r}", ident))
        detections.append(
            Detection(
                frame_id=img_id,
                class_id=cat_id,
                bbox=BBox.from_xywh(*xywh),
                score=score,
                modality=modality,
                id=rec.get("id") if isinstance(rec.get("id"), int) else None,
                bbox_xywh=xywh,
            )
        )
    return PredictionSet(detections=detections, issues=issues, schema_version=version)


def load_predictions(
    path: str | Path,
    images: Mapping[int, ImageInfo] | None = None,
    categories: Mapping[int, str] | None = None,
) -> PredictionSet:
    try:
        with open(path) as f:
            obj = json.load(f)
    except json.JSONDecodeError as e:
        raise DataError(f"{path} is not valid JSON: {e}") from e
    return parse_predictions(obj, images=images, categories=categories)


def ground_truth_to_dict(ds: GroundTruthDataset) -> dict:
    def ann_rec(a: Annotation) -> dict:
        rec = {
            "image_id": a.frame_id,
            "category_id": a.class_id,
            "bbox": list(a.xywh()),
            "modality": a.modality,
            "ignore": a.ignore,
            "interpolated": a.interpolated,
        }
        if a.id is not None:
            rec["id"] = a.id
        if a.track_id is not None:
            rec["track_id"] = a.track_id
        if a.occlusion is not None:
            rec["occlusion"] = a.occlusion
        return rec

    def img_rec(im: ImageInfo) -> dict:
        rec = {"id": im.id, "width": im.width, "height": im.height, "sequence_id": im.sequence_id}
        if im.frame_index is not None:
            rec["frame_index"] = im.frame_index
        return rec

    def seq_rec(s: SequenceMeta) -> dict:
        rec: dict = {"id": s.sequence_id, "scene": s.scene}
        if s.light_vision is not None:
            rec["light_vision"] = s.light_vision
        if s.fps is not None:
            rec["fps"] = s.fps
        return rec

    return {
        "schema_version": ds.schema_version,
        "images": [img_rec(im) for im in sorted(ds.images.values(), key=lambda im: im.id)],
        "categories": [
            {"id": cid, "name": name} for cid, name in sorted(ds.categories.items())
        ],
        "sequences": [seq_rec(s) for _, s in sorted(ds.sequences.items())],
        "annotations": [ann_rec(a) for a in ds.annotations],
    }


def predictions_to_dict(preds: PredictionSet | Iterable[Detection]) -> dict:
    dets = preds.detections if isinstance(preds, PredictionSet) else list(preds)
    records = []
    for d in dets:
        rec = {
            "image_id": d.frame_id,
            "category_id": d.class_id,
            "bbox": list(d.xywh()),
            "score": d.score,
            "modality": d.modality,
        }
        if d.id is not None:
            rec["id"] = d.id
        records.append(rec)
    return {"schema_version": "1", "predictions": records}


def _dump_json(obj: dict, path: str | Path) -> None:
    with open(path, "w") as f:
        json.dump(obj, f, sort_keys=True, separators=(",", ":"))
        f.write("\n")


def save_ground_truth(ds: GroundTruthDataset, path: str | Path) -> None:
    _dump_json(ground_truth_to_dict(ds), path)


def save_predictions(preds: PredictionSet | Iterable[Detection], path: str | Path) -> None:
    _dump_json(predictions_to_dict(preds), path)


# ---------------------------------------------------------------------------
# summary statistics


@dataclass
class StatsReport:
    totals: dict
    per_sequence: dict[str, dict]
    scale_histogram: dict[str, dict[str, int]]
    light_vision: dict[str, dict]

    def to_json_dict(self) -> dict:
        return {
            "totals": self.totals,
            "per_sequence": self.per_sequence,
            "scale_histogram": self.scale_histogram,
            "light_vision": self.light_vision,
        }

    def to_csv_rows(self) -> list[tuple]:
        rows: list[tuple] = [("table", "key", "field", "value")]
        for k in sorted(self.totals):
            rows.append(("totals", k, "", self.totals[k]))
        for seq in sorted(self.per_sequence):
            for f in ("frames", "annotations", "density", "density_level", "light_vision"):
                rows.append(("sequence", seq, f, self.per_sequence[seq][f]))
        for cls in sorted(self.scale_histogram):
            for bin_name in SCALE_BIN_NAMES:
                rows.append(("scale_histogram", cls, bin_name, self.scale_histogram[cls][bin_name]))
        for level in sorted(self.light_vision):
            for f in ("sequences", "annotations"):
                rows.append(("light_vision", level, f, self.light_vision[level][f]))
        return rows


def dataset_stats(ds: GroundTruthDataset, modality: str | None = None) -> StatsReport:
    """Per-sequence densities, per-class scale histograms, light-vision tallies.

    With paired-modality annotations sharing image records, pass ``modality``
    to tally one stream; the default pools everything and counts each image
    once when computing densities.
    """
    anns = [a for a in ds.annotations if modality is None or a.modality == modality]
    by_seq_images = ds.images_by_sequence()

    per_sequence: dict[str, dict] = {}
    seq_ann_count: dict[str, int] = {s: 0 for s in ds.sequences}
    for a in anns:
        seq_ann_count[ds.images[a.frame_id].sequence_id] += 1
    for sid, meta in sorted(ds.sequences.items()):
        frames = len(by_seq_images.get(sid, []))
        count = seq_ann_count.get(sid, 0)
        density = count / frames if frames else 0.0
        per_sequence[sid] = {
            "frames": frames,
            "annotations": count,
            "density": density,
            "density_level": density_level(density),
            "light_vision": meta.light_vision,
        }

    scale_histogram: dict[str, dict[str, int]] = {}
    for cid in sorted(ds.categories):
        scale_histogram[ds.categories[cid]] = {name: 0 for name in SCALE_BIN_NAMES}
    for a in anns:
        scale_histogram[ds.categories[a.class_id]][scale_level(a.bbox)] += 1

    light: dict[str, dict] = {}
    for sid, meta in ds.sequences.items():
        level = meta.light_vision if meta.light_vision is not None else "unknown"
        entry = light.setdefault(level, {"sequences": 0, "annotations": 0})
        entry["sequences"] += 1
        entry["annotations"] += seq_ann_count.get(sid, 0)

    totals = {
        "images": len(ds.images),
        "annotations": len(anns),
        "sequences": len(ds.sequences),
        "categories": len(ds.categories),
    }
    return StatsReport(
        totals=totals,
        per_sequence=per_sequence,
        scale_histogram=scale_histogram,
        light_vision=light,
    )
