"""Detection evaluation over pluggable affinity measures.

The protocol follows the familiar challenge recipe: greedy score-ordered
matching per image and class at a sweep of affinity thresholds, 101-point
interpolated precision, scale-binned breakdowns, ignore regions, and a cap on
detections per image and class.  Any measure from :mod:`safit.metrics` can
stand in for the usual overlap threshold, which is the whole point: with a
scale-adaptive measure the same protocol stops erasing sub-16px objects.

Matching never crosses modalities.  Light-vision conditioning is sequence
level: a per-level table re-runs the core on the subset of images whose
sequence carries that label.

Everything is deterministic: units are processed in sorted order, ties break
by input order, and worker parallelism only maps the same pure computation
over units, so reports are identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .boxes import BBox
from .data import LIGHT_LEVELS, MODALITIES, SCALE_BINS, Detection, GroundTruthDataset, PredictionSet
from .errors import ConfigError, DataError
from .metrics import MEASURE_IDS, NwdParams, SAFitParams, resolve

DEFAULT_THRESHOLDS = (0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95)


def _check_bins(bins) -> tuple[tuple[str, float, float], ...]:
    out = tuple((str(n), float(lo), float(hi)) for n, lo, hi in bins)
    if not out:
        raise ConfigError("scale_bins must not be empty")
    names = [n for n, _, _ in out]
    if len(set(names)) != len(names) or "all" in names or "" in names:
        raise ConfigError(f"scale bin names must be unique, non-empty and not 'all', got {names}")
    if out[0][1] != 0.0:
        raise ConfigError("first scale bin must start at area 0")
    if not math.isinf(out[-1][2]):
        raise ConfigError("last scale bin must extend to infinity")
    for (_, _, hi), (_, lo, _) in zip(out, out[1:]):
        if hi != lo:
            raise ConfigError("scale bins must be contiguous")
    for n, lo, hi in out:
        if not lo < hi:
            raise ConfigError(f"scale bin {n!r} has empty range [{lo}, {hi})")
    return out


@dataclass(frozen=True)
class EvalConfig:
    """Protocol parameters.  Defaults reproduce the standard sweep."""

    measure: str = "safit"
    c: float = 32.0
    k: float | None = None
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    max_detections: int = 300
    recall_points: int = 101
    modality: str | None = None
    light_vision: str | None = None
    per_light_vision: bool = False
    scale_bins: tuple[tuple[str, float, float], ...] = SCALE_BINS
    workers: int = 1

    def __post_init__(self):
        if self.measure not in MEASURE_IDS:
            raise ConfigError(f"unknown measure {self.measure!r}, expected one of {', '.join(MEASURE_IDS)}")
        SAFitParams(self.c)
        if self.k is not None:
            NwdParams(self.k)
        ts = tuple(float(t) for t in self.thresholds)
        if not ts or any(not 0.0 < t <= 1.0 for t in ts):
            raise ConfigError(f"thresholds must lie in (0, 1], got {ts}")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ConfigError(f"thresholds must be strictly increasing, got {ts}")
        object.__setattr__(self, "thresholds", ts)
        if not (isinstance(self.max_detections, int) and self.max_detections >= 1):
            raise ConfigError(f"max_detections must be an integer >= 1, got {self.max_detections!r}")
        if not (isinstance(self.recall_points, int) and self.recall_points >= 2):
            raise ConfigError(f"recall_points must be an integer >= 2, got {self.recall_points!r}")
        if self.modality is not None and self.modality not in MODALITIES:
            raise ConfigError(f"modality must be one of {MODALITIES}, got {self.modality!r}")
        if self.light_vision is not None and self.light_vision not in LIGHT_LEVELS:
            raise ConfigError(f"light_vision must be one of {LIGHT_LEVELS}, got {self.light_vision!r}")
        object.__setattr__(self, "scale_bins", _check_bins(self.scale_bins))
        if not (isinstance(self.workers, int) and self.workers >= 1):
            raise ConfigError(f"workers must be an integer >= 1, got {self.workers!r}")

    def params_dict(self) -> dict:
        if self.measure in ("safit", "safit_s", "safit_g"):
            return {"c": self.c}
        if self.measure == "nwd":
            return {"k": self.k if self.k is not None else self.c}
        return {}

    def measure_fn(self) -> Callable[[BBox, BBox], float]:
        return resolve(self.measure, self.c, self.k)


@dataclass(frozen=True)
class Match:
    det_index: int
    gt_index: int | None
    affinity: float | None


def match(
    det_boxes: Sequence[BBox],
    gt_boxes: Sequence[BBox],
    measure_fn: Callable[[BBox, BBox], float],
    threshold: float,
    gt_ignore: Sequence[bool] | None = None,
    affinity: Sequence[Sequence[float]] | None = None,
) -> list[Match]:
    """Greedily assign detections (already in descending-score order) to GT.

    A pair qualifies when affinity >= threshold.  Each detection takes the
    best qualifying unmatched ground truth, preferring non-ignored ones over
    ignored ones regardless of affinity; affinity ties break toward the
    lowest ground-truth index.  One-to-one: a ground truth matches at most
    one detection.  ``affinity`` may pass a precomputed table to skip the
    measure calls.
    """
    if gt_ignore is None:
        gt_ignore = [False] * len(gt_boxes)
    if len(gt_ignore) != len(gt_boxes):
        raise ConfigError(f"gt_ignore has {len(gt_ignore)} entries for {len(gt_boxes)} boxes")
    if affinity is None:
        affinity = [[measure_fn(d, g) for g in gt_boxes] for d in det_boxes]
    taken = [False] * len(gt_boxes)
    out: list[Match] = []
    for di in range(len(det_boxes)):
        row = affinity[di]
        best = -1
        best_aff = -math.inf
        best_ignored = True
        for gi in range(len(gt_boxes)):
            if taken[gi] or row[gi] < threshold:
                continue
            ignored = bool(gt_ignore[gi])
            # a non-ignored candidate beats any ignored one outright
            if (not ignored and best_ignored) or (ignored == best_ignored and row[gi] > best_aff):
                best, best_aff, best_ignored = gi, row[gi], ignored
        if best < 0:
            out.append(Match(di, None, None))
        else:
            taken[best] = True
            out.append(Match(di, best, float(best_aff)))
    return out


@dataclass
class EvalReport:
    measure: str
    params: dict
    thresholds: tuple[float, ...]
    max_detections: int
    recall_points: int
    filters: dict
    counts: dict
    defined: bool
    overall: dict[str, float | None]
    per_class: dict[str, dict[str, float | None]]
    per_light_vision: dict[str, dict[str, float | None]] | None = None

    def to_json_dict(self) -> dict:
        out = {
            "schema_version": "1",
            "measure": self.measure,
            "params": self.params,
            "thresholds": list(self.thresholds),
            "max_detections": self.max_detections,
            "recall_points": self.recall_points,
            "filters": self.filters,
            "counts": self.counts,
            "defined": self.defined,
            "overall": self.overall,
            "per_class": self.per_class,
            "per_light_vision": self.per_light_vision,
        }
        return out

    def metric_keys(self) -> list[str]:
        keys = ["AP", "AP50", "AP75"]
        keys += [f"AP_{name}" for name in self._bin_names]
        keys.append("AR")
        return keys

    @property
    def _bin_names(self) -> list[str]:
        # overall carries one AP_<bin> key per configured bin
        return [k[3:] for k in self.overall if k.startswith("AP_")]

    def to_csv_rows(self) -> list[tuple]:
        rows: list[tuple] = [("measure", "class", "bin", "threshold", "metric", "value")]

        def emit(scope: str, metrics: Mapping[str, float | None]):
            for key in self.metric_keys():
                value = metrics.get(key)
                cell = "" if value is None else repr(value)
                if key == "AP50":
                    rows.append((self.measure, scope, "all", "0.5", "AP", cell))
                elif key == "AP75":
                    rows.append((self.measure, scope, "all", "0.75", "AP", cell))
                elif key.startswith("AP_"):
                    rows.append((self.measure, scope, key[3:], "mean", "AP", cell))
                else:
                    rows.append((self.measure, scope, "all", "mean", key, cell))

        emit("all", self.overall)
        for name in sorted(self.per_class):
            emit(name, self.per_class[name])
        return rows


def _mean(values: list[float]) -> float:
    return sum(values) / len(values)


def _ap_and_recall(
    entries: list[tuple[float, bool]], n_gt: int, recall_grid: np.ndarray
) -> tuple[float, float]:
    """Interpolated AP and final recall from pooled (score, is_tp) entries.

    Entries must already be in deterministic pooling order; they are re-sorted
    by descending score with that order breaking ties.
    """
    if n_gt <= 0:
        raise AssertionError("caller must skip cells without ground truth")
    if not entries:
        return 0.0, 0.0
    scores = np.array([s for s, _ in entries])
    tps = np.array([t for _, t in entries], dtype=float)
    order = np.argsort(-scores, kind="stable")
    tps = tps[order]
    tp_cum = np.cumsum(tps)
    fp_cum = np.cumsum(1.0 - tps)
    recalls = tp_cum / n_gt
    precisions = tp_cum / (tp_cum + fp_cum)
    # precision envelope: max precision at any recall >= r
    env = np.maximum.accumulate(precisions[::-1])[::-1]
    idx = np.searchsorted(recalls, recall_grid, side="left")
    sampled = np.where(idx < len(entries), env[np.minimum(idx, len(entries) - 1)], 0.0)
    return float(np.mean(sampled)), float(recalls[-1])


def _unit_result(
    det_rows: list[tuple[float, BBox]],
    gt_rows: list[tuple[bool, BBox]],
    measure_fn,
    thresholds: tuple[float, ...],
    bins: tuple[tuple[str, float, float], ...],
):
    """Evaluate one (image, modality, class) unit across all bins/thresholds.

    det_rows are (score, box) in descending-score order (already capped);
    gt_rows are (ignore, box).  Returns (entries[bin][t] -> list of (score,
    is_tp), n_gt[bin]), where bin 0 pools all areas and bin i >= 1 is
    bins[i-1].  Detections matched to an ignored GT, and unmatched detections
    whose own area falls outside the bin, contribute nothing.
    """
    det_boxes = [b for _, b in det_rows]
    gt_boxes = [b for _, b in gt_rows]
    affinity = [[measure_fn(d, g) for g in gt_boxes] for d in det_boxes]

    def in_bin(area: float, bi: int) -> bool:
        if bi == 0:
            return True
        _, lo, hi = bins[bi - 1]
        return lo <= area < hi

    n_bins = len(bins) + 1
    entries: list[list[list[tuple[float, bool]]]] = [
        [[] for _ in thresholds] for _ in range(n_bins)
    ]
    n_gt = [0] * n_bins
    for bi in range(n_bins):
        ignore = [
            ig or not in_bin(box.area(), bi) for ig, box in gt_rows
        ]
        n_gt[bi] = sum(1 for flag in ignore if not flag)
        for ti, t in enumerate(thresholds):
            for m in match(det_boxes, gt_boxes, measure_fn, t, ignore, affinity):
                score = det_rows[m.det_index][0]
                if m.gt_index is not None:
                    if not ignore[m.gt_index]:
                        entries[bi][ti].append((score, True))
                    # matched to ignored: dropped from scoring entirely
                elif in_bin(det_boxes[m.det_index].area(), bi):
                    entries[bi][ti].append((score, False))
    return entries, n_gt


def _core(
    gt: GroundTruthDataset,
    dets: list[tuple[int, Detection]],
    config: EvalConfig,
    image_ids: list[int],
) -> tuple[dict, dict, dict, bool]:
    """Run the full accumulation over one image subset.

    Returns (overall metrics, per-class metrics, counts, defined).
    """
    images = set(image_ids)
    anns = [a for a in gt.annotations if a.frame_id in images]
    dts = [(i, d) for i, d in dets if d.frame_id in images]
    if config.modality is not None:
        anns = [a for a in anns if a.modality == config.modality]
        dts = [(i, d) for i, d in dts if d.modality == config.modality]

    classes = sorted(gt.categories)
    modalities = (
        [config.modality]
        if config.modality is not None
        else sorted({a.modality for a in anns} | {d.modality for _, d in dts})
    )

    gt_by_unit: dict[tuple, list[tuple[bool, BBox]]] = {}
    for a in anns:
        gt_by_unit.setdefault((a.class_id, a.modality, a.frame_id), []).append(
            (a.ignore, a.bbox)
        )
    det_by_unit: dict[tuple, list[tuple[float, int, BBox]]] = {}
    for i, d in dts:
        det_by_unit.setdefault((d.class_id, d.modality, d.frame_id), []).append(
            (d.score, i, d.bbox)
        )

    units = []
    for ci in classes:
        for mod in modalities:
            for img in sorted(images):
                key = (ci, mod, img)
                g = gt_by_unit.get(key, [])
                d = det_by_unit.get(key, [])
                if g or d:
                    rows = sorted(d, key=lambda r: (-r[0], r[1]))[: config.max_detections]
                    units.append((ci, [(s, b) for s, _, b in rows], g))

    measure_fn = config.measure_fn()
    bins = config.scale_bins
    thresholds = config.thresholds

    def work(unit):
        _, det_rows, gt_rows = unit
        return _unit_result(det_rows, gt_rows, measure_fn, thresholds, bins)

    if config.workers == 1 or len(units) <= 1:
        results = [work(u) for u in units]
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(work, units))  # ordered: determinism

    n_bins = len(bins) + 1
    pooled: dict[tuple[int, int, int], list[tuple[float, bool]]] = {}
    n_gt: dict[tuple[int, int], int] = {}
    for (ci, _, _), (entries, counts) in zip(units, results):
        for bi in range(n_bins):
            n_gt[(ci, bi)] = n_gt.get((ci, bi), 0) + counts[bi]
            for ti in range(len(thresholds)):
                if entries[bi][ti]:
                    pooled.setdefault((ci, bi, ti), []).extend(entries[bi][ti])

    recall_grid = np.array([i / (config.recall_points - 1) for i in range(config.recall_points)])

    ap: dict[tuple[int, int, int], float] = {}
    rec: dict[tuple[int, int], float] = {}  # recall only reported for the all-areas bin
    for ci in classes:
        for bi in range(n_bins):
            if n_gt.get((ci, bi), 0) <= 0:
                continue
            for ti in range(len(thresholds)):
                a, r = _ap_and_recall(
                    pooled.get((ci, bi, ti), []), n_gt[(ci, bi)], recall_grid
                )
                ap[(ci, bi, ti)] = a
                if bi == 0:
                    rec[(ci, ti)] = r

    bin_names = [name for name, _, _ in bins]
    t_index = {t: i for i, t in enumerate(thresholds)}

    def class_metrics(ci: int) -> dict[str, float | None]:
        out: dict[str, float | None] = {}
        has_gt = n_gt.get((ci, 0), 0) > 0
        n_t = len(thresholds)
        out["AP"] = _mean([ap[(ci, 0, ti)] for ti in range(n_t)]) if has_gt else None
        for label, t in (("AP50", 0.5), ("AP75", 0.75)):
            ti = t_index.get(t)
            out[label] = ap[(ci, 0, ti)] if has_gt and ti is not None else None
        for bi, name in enumerate(bin_names, start=1):
            ok = n_gt.get((ci, bi), 0) > 0
            out[f"AP_{name}"] = _mean([ap[(ci, bi, ti)] for ti in range(n_t)]) if ok else None
        out["AR"] = _mean([rec[(ci, ti)] for ti in range(n_t)]) if has_gt else None
        return out

    per_class = {gt.categories[ci]: class_metrics(ci) for ci in classes}

    def pooled_mean(key: str) -> float | None:
        vals = [m[key] for m in per_class.values() if m[key] is not None]
        return _mean(vals) if vals else None

    metric_keys = ["AP", "AP50", "AP75"] + [f"AP_{n}" for n in bin_names] + ["AR"]
    overall = {key: pooled_mean(key) for key in metric_keys}

    defined = any(n_gt.get((ci, 0), 0) > 0 for ci in classes)
    counts = {
        "images": len(images),
        "annotations": len(anns),
        "detections": len(dts),
    }
    return overall, per_class, counts, defined


def evaluate(
    gt: GroundTruthDataset,
    predictions: PredictionSet | Sequence[Detection],
    config: EvalConfig = EvalConfig(),
) -> EvalReport:
    """Score predictions against ground truth under ``config``.

    Both inputs must be validated (no pending issues); detections must
    reference known images and categories.  An input with no usable ground
    truth yields a report with ``defined`` False and metrics None, not zeros.
    """
    dets = list(predictions.detections if isinstance(predictions, PredictionSet) else predictions)
    for d in dets:
        if d.frame_id not in gt.images:
            raise DataError(f"detection references unknown image {d.frame_id}")
        if d.class_id not in gt.categories:
            raise DataError(f"detection references unknown category {d.class_id}")

    indexed = list(enumerate(dets))
    image_ids = sorted(gt.images)
    if config.light_vision is not None:
        image_ids = [
            i
            for i in image_ids
            if gt.sequences[gt.images[i].sequence_id].light_vision == config.light_vision
        ]

    overall, per_class, counts, defined = _core(gt, indexed, config, image_ids)
    if not defined:
        overall = {k: None for k in overall}

    per_light: dict[str, dict[str, float | None]] | None = None
    if config.per_light_vision:
        per_light = {}
        for level in LIGHT_LEVELS:
            ids = [
                i
                for i in image_ids
                if gt.sequences[gt.images[i].sequence_id].light_vision == level
            ]
            if not ids:
                continue
            o, _, _, ok = _core(gt, indexed, config, ids)
            per_light[level] = o if ok else {k: None for k in o}

    return EvalReport(
        measure=config.measure,
        params=config.params_dict(),
        thresholds=config.thresholds,
        max_detections=config.max_detections,
        recall_points=config.recall_points,
        filters={"modality": config.modality, "light_vision": config.light_vision},
        counts=counts,
        defined=defined,
        overall=overall,
        per_class=per_class,
        per_light_vision=per_light,
    )


def deviation_curve(
    size: float,
    max_dev: int,
    measure: str,
    c: float = 32.0,
    k: float | None = None,
) -> list[tuple[int, float]]:
    """Measure value as a square gt of side ``size`` is missed diagonally.

    The predicted box is the gt translated by (+d, +d) for integer d in
    0..max_dev; returns the list of (d, value).  This is the standard probe
    for how fast a measure collapses at a given object scale.
    """
    if not (isinstance(size, (int, float)) and size > 0):
        raise ConfigError(f"size must be > 0, got {size!r}")
    if not (isinstance(max_dev, int) and max_dev >= 0):
        raise ConfigError(f"max_dev must be an integer >= 0, got {max_dev!r}")
    fn = resolve(measure, c, k)
    gt = BBox(size / 2, size / 2, size, size)
    return [(d, fn(gt.shifted(d, d), gt)) for d in range(max_dev + 1)]
