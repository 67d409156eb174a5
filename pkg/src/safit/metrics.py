"""Pairwise affinity measures between a predicted and a ground-truth box.

All arithmetic is 64-bit.  ``iou``, ``nwd``, ``safit`` and ``safit_s`` take
values in [0, 1]; the generalized-IoU family (``giou``, ``diou``, ``ciou``)
and ``safit_g`` take values in [-1, 1].  Every measure equals 1 exactly when
the two boxes coincide.

The scale-adaptive measures blend overlap (IoU) with a normalized Wasserstein
similarity (NWD).  The blend weight is a logistic function of ground-truth
scale only, so the measure stays a fixed-weight combination while the
predicted box moves: at gt area C**2 both terms contribute equally, large
objects are scored (almost) purely by overlap and tiny ones (almost) purely
by center/extent distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .boxes import BBox
from .errors import ConfigError

MEASURE_IDS = ("iou", "giou", "diou", "ciou", "nwd", "safit", "safit_s", "safit_g")


@dataclass(frozen=True)
class SAFitParams:
    """Balance constant C for the scale-adaptive blend.

    The blend weight is sigmoid(sqrt(area_gt)/c - 1), so c is the ground-truth
    side length (in pixels, for a square) at which IoU and NWD contribute
    equally.  The same c normalizes the NWD term.
    """

    c: float = 32.0

    def __post_init__(self):
        if not (isinstance(self.c, (int, float)) and math.isfinite(self.c) and self.c > 0):
            raise ConfigError(f"balance constant c must be finite and > 0, got {self.c!r}")
        object.__setattr__(self, "c", float(self.c))


@dataclass(frozen=True)
class NwdParams:
    """Normalization constant K for the Wasserstein similarity exp(-W2/k)."""

    k: float = 32.0

    def __post_init__(self):
        if not (isinstance(self.k, (int, float)) and math.isfinite(self.k) and self.k > 0):
            raise ConfigError(f"normalization constant k must be finite and > 0, got {self.k!r}")
        object.__setattr__(self, "k", float(self.k))


def _inter_union(p: BBox, gt: BBox) -> tuple[float, float]:
    """Intersection and union with every extent re-derived from the corner
    floats.  Mixing corner-derived intersections with w*h areas loses the
    exact identities (iou(b, b) == 1, inter <= union) to rounding; this way
    both hold for every representable box."""
    x1, y1, x2, y2 = p.to_corners()
    gx1, gy1, gx2, gy2 = gt.to_corners()
    iw = min(x2, gx2) - max(x1, gx1)
    ih = min(y2, gy2) - max(y1, gy1)
    inter = iw * ih if (iw > 0 and ih > 0) else 0.0
    union = (x2 - x1) * (y2 - y1) + (gx2 - gx1) * (gy2 - gy1) - inter
    return inter, union


def iou(p: BBox, gt: BBox) -> float:
    """Intersection over union.  0 for disjoint boxes, 1 for identical ones."""
    inter, union = _inter_union(p, gt)
    return inter / union


def wasserstein_sq(p: BBox, gt: BBox) -> float:
    """Squared 2-Wasserstein distance between the boxes' Gaussian embeddings.

    Each box maps to a Gaussian with mean (cx, cy) and diagonal covariance
    (w/2, h/2); the squared distance is then the plain squared Euclidean
    distance between the 4-vectors (cx, cy, w/2, h/2).
    """
    return (
        (p.cx - gt.cx) ** 2
        + (p.cy - gt.cy) ** 2
        + ((p.w - gt.w) / 2) ** 2
        + ((p.h - gt.h) / 2) ** 2
    )


def nwd(p: BBox, gt: BBox, params: NwdParams = NwdParams()) -> float:
    """Normalized Wasserstein similarity exp(-sqrt(W2)/k), in (0, 1]."""
    return math.exp(-math.sqrt(wasserstein_sq(p, gt)) / params.k)


def blend_weight(gt: BBox, params: SAFitParams = SAFitParams()) -> float:
    """Logistic weight s on the overlap term; 1 - s goes to the NWD term.

    Depends on the ground-truth box only, never on the prediction: the
    measure must stay a fixed blend while a detector's output varies.
    Equals 0.5 exactly when area(gt) == c**2.
    """
    z = math.sqrt(gt.area()) / params.c - 1.0
    return 1.0 / (1.0 + math.exp(-z))


def safit(p: BBox, gt: BBox, params: SAFitParams = SAFitParams()) -> float:
    """Scale-adaptive fitness: s*IoU + (1-s)*NWD with K = c."""
    s = blend_weight(gt, params)
    return s * iou(p, gt) + (1.0 - s) * nwd(p, gt, NwdParams(params.c))


def safit_s(p: BBox, gt: BBox, params: SAFitParams = SAFitParams()) -> float:
    """Hard-switch variant: NWD below the scale threshold, IoU at or above it."""
    if math.sqrt(gt.area()) < params.c:
        return nwd(p, gt, NwdParams(params.c))
    return iou(p, gt)


def giou(p: BBox, gt: BBox) -> float:
    """Generalized IoU: IoU - (hull - union) / hull.  In [-1, 1]."""
    inter, union = _inter_union(p, gt)
    x1, y1, x2, y2 = p.to_corners()
    gx1, gy1, gx2, gy2 = gt.to_corners()
    hull = (max(x2, gx2) - min(x1, gx1)) * (max(y2, gy2) - min(y1, gy1))
    # hull >= union holds in real arithmetic; the clamp only swallows the
    # one-ulp negatives rounding can produce when the boxes coincide.
    return inter / union - max(hull - union, 0.0) / hull


def diou(p: BBox, gt: BBox) -> float:
    """Distance IoU: IoU - d2(centers) / diag2(hull)."""
    x1, y1, x2, y2 = p.to_corners()
    gx1, gy1, gx2, gy2 = gt.to_corners()
    cw = max(x2, gx2) - min(x1, gx1)
    ch = max(y2, gy2) - min(y1, gy1)
    rho2 = (p.cx - gt.cx) ** 2 + (p.cy - gt.cy) ** 2
    return iou(p, gt) - rho2 / (cw * cw + ch * ch)


def ciou(p: BBox, gt: BBox) -> float:
    """Complete IoU: DIoU minus an aspect-ratio consistency term alpha*v.

    Follows the published definition, which can drop below -1 for far-apart
    boxes with opposite aspect ratios (the distance and aspect penalties both
    approach 1); the infimum is -1.5.
    """
    g = math.atan(gt.w / gt.h) - math.atan(p.w / p.h)
    v = (4.0 / math.pi**2) * g * g
    if v == 0.0:
        return diou(p, gt)
    den = (1.0 - iou(p, gt)) + v
    return diou(p, gt) - v * v / den


def safit_g(p: BBox, gt: BBox, params: SAFitParams = SAFitParams()) -> float:
    """Scale-adaptive blend with GIoU substituted for the overlap term."""
    s = blend_weight(gt, params)
    return s * giou(p, gt) + (1.0 - s) * nwd(p, gt, NwdParams(params.c))


def resolve(measure: str, c: float = 32.0, k: float | None = None) -> Callable[[BBox, BBox], float]:
    """Bind a measure id and its parameters into a two-box callable.

    ``c`` feeds the scale-adaptive measures, ``k`` the plain NWD (defaults to
    ``c`` when omitted).  Unknown ids raise ConfigError.
    """
    if measure not in MEASURE_IDS:
        raise ConfigError(f"unknown measure {measure!r}, expected one of {', '.join(MEASURE_IDS)}")
    if measure == "iou":
        return iou
    if measure == "giou":
        return giou
    if measure == "diou":
        return diou
    if measure == "ciou":
        return ciou
    if measure == "nwd":
        params = NwdParams(k if k is not None else c)
        return lambda p, g: nwd(p, g, params)
    sp = SAFitParams(c)
    fn = {"safit": safit, "safit_s": safit_s, "safit_g": safit_g}[measure]
    return lambda p, g: fn(p, g, sp)


def pairwise(
    fn: Callable[[BBox, BBox], float], preds: Sequence[BBox], gts: Sequence[BBox]
) -> list[list[float]]:
    """Dense affinity table, row per prediction, column per ground truth."""
    return [[fn(p, g) for g in gts] for p in preds]
