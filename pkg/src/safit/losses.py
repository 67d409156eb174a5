"""Regression losses 1 - measure with hand-derived analytic gradients.

Gradients are taken with respect to the predicted box (cx, cy, w, h); the
ground truth is a constant.  Min/max switches inside the measures (box edges,
hull edges) make some configurations nondifferentiable; at an exact tie we
return the one-sided subgradient of the branch in which the predicted edge is
the moving side and set ``nondifferentiable`` so callers (and ``fd_check``)
can tell the kink from a smooth point.

Derivative conventions, with p = (a, b, w, h):
    x1 = a - w/2   -> d/d(a, b, w, h) = (1, 0, -1/2, 0)
    x2 = a + w/2   -> (1, 0, +1/2, 0)
    y1, y2 analogous in (b, h).
Every measure below is assembled from these four edge differentials by the
chain rule, so each branch of each min/max carries its own exact gradient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .boxes import BBox
from .errors import ConfigError
from .metrics import MEASURE_IDS, NwdParams, SAFitParams, blend_weight, wasserstein_sq

_ZERO = (0.0, 0.0, 0.0, 0.0)
_DX1 = (1.0, 0.0, -0.5, 0.0)
_DX2 = (1.0, 0.0, 0.5, 0.0)
_DY1 = (0.0, 1.0, 0.0, -0.5)
_DY2 = (0.0, 1.0, 0.0, 0.5)


@dataclass(frozen=True)
class LossGrad:
    """Loss value with its gradient w.r.t. the predicted (cx, cy, w, h)."""

    value: float
    d_cx: float
    d_cy: float
    d_w: float
    d_h: float
    nondifferentiable: bool = False

    @property
    def gradient(self) -> tuple[float, float, float, float]:
        return (self.d_cx, self.d_cy, self.d_w, self.d_h)


def _comb(*terms):
    """Linear combination of 4-vectors: _comb((a, x), (b, y), ...) = a*x + b*y + ..."""
    out = [0.0, 0.0, 0.0, 0.0]
    for coef, vec in terms:
        for i in range(4):
            out[i] += coef * vec[i]
    return tuple(out)


class _Overlap(NamedTuple):
    iou: float
    d_iou: tuple
    union: float
    d_union: tuple
    nondiff: bool  # ties/touches that reach the intersection term
    edge_tie: bool  # any corner-coordinate equality (hull kinks live here too)


def _overlap(p: BBox, gt: BBox) -> _Overlap:
    x1, y1, x2, y2 = p.to_corners()
    gx1, gy1, gx2, gy2 = gt.to_corners()

    tie_x1, tie_x2 = x1 == gx1, x2 == gx2
    tie_y1, tie_y2 = y1 == gy1, y2 == gy2
    edge_tie = tie_x1 or tie_x2 or tie_y1 or tie_y2

    # intersection edges: max of lefts, min of rights; pred active on ties
    d_l = _DX1 if x1 >= gx1 else _ZERO
    d_r = _DX2 if x2 <= gx2 else _ZERO
    d_t = _DY1 if y1 >= gy1 else _ZERO
    d_b = _DY2 if y2 <= gy2 else _ZERO
    iw = min(x2, gx2) - max(x1, gx1)
    ih = min(y2, gy2) - max(y1, gy1)

    if iw < 0 or ih < 0:
        # strictly disjoint: intersection is identically 0 in a neighborhood
        inter, d_inter = 0.0, _ZERO
        nondiff = False
    else:
        d_iw = _comb((1.0, d_r), (-1.0, d_l))
        d_ih = _comb((1.0, d_b), (-1.0, d_t))
        inter = iw * ih
        d_inter = _comb((ih, d_iw), (iw, d_ih))
        nondiff = edge_tie or iw == 0 or ih == 0

    # union from the same corner floats as the intersection, matching the
    # measure's value path bit for bit (loss == 1 - measure must hold exactly)
    pw, ph = x2 - x1, y2 - y1
    union = pw * ph + (gx2 - gx1) * (gy2 - gy1) - inter
    d_union = _comb((1.0, (0.0, 0.0, ph, pw)), (-1.0, d_inter))
    val = inter / union
    d_val = _comb((1.0 / union, d_inter), (-inter / union**2, d_union))
    return _Overlap(val, d_val, union, d_union, nondiff, edge_tie)


def _hull(p: BBox, gt: BBox):
    """Hull extents (cw, ch) with gradients; pred active on ties."""
    x1, y1, x2, y2 = p.to_corners()
    gx1, gy1, gx2, gy2 = gt.to_corners()
    d_l = _DX1 if x1 <= gx1 else _ZERO
    d_r = _DX2 if x2 >= gx2 else _ZERO
    d_t = _DY1 if y1 <= gy1 else _ZERO
    d_b = _DY2 if y2 >= gy2 else _ZERO
    cw = max(x2, gx2) - min(x1, gx1)
    ch = max(y2, gy2) - min(y1, gy1)
    d_cw = _comb((1.0, d_r), (-1.0, d_l))
    d_ch = _comb((1.0, d_b), (-1.0, d_t))
    return cw, ch, d_cw, d_ch


def _iou_grad(p, gt):
    ov = _overlap(p, gt)
    return ov.iou, ov.d_iou, ov.nondiff


def _giou_grad(p, gt):
    ov = _overlap(p, gt)
    cw, ch, d_cw, d_ch = _hull(p, gt)
    hull = cw * ch
    d_hull = _comb((ch, d_cw), (cw, d_ch))
    # same clamped form as the measure so loss mirrors it exactly; the clamp
    # can only bind at ulp level where the subgradient below is still right
    val = ov.iou - max(hull - ov.union, 0.0) / hull
    d_val = _comb(
        (1.0, ov.d_iou), (1.0 / hull, ov.d_union), (-ov.union / hull**2, d_hull)
    )
    return val, d_val, ov.nondiff or ov.edge_tie


def _diou_grad(p, gt):
    ov = _overlap(p, gt)
    cw, ch, d_cw, d_ch = _hull(p, gt)
    rho2 = (p.cx - gt.cx) ** 2 + (p.cy - gt.cy) ** 2
    d_rho2 = (2.0 * (p.cx - gt.cx), 2.0 * (p.cy - gt.cy), 0.0, 0.0)
    c2 = cw * cw + ch * ch
    d_c2 = _comb((2.0 * cw, d_cw), (2.0 * ch, d_ch))
    val = ov.iou - rho2 / c2
    d_val = _comb((1.0, ov.d_iou), (-1.0 / c2, d_rho2), (rho2 / c2**2, d_c2))
    return val, d_val, ov.nondiff or ov.edge_tie


def _ciou_grad(p, gt):
    ov = _overlap(p, gt)
    dv_val, dv_grad, nondiff = _diou_grad(p, gt)
    g = math.atan(gt.w / gt.h) - math.atan(p.w / p.h)
    v = (4.0 / math.pi**2) * g * g
    if v == 0.0:
        return dv_val, dv_grad, nondiff
    q = 8.0 / math.pi**2 * g / (p.w**2 + p.h**2)
    d_v = (0.0, 0.0, -q * p.h, q * p.w)
    # alpha = v / ((1 - iou) + v) is differentiated through, not held constant
    den = (1.0 - ov.iou) + v
    d_den = _comb((-1.0, ov.d_iou), (1.0, d_v))
    term = v * v / den
    d_term = _comb((2.0 * v / den, d_v), (-v * v / den**2, d_den))
    val = dv_val - term
    d_val = _comb((1.0, dv_grad), (-1.0, d_term))
    return val, d_val, nondiff


def _nwd_grad(p, gt, k):
    s2 = wasserstein_sq(p, gt)
    if s2 == 0.0:
        return 1.0, _ZERO, False  # smooth minimum, gradient vanishes
    val = math.exp(-math.sqrt(s2) / k)
    d_s2 = (
        2.0 * (p.cx - gt.cx),
        2.0 * (p.cy - gt.cy),
        (p.w - gt.w) / 2.0,
        (p.h - gt.h) / 2.0,
    )
    d_val = _comb((-val / (2.0 * k * math.sqrt(s2)), d_s2))
    return val, d_val, False


def _safit_grad(p, gt, c):
    s = blend_weight(gt, SAFitParams(c))
    iv, ig, inf = _iou_grad(p, gt)
    nv, ng, _ = _nwd_grad(p, gt, c)
    return s * iv + (1.0 - s) * nv, _comb((s, ig), (1.0 - s, ng)), inf


def _safit_s_grad(p, gt, c):
    root = math.sqrt(gt.area())
    if root < c:
        return _nwd_grad(p, gt, c)
    val, grad, nondiff = _iou_grad(p, gt)
    # the hard scale switch itself is a discontinuity of the measure family,
    # so an exact hit on the boundary is reported as nondifferentiable
    return val, grad, nondiff or root == c


def _safit_g_grad(p, gt, c):
    s = blend_weight(gt, SAFitParams(c))
    gv, gg, gnf = _giou_grad(p, gt)
    nv, ng, _ = _nwd_grad(p, gt, c)
    return s * gv + (1.0 - s) * nv, _comb((s, gg), (1.0 - s, ng)), gnf


def _measure_grad(measure: str, p: BBox, gt: BBox, c: float, k: float | None):
    if measure == "iou":
        return _iou_grad(p, gt)
    if measure == "giou":
        return _giou_grad(p, gt)
    if measure == "diou":
        return _diou_grad(p, gt)
    if measure == "ciou":
        return _ciou_grad(p, gt)
    if measure == "nwd":
        return _nwd_grad(p, gt, NwdParams(k if k is not None else c).k)
    if measure == "safit":
        return _safit_grad(p, gt, SAFitParams(c).c)
    if measure == "safit_s":
        return _safit_s_grad(p, gt, SAFitParams(c).c)
    if measure == "safit_g":
        return _safit_g_grad(p, gt, SAFitParams(c).c)
    raise ConfigError(f"unknown measure {measure!r}, expected one of {', '.join(MEASURE_IDS)}")


def loss(measure: str, p: BBox, gt: BBox, c: float = 32.0, k: float | None = None) -> LossGrad:
    """Evaluate 1 - measure(p, gt) and its gradient w.r.t. p.

    ``c`` parameterizes the scale-adaptive measures, ``k`` the plain NWD
    (falling back to ``c`` when omitted); both are ignored by the pure
    overlap measures.
    """
    val, grad, nondiff = _measure_grad(measure, p, gt, c, k)
    return LossGrad(1.0 - val, -grad[0], -grad[1], -grad[2], -grad[3], nondiff)


def fd_check(
    measure: str,
    p: BBox,
    gt: BBox,
    c: float = 32.0,
    k: float | None = None,
    step: float = 1e-6,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Relative error per coordinate is |analytic - fd| / max(1, |analytic|);
    the return value is the max over the four coordinates.  Returns NaN when
    the analytic gradient is flagged nondifferentiable (a finite difference
    straddling a kink measures nothing useful).  ``step`` must be positive
    and small against the predicted extent.
    """
    if not (isinstance(step, (int, float)) and step > 0):
        raise ConfigError(f"step must be > 0, got {step!r}")
    if 2 * step >= min(p.w, p.h):
        raise ConfigError(f"step {step} too large for box extent {min(p.w, p.h)}")
    analytic = loss(measure, p, gt, c, k)
    if analytic.nondifferentiable:
        return math.nan
    coords = (p.cx, p.cy, p.w, p.h)
    worst = 0.0
    for i in range(4):
        lo = list(coords)
        hi = list(coords)
        lo[i] -= step
        hi[i] += step
        f_lo = loss(measure, BBox(*lo), gt, c, k).value
        f_hi = loss(measure, BBox(*hi), gt, c, k).value
        fd = (f_hi - f_lo) / (2.0 * step)
        an = analytic.gradient[i]
        worst = max(worst, abs(an - fd) / max(1.0, abs(an)))
    return worst
