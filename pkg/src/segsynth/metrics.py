"""Segmentation evaluation metrics over binary mask pairs.

Twenty metrics: sixteen computed from the confusion counts alone, one
tolerance-band overlap (MSI), and three spatial-distance metrics (MHD, HD,
AVD). Metrics that cannot be computed for a given pair are reported as
undefined with a reason instead of raising; only structural misuse (shape
mismatch, zero-size frames) raises.

Formulas and a worked 4x4 example live in docs/metrics.md.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import MetricError
from .mask_io import BinaryMask, boundary_pixels

# (symbol, direction) in canonical report order; "+" means larger is better
METRICS = (
    ("DICE", "+"), ("JAC", "+"), ("MSI", "+"), ("TPR", "+"), ("TNR", "+"),
    ("FPR", "-"), ("PPV", "+"), ("ACC", "+"), ("AUC", "+"), ("VS", "+"),
    ("KAP", "+"), ("ARI", "+"), ("MI", "+"), ("VOI", "-"), ("GCE", "-"),
    ("ICC", "+"), ("PBD", "-"), ("MHD", "-"), ("HD", "-"), ("AVD", "-"),
)
METRIC_ORDER = tuple(m for m, _ in METRICS)
DIRECTIONS = dict(METRICS)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise MetricError("confusion counts must be non-negative")
        if self.total == 0:
            raise MetricError("confusion counts sum to zero")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass
class MetricReport:
    """Metric values keyed by symbol; None means undefined, see reasons."""

    values: dict
    reasons: dict = field(default_factory=dict)

    def __post_init__(self):
        unknown = set(self.values) - set(METRIC_ORDER)
        if unknown:
            raise MetricError(f"unknown metric symbols: {sorted(unknown)}")

    def value(self, symbol: str) -> Optional[float]:
        return self.values.get(symbol)

    def is_defined(self, symbol: str) -> bool:
        return self.values.get(symbol) is not None

    @staticmethod
    def direction(symbol: str) -> str:
        return DIRECTIONS[symbol]

    def to_dict(self) -> dict:
        return {"values": {k: self.values.get(k) for k in METRIC_ORDER},
                "reasons": dict(self.reasons)}

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        return cls(values=dict(d["values"]), reasons=dict(d.get("reasons", {})))

    def csv_header(self) -> str:
        return ",".join(METRIC_ORDER)

    def csv_row(self) -> str:
        cells = []
        for sym in METRIC_ORDER:
            v = self.values.get(sym)
            cells.append("" if v is None else repr(float(v)))
        return ",".join(cells)


def confusion(truth: BinaryMask, pred: BinaryMask) -> ConfusionCounts:
    """Pixel-wise confusion counts; masks must share a frame."""
    if truth.pixels.shape != pred.pixels.shape:
        raise MetricError(
            f"mask shapes differ: {truth.pixels.shape} vs {pred.pixels.shape}"
        )
    t, p = truth.pixels, pred.pixels
    tp = int(np.count_nonzero(t & p))
    fp = int(np.count_nonzero(~t & p))
    fn = int(np.count_nonzero(t & ~p))
    tn = int(np.count_nonzero(~t & ~p))
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn)


def _entropy2(*probs) -> float:
    """Shannon entropy in bits; zero-probability terms contribute nothing."""
    return -sum(p * math.log2(p) for p in probs if p > 0)


def _comb2(k: int) -> int:
    return k * (k - 1) // 2


def count_metrics(c: ConfusionCounts) -> dict:
    """The sixteen confusion-count metrics.

    Returns {symbol: (value, reason)} with value None when undefined.
    """
    tp, fp, fn, tn = c.tp, c.fp, c.fn, c.tn
    n = c.total
    out = {}

    def put(sym, num, den, reason):
        out[sym] = (num / den, None) if den else (None, reason)

    both_empty = "both masks empty"
    put("DICE", 2 * tp, 2 * tp + fp + fn, both_empty)
    put("JAC", tp, tp + fp + fn, both_empty)
    put("TPR", tp, tp + fn, "truth mask empty")
    put("TNR", tn, tn + fp, "truth fills the frame")
    put("FPR", fp, fp + tn, "truth fills the frame")
    put("PPV", tp, tp + fp, "prediction mask empty")
    out["ACC"] = ((tp + tn) / n, None)

    if tp + fn and fp + tn:
        fpr = fp / (fp + tn)
        fnr = fn / (fn + tp)
        out["AUC"] = (1.0 - (fpr + fnr) / 2.0, None)
    else:
        out["AUC"] = (None, "truth empty or truth fills the frame")

    put("VS", 2 * tp + fp + fn - abs(fn - fp), 2 * tp + fp + fn, both_empty)

    # chance-corrected agreement; Pe from the marginals
    po = (tp + tn) / n
    pe = ((tp + fn) * (tp + fp) + (tn + fn) * (tn + fp)) / (n * n)
    if pe < 1.0:
        out["KAP"] = ((po - pe) / (1.0 - pe), None)
    else:
        out["KAP"] = (None, "no variation: both masks constant")

    # adjusted Rand over the 2x2 contingency table, exact integer arithmetic
    sum_cells = _comb2(tp) + _comb2(fn) + _comb2(fp) + _comb2(tn)
    sum_truth = _comb2(tp + fn) + _comb2(fp + tn)
    sum_pred = _comb2(tp + fp) + _comb2(fn + tn)
    pairs = _comb2(n)
    if pairs:
        expected = sum_truth * sum_pred / pairs
        max_index = (sum_truth + sum_pred) / 2.0
        if max_index != expected:
            out["ARI"] = ((sum_cells - expected) / (max_index - expected), None)
        else:
            out["ARI"] = (None, "degenerate partition: no pair diversity")
    else:
        out["ARI"] = (None, "single-pixel frame")

    # mutual information and variation of information, both in bits
    p_t1, p_p1 = (tp + fn) / n, (tp + fp) / n
    h_t = _entropy2(p_t1, 1.0 - p_t1)
    h_p = _entropy2(p_p1, 1.0 - p_p1)
    h_joint = _entropy2(tp / n, fp / n, fn / n, tn / n)
    mi = h_t + h_p - h_joint
    out["MI"] = (mi, None)
    out["VOI"] = (h_t + h_p - 2.0 * mi, None)

    # global consistency error, min of the two one-sided refinement errors;
    # 0/0 terms read as 0 (numerator vanishes with its denominator)
    def safe(num, den):
        return num / den if den else 0.0

    e1 = safe(fn * (fn + 2 * tp), tp + fn) + safe(fp * (fp + 2 * tn), tn + fp)
    e2 = safe(fp * (fp + 2 * tp), tp + fp) + safe(fn * (fn + 2 * tn), tn + fn)
    out["GCE"] = (min(e1, e2) / n, None)

    # uncentered concordance 2*sum(f*g) / (sum(f^2) + sum(g^2)); on binary
    # data this reduces to the overlap form below (see docs/metrics.md)
    put("ICC", 2 * tp, 2 * tp + fp + fn, both_empty)

    if tp:
        out["PBD"] = ((fp + fn) / (2 * tp), None)
    elif fp + fn:
        out["PBD"] = (-1.0, None)  # disjoint masks: sentinel by convention
    else:
        out["PBD"] = (None, both_empty)

    return out


# ---------------------------------------------------------------------------
# spatial metrics

def _directed_dists(src: np.ndarray, dst_tree: cKDTree) -> np.ndarray:
    d, _ = dst_tree.query(src, k=1)
    return d


# full distance matrix beats two kd-trees below this many src*dst entries
_BRUTE_LIMIT = 4096


def _nearest_dists(a: np.ndarray, b: np.ndarray):
    """Directed nearest-neighbour distances (a->b, b->a) between point sets."""
    if a.shape[0] * b.shape[0] <= _BRUTE_LIMIT:
        sq = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
        np.sqrt(sq, out=sq)
        return sq.min(axis=1), sq.min(axis=0)
    return _directed_dists(a, cKDTree(b)), _directed_dists(b, cKDTree(a))


def _cloud_stats(pixels: np.ndarray):
    """Mean and ML covariance of a foreground point cloud in (x, y)."""
    ys, xs = np.nonzero(pixels)
    pts = np.empty((ys.size, 2), dtype=np.float64)
    pts[:, 0], pts[:, 1] = xs, ys
    mu = pts.mean(axis=0)
    centered = pts - mu
    cov = (centered.T @ centered) / ys.size  # biased; zeros for one point
    return mu, cov, ys.size


def distance_metrics(truth: BinaryMask, pred: BinaryMask,
                     truth_boundary: Optional[np.ndarray] = None,
                     pred_boundary: Optional[np.ndarray] = None) -> dict:
    """HD, AVD over boundary pixel sets; MHD over foreground clouds.

    HD = max of the two directed max-min distances, AVD the max of the two
    directed averages. MHD is the Mahalanobis distance between the cloud
    means under the size-weighted pooled covariance (pseudo-inverse when
    the pooled covariance is singular). Undefined when a mask is empty.
    Precomputed boundary_pixels arrays may be passed to skip re-tracing.
    """
    if truth.pixels.shape != pred.pixels.shape:
        raise MetricError(
            f"mask shapes differ: {truth.pixels.shape} vs {pred.pixels.shape}"
        )
    out = {}
    t_empty = truth.foreground_count == 0
    p_empty = pred.foreground_count == 0
    if t_empty or p_empty:
        reason = "truth mask empty" if t_empty else "prediction mask empty"
        for sym in ("MHD", "HD", "AVD"):
            out[sym] = (None, reason)
        return out

    bt = np.asarray(boundary_pixels(truth) if truth_boundary is None
                    else truth_boundary, dtype=np.float64)
    bp = np.asarray(boundary_pixels(pred) if pred_boundary is None
                    else pred_boundary, dtype=np.float64)
    d_tp, d_pt = _nearest_dists(bt, bp)
    out["HD"] = (float(max(d_tp.max(), d_pt.max())), None)
    # fsum: directed averages must not depend on boundary traversal order
    out["AVD"] = (max(math.fsum(d_tp.tolist()) / d_tp.size,
                      math.fsum(d_pt.tolist()) / d_pt.size), None)

    (mu_t, cov_t, n_t) = _cloud_stats(truth.pixels)
    (mu_p, cov_p, n_p) = _cloud_stats(pred.pixels)
    mu = mu_t - mu_p
    pooled = (n_t * cov_t + n_p * cov_p) / (n_t + n_p)
    inv = np.linalg.pinv(pooled, hermitian=True)  # pooled is symmetric PSD
    out["MHD"] = (float(math.sqrt(max(0.0, mu @ inv @ mu))), None)
    return out


def msi(truth: BinaryMask, pred: BinaryMask, tolerance: float = 2.0,
        truth_boundary: Optional[np.ndarray] = None):
    """Tolerance-band surface overlap.

    MSI = 2*tp / (2*tp + sum of w(d) over all FP and FN pixels), where d is
    the pixel's Euclidean distance to the truth boundary pixel set and
    w(d) = 0 for d <= tolerance, else d / tolerance. Error pixels hugging
    the truth boundary are forgiven; remote ones cost more the farther they
    sit. Zero when the masks share no foreground.
    """
    if truth.pixels.shape != pred.pixels.shape:
        raise MetricError(
            f"mask shapes differ: {truth.pixels.shape} vs {pred.pixels.shape}"
        )
    if not (math.isfinite(tolerance) and tolerance > 0):
        raise MetricError(f"tolerance must be positive, got {tolerance}")
    if truth.foreground_count == 0:
        return None, "truth mask empty"
    if pred.foreground_count == 0:
        return None, "prediction mask empty"
    t, p = truth.pixels, pred.pixels
    tp = int(np.count_nonzero(t & p))
    if tp == 0:
        return 0.0, None
    err_y, err_x = np.nonzero(t ^ p)
    if err_y.size == 0:
        return 1.0, None
    if truth_boundary is None:
        truth_boundary = boundary_pixels(truth)
    tree = cKDTree(truth_boundary.astype(np.float64))
    d, _ = tree.query(np.column_stack((err_x, err_y)).astype(np.float64), k=1)
    w = np.where(d <= tolerance, 0.0, d / tolerance)
    return float(2 * tp / (2 * tp + w.sum())), None


def evaluate_all(truth: BinaryMask, pred: BinaryMask,
                 msi_tolerance: float = 2.0,
                 truth_boundary: Optional[np.ndarray] = None) -> MetricReport:
    """All twenty metrics for one truth/prediction pair.

    truth_boundary, when supplied, must be boundary_pixels(truth); callers
    scoring many predictions against one truth pass it to avoid re-tracing.
    """
    counts = confusion(truth, pred)
    parts = count_metrics(counts)
    if truth_boundary is None and truth.foreground_count > 0:
        truth_boundary = boundary_pixels(truth)
    pred_boundary = (boundary_pixels(pred) if pred.foreground_count > 0
                     else None)
    parts["MSI"] = msi(truth, pred, tolerance=msi_tolerance,
                       truth_boundary=truth_boundary)
    parts.update(distance_metrics(truth, pred, truth_boundary=truth_boundary,
                                  pred_boundary=pred_boundary))
    values = {sym: parts[sym][0] for sym in METRIC_ORDER}
    reasons = {sym: parts[sym][1] for sym in METRIC_ORDER if parts[sym][1]}
    return MetricReport(values=values, reasons=reasons)
