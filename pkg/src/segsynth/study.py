"""Ranking studies over metric reports, plus the synthesis battery runner.

The battery applies every configured segmentor to every corpus mask with a
derived per-cell seed, evaluates all metrics, and writes a store that is
byte-identical across runs with the same inputs (no timestamps anywhere).
Downstream operations rank segmentors per patient, aggregate by mode,
correlate metric rank rows, and group metrics by correlation.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import MetricError, SegsynthError, SynthesisError
from .mask_io import BinaryMask, load_mask, pad, save_mask
from .metrics import DIRECTIONS, METRIC_ORDER, MetricReport, evaluate_all
from .synth import SegmentorConfig, derive_cell_seed, synthesize

MASK_EXTENSIONS = (".png", ".pgm")


def _dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n",
                          encoding="utf-8")


# ---------------------------------------------------------------------------
# rank tables

@dataclass
class RankTable:
    """Integer ranks, metrics x segmentors; 1 is best."""

    metrics: tuple
    segmentors: tuple
    ranks: np.ndarray  # (M, S) int64

    def __post_init__(self):
        r = np.asarray(self.ranks, dtype=np.int64)
        if r.shape != (len(self.metrics), len(self.segmentors)):
            raise ValueError(
                f"rank matrix shape {r.shape} does not match "
                f"{len(self.metrics)} metrics x {len(self.segmentors)} segmentors"
            )
        s = len(self.segmentors)
        if r.size and (r.min() < 1 or r.max() > s):
            raise ValueError(f"ranks must lie in [1, {s}]")
        self.ranks = r

    def row(self, metric: str) -> np.ndarray:
        return self.ranks[self.metrics.index(metric)]

    def to_csv(self, path) -> None:
        lines = ["metric," + ",".join(str(s) for s in self.segmentors)]
        for m, row in zip(self.metrics, self.ranks):
            lines.append(m + "," + ",".join(str(int(v)) for v in row))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def from_csv(cls, path) -> "RankTable":
        lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln]
        header = lines[0].split(",")
        segmentors = tuple(header[1:])
        metrics, rows = [], []
        for ln in lines[1:]:
            cells = ln.split(",")
            metrics.append(cells[0])
            rows.append([int(v) for v in cells[1:]])
        return cls(metrics=tuple(metrics), segmentors=segmentors,
                   ranks=np.array(rows, dtype=np.int64))


def rank_per_patient(reports: dict, segmentors: Optional[Sequence[str]] = None) -> RankTable:
    """Competition-rank the segmentors on one patient, per metric.

    Ties share the smallest rank (values 0.9, 0.9, 0.7 rank 1, 1, 3);
    direction flags decide which end is rank 1. Undefined values receive
    rank S, the segmentor count.
    """
    segs = tuple(segmentors) if segmentors is not None else tuple(reports)
    s = len(segs)
    if s == 0:
        raise ValueError("no segmentors to rank")
    out = np.full((len(METRIC_ORDER), s), s, dtype=np.int64)
    for mi, metric in enumerate(METRIC_ORDER):
        vals = [reports[seg].value(metric) if seg in reports else None for seg in segs]
        idx = [i for i, v in enumerate(vals) if v is not None]
        if not idx:
            continue  # all undefined: everything stays at rank S
        keys = np.array([vals[i] for i in idx], dtype=np.float64)
        if DIRECTIONS[metric] == "+":
            keys = -keys
        out[mi, idx] = rankdata(keys, method="min").astype(np.int64)
    return RankTable(metrics=METRIC_ORDER, segmentors=segs, ranks=out)


def mode_aggregate(tables: Sequence[RankTable]) -> RankTable:
    """Per-cell mode across patients; rank ties go to the smaller rank."""
    if not tables:
        raise ValueError("no rank tables to aggregate")
    first = tables[0]
    for t in tables[1:]:
        if t.metrics != first.metrics or t.segmentors != first.segmentors:
            raise ValueError("rank tables disagree on metrics or segmentors")
    stack = np.stack([t.ranks for t in tables])  # (P, M, S)
    s = len(first.segmentors)
    out = np.empty_like(first.ranks)
    for mi in range(stack.shape[1]):
        for si in range(stack.shape[2]):
            counts = np.bincount(stack[:, mi, si], minlength=s + 1)
            out[mi, si] = int(counts.argmax())  # argmax takes the smallest on ties
    return RankTable(metrics=first.metrics, segmentors=first.segmentors, ranks=out)


# ---------------------------------------------------------------------------
# correlation and grouping

@dataclass
class CorrelationMatrix:
    """Pearson correlations between metric rank rows; NaN marks undefined."""

    metrics: tuple
    matrix: np.ndarray  # (M, M) float64

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (len(self.metrics), len(self.metrics)):
            raise ValueError(f"matrix shape {m.shape} does not fit {len(self.metrics)} metrics")
        self.matrix = m

    def value(self, a: str, b: str) -> float:
        return float(self.matrix[self.metrics.index(a), self.metrics.index(b)])

    def to_csv(self, path) -> None:
        lines = ["metric," + ",".join(self.metrics)]
        for m, row in zip(self.metrics, self.matrix):
            cells = ["" if np.isnan(v) else repr(float(v)) for v in row]
            lines.append(m + "," + ",".join(cells))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def from_csv(cls, path) -> "CorrelationMatrix":
        lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln]
        metrics = tuple(lines[0].split(",")[1:])
        rows = []
        for ln in lines[1:]:
            cells = ln.split(",")[1:]
            rows.append([float(c) if c else np.nan for c in cells])
        return cls(metrics=metrics, matrix=np.array(rows, dtype=np.float64))


def rank_correlation(table: RankTable) -> CorrelationMatrix:
    """Pearson correlation of every rank-row pair.

    Rows with zero variance correlate with nothing (NaN cells, including
    the diagonal); the defined diagonal is exactly 1.
    """
    rows = table.ranks.astype(np.float64)
    stds = rows.std(axis=1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        m = np.corrcoef(rows)
    m = np.atleast_2d(m)
    m = (m + m.T) / 2.0  # exact symmetry regardless of BLAS quirks
    defined = stds > 0
    m[~defined, :] = np.nan
    m[:, ~defined] = np.nan
    live = np.nonzero(defined)[0]
    for i in live:
        m[i, i] = 1.0
    # identical rows correlate exactly 1; corrcoef can round one ulp short,
    # which would make a threshold of exactly 1.0 unreachable
    for a, i in enumerate(live):
        for j in live[a + 1:]:
            if np.array_equal(table.ranks[i], table.ranks[j]):
                m[i, j] = m[j, i] = 1.0
    return CorrelationMatrix(metrics=table.metrics, matrix=m)


@dataclass
class MetricGroups:
    threshold: float
    groups: list  # list of lists of metric symbols

    def to_dict(self) -> dict:
        return {"threshold": self.threshold, "groups": [list(g) for g in self.groups]}


def group_metrics(cm: CorrelationMatrix, threshold: float = 0.95) -> MetricGroups:
    """Complete-linkage agglomerative grouping on the correlation matrix.

    Two clusters merge while the *minimum* pairwise correlation between
    their members stays at or above the threshold; the best (largest
    linkage) merge happens first, ties broken toward the earliest canonical
    metric positions. Undefined correlations count as -1 and are warned
    about. Input order does not matter: metrics are canonicalized to the
    report order before seeding, so the result is deterministic.
    """
    if not -1.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [-1, 1], got {threshold}")
    canon = [m for m in METRIC_ORDER if m in cm.metrics]
    extra = [m for m in cm.metrics if m not in METRIC_ORDER]
    order = canon + sorted(extra)
    idx = [cm.metrics.index(m) for m in order]
    sim = cm.matrix[np.ix_(idx, idx)].copy()
    nan_pairs = [(order[i], order[j]) for i, j in zip(*np.nonzero(np.isnan(sim))) if i < j]
    if nan_pairs:
        warnings.warn(f"undefined correlations treated as -1: {nan_pairs}")
    sim = np.nan_to_num(sim, nan=-1.0)

    clusters = [[i] for i in range(len(order))]
    while len(clusters) > 1:
        best = None
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                link = min(sim[i, j] for i in clusters[a] for j in clusters[b])
                key = (-link, clusters[a][0], clusters[b][0])
                if best is None or key < best[0]:
                    best = (key, a, b, link)
        if best[3] < threshold:
            break
        _, a, b, _ = best
        clusters[a] = sorted(clusters[a] + clusters[b])
        del clusters[b]
    clusters.sort(key=lambda c: c[0])
    return MetricGroups(threshold=threshold,
                        groups=[[order[i] for i in c] for c in clusters])


# ---------------------------------------------------------------------------
# range and TN experiments

RANGE_EPS = 1e-9


@dataclass
class RangeResult:
    rows: list  # per metric: dict(symbol, mono, best, middle, worst, classification)

    def to_csv(self, path) -> None:
        lines = ["metric,mono,best,middle,worst,classification"]
        for r in self.rows:
            cells = [r["symbol"], r["mono"]]
            for k in ("best", "middle", "worst"):
                v = r[k]
                cells.append("" if v is None else repr(float(v)))
            cells.append(r["classification"])
            lines.append(",".join(cells))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _classify_range(direction: str, vb, vm, vw) -> str:
    vals = [v for v in (vb, vm, vw) if v is not None]
    if len(vals) < 3:
        return "undefined"
    if any(v < -RANGE_EPS or v > 1.0 + RANGE_EPS for v in vals):
        return "exits"
    if direction == "+":
        hit = abs(vb - 1.0) <= RANGE_EPS and abs(vw) <= RANGE_EPS
    else:
        hit = abs(vb) <= RANGE_EPS and abs(vw - 1.0) <= RANGE_EPS
    return "attains" if hit else "within"


def range_experiment(truth: BinaryMask, best: BinaryMask, middle: BinaryMask,
                     worst: BinaryMask) -> RangeResult:
    """Evaluate the three canonical cases and classify each metric's range.

    best must equal the truth; worst must not overlap it at all. Each
    metric is classified as: attains (stays in [0,1] and the best/worst
    cases reach the monotone extremes), within (stays in [0,1]), exits
    (leaves [0,1]), or undefined (a case had no value).
    """
    if not best == truth:
        raise MetricError("best-case mask must equal the truth exactly")
    if bool(np.any(worst.pixels & truth.pixels)):
        raise MetricError("worst-case mask must not overlap the truth")
    rep = {name: evaluate_all(truth, m)
           for name, m in (("best", best), ("middle", middle), ("worst", worst))}
    rows = []
    for sym in METRIC_ORDER:
        vb, vm, vw = (rep[k].value(sym) for k in ("best", "middle", "worst"))
        rows.append({
            "symbol": sym, "mono": DIRECTIONS[sym],
            "best": vb, "middle": vm, "worst": vw,
            "classification": _classify_range(DIRECTIONS[sym], vb, vm, vw),
        })
    return RangeResult(rows=rows)


@dataclass
class TnResult:
    paddings: list
    tn_counts: list
    reports: list  # MetricReport per padding
    changed: dict  # symbol -> bool

    def to_csv(self, path) -> None:
        lines = ["tn," + ",".join(METRIC_ORDER)]
        for tn, rep in zip(self.tn_counts, self.reports):
            cells = [str(tn)]
            for sym in METRIC_ORDER:
                v = rep.value(sym)
                cells.append("" if v is None else repr(float(v)))
            lines.append(",".join(cells))
        lines.append("changed," + ",".join(
            "yes" if self.changed[sym] else "no" for sym in METRIC_ORDER))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def tn_experiment(truth: BinaryMask, pred: BinaryMask,
                  paddings: Sequence[int]) -> TnResult:
    """Grow only the background and watch which metrics move.

    Each padding adds a uniform background border to both masks, so TP, FP
    and FN stay fixed while TN grows. A zero padding reports the unpadded
    pair unchanged. A metric is flagged changed when any padded value
    differs from the first row beyond 1e-12 (or flips definedness).
    """
    pads = [int(p) for p in paddings]
    if not pads:
        raise ValueError("need at least one padding")
    if any(p < 0 for p in pads):
        raise ValueError("paddings must be non-negative")
    if any(b <= a for a, b in zip(pads, pads[1:])):
        raise ValueError("paddings must strictly increase")
    reports, tn_counts = [], []
    for p in pads:
        t, q = pad(truth, p), pad(pred, p)
        reports.append(evaluate_all(t, q))
        tn_counts.append(int(np.count_nonzero(~t.pixels & ~q.pixels)))
    changed = {}
    base = reports[0]
    for sym in METRIC_ORDER:
        flag = False
        for rep in reports[1:]:
            a, b = base.value(sym), rep.value(sym)
            if (a is None) != (b is None):
                flag = True
            elif a is not None and abs(a - b) > 1e-12:
                flag = True
        changed[sym] = flag
    return TnResult(paddings=pads, tn_counts=tn_counts, reports=reports,
                    changed=changed)


# ---------------------------------------------------------------------------
# battery

def load_corpus(corpus_dir) -> list:
    """Masks from a directory: (patient_id, filename, format, mask) sorted by id."""
    root = Path(corpus_dir)
    if not root.is_dir():
        raise FileNotFoundError(f"corpus directory {corpus_dir} does not exist")
    entries = []
    seen = {}
    for p in sorted(root.iterdir()):
        if p.suffix.lower() not in MASK_EXTENSIONS or not p.is_file():
            continue
        pid = p.stem
        if pid in seen:
            raise ValueError(f"duplicate patient id {pid!r}: {seen[pid]} and {p.name}")
        seen[pid] = p.name
        entries.append((pid, p.name, p.suffix.lower().lstrip("."), load_mask(p)))
    if not entries:
        raise ValueError(f"no .png or .pgm masks in {corpus_dir}")
    return entries


def run_battery(corpus_dir, configs: Sequence[SegmentorConfig], master_seed: int,
                out_dir) -> dict:
    """Synthesize and evaluate every (patient, segmentor) cell into a store.

    Cells run independently; a failing cell is recorded in the manifest with
    its stage and message, and the batch continues. Output masks keep each
    patient's input format. The store carries no timestamps, so reruns with
    identical inputs are byte-identical.
    """
    corpus = load_corpus(corpus_dir)
    out = Path(out_dir)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    (out / "reports").mkdir(parents=True, exist_ok=True)
    cells = []
    for pid, fname, fmt, truth in corpus:
        for cfg in configs:
            seed = derive_cell_seed(master_seed, pid, cfg.id)
            cell = {"patient": pid, "segmentor": cfg.id, "seed": seed}
            try:
                result = synthesize(truth, cfg, seed)
                report = evaluate_all(truth, result.mask)
                stem = f"{pid}__{cfg.id}"
                mask_rel = f"masks/{stem}.{fmt}"
                prov_rel = f"masks/{stem}.provenance.json"
                report_rel = f"reports/{stem}.json"
                save_mask(out / mask_rel, result.mask)
                _dump_json(result.provenance, out / prov_rel)
                _dump_json(report.to_dict(), out / report_rel)
                cell.update(status="ok", mask=mask_rel, provenance=prov_rel,
                            report=report_rel)
            except Exception as exc:  # a bad cell must not sink the batch
                stage = exc.stage if isinstance(exc, SynthesisError) else "synthesis"
                cell.update(status="error", stage=stage, message=str(exc))
            cells.append(cell)
    manifest = {
        "master_seed": int(master_seed),
        "segmentors": [c.to_dict() for c in configs],
        "patients": [{"id": pid, "file": fname, "format": fmt,
                      "width": m.width, "height": m.height}
                     for pid, fname, fmt, m in corpus],
        "cells": cells,
    }
    _dump_json(manifest, out / "manifest.json")
    return manifest


def load_store_reports(store_dir):
    """(patients, segmentors, {patient: {segmentor: MetricReport}}) from a store.

    Error cells are absent from the inner mapping; ranking treats their
    metrics as undefined.
    """
    root = Path(store_dir)
    manifest = json.loads((root / "manifest.json").read_text(encoding="utf-8"))
    patients = [p["id"] for p in manifest["patients"]]
    segmentors = [c["id"] for c in manifest["segmentors"]]
    by_patient = {pid: {} for pid in patients}
    for cell in manifest["cells"]:
        if cell.get("status") != "ok":
            continue
        rep = MetricReport.from_dict(
            json.loads((root / cell["report"]).read_text(encoding="utf-8")))
        by_patient[cell["patient"]][cell["segmentor"]] = rep
    return patients, segmentors, by_patient


def store_rank_table(store_dir) -> RankTable:
    """Mode-aggregated rank table for a battery store."""
    patients, segmentors, by_patient = load_store_reports(store_dir)
    tables = [rank_per_patient(by_patient[pid], segmentors) for pid in patients]
    return mode_aggregate(tables)
