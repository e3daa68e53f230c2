"""Ranking, correlation, grouping, range/TN experiments, battery runner."""
import json
import math
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import pearsonr

import segsynth
from segsynth.errors import MetricError
from segsynth.mask_io import BinaryMask, load_mask, save_mask
from segsynth.metrics import DIRECTIONS, METRIC_ORDER, MetricReport, evaluate_all
from segsynth.study import (
    CorrelationMatrix,
    RankTable,
    group_metrics,
    load_corpus,
    load_store_reports,
    mode_aggregate,
    range_experiment,
    rank_correlation,
    rank_per_patient,
    run_battery,
    store_rank_table,
    tn_experiment,
)
from segsynth.synth import FdParams, SegmentorConfig, SpiculationRange

from helpers import block, disc

FIXTURE_RANKS = Path(segsynth.__file__).parent / "data" / "table3_mode_ranks.csv"

REFERENCE_GROUPS = [
    ["DICE", "JAC", "KAP", "ARI", "ICC", "PBD"],
    ["MSI", "AVD"],
    ["TPR", "AUC", "MI"],
    ["TNR", "FPR", "PPV"],
    ["ACC", "VOI", "GCE"],
    ["VS"],
    ["MHD"],
    ["HD"],
]


def reports_from(**per_segmentor):
    """Build single-metric reports: reports_from(a={'DICE': .9}, ...)."""
    return {seg: MetricReport(values=dict(vals)) for seg, vals in per_segmentor.items()}


# ---------------------------------------------------------------- ranking

def test_rank_larger_better():
    reps = reports_from(a={"DICE": 0.9}, b={"DICE": 0.8}, c={"DICE": 0.7})
    t = rank_per_patient(reps, segmentors=("a", "b", "c"))
    assert t.row("DICE").tolist() == [1, 2, 3]


def test_rank_smaller_better():
    reps = reports_from(a={"HD": 5.0}, b={"HD": 2.0}, c={"HD": 9.0})
    t = rank_per_patient(reps, segmentors=("a", "b", "c"))
    assert t.row("HD").tolist() == [2, 1, 3]


def test_rank_ties_share_smallest():
    reps = reports_from(a={"DICE": 0.9}, b={"DICE": 0.9}, c={"DICE": 0.7})
    t = rank_per_patient(reps)
    assert t.row("DICE").tolist() == [1, 1, 3]


def test_rank_undefined_gets_worst():
    reps = reports_from(a={"DICE": 0.9}, b={}, c={"DICE": 0.7})
    t = rank_per_patient(reps)
    assert t.row("DICE").tolist() == [1, 3, 2]
    # a metric nobody defines leaves the whole row at rank S
    assert t.row("MSI").tolist() == [3, 3, 3]


def test_rank_monotone_transform_invariance():
    vals = {"a": 0.31, "b": 0.77, "c": 0.55, "d": 0.42}
    plain = rank_per_patient(reports_from(**{s: {"DICE": v} for s, v in vals.items()}))
    warped = rank_per_patient(reports_from(
        **{s: {"DICE": math.exp(3 * v)} for s, v in vals.items()}))
    assert np.array_equal(plain.ranks, warped.ranks)


def test_rank_table_validation():
    with pytest.raises(ValueError):
        RankTable(metrics=("DICE",), segmentors=("a", "b"),
                  ranks=np.array([[1, 3]]))  # 3 > S


def test_mode_aggregate_majority():
    def table(r):
        return RankTable(metrics=("DICE",), segmentors=tuple("abcde"),
                         ranks=np.array([[r, 1, 1, 1, 1]]))
    agg = mode_aggregate([table(2), table(2), table(5)])
    assert agg.row("DICE")[0] == 2


def test_mode_aggregate_tie_takes_smaller():
    segs = tuple(str(i) for i in range(10))
    a = RankTable(metrics=("DICE",), segmentors=segs,
                  ranks=np.array([[1] + [2] * 9]))
    b = RankTable(metrics=("DICE",), segmentors=segs,
                  ranks=np.array([[10] + [2] * 9]))
    assert mode_aggregate([a, b]).row("DICE")[0] == 1


def test_mode_aggregate_single_patient_verbatim():
    t = RankTable(metrics=("DICE", "HD"), segmentors=("x", "y"),
                  ranks=np.array([[2, 1], [1, 2]]))
    agg = mode_aggregate([t])
    assert np.array_equal(agg.ranks, t.ranks)


def test_mode_aggregate_mismatched_tables():
    a = RankTable(metrics=("DICE",), segmentors=("x",), ranks=np.array([[1]]))
    b = RankTable(metrics=("HD",), segmentors=("x",), ranks=np.array([[1]]))
    with pytest.raises(ValueError):
        mode_aggregate([a, b])


# ------------------------------------------------------------ correlation

def two_metric_table(dice_vals, hd_vals):
    reps = {s: MetricReport(values={"DICE": d, "HD": h})
            for s, (d, h) in enumerate_segs(dice_vals, hd_vals)}
    return rank_per_patient(reps)


def enumerate_segs(a_vals, b_vals):
    return {f"s{i}": pair for i, pair in enumerate(zip(a_vals, b_vals))}.items()


def test_identical_orderings_correlate_plus_one():
    t = two_metric_table([0.9, 0.7, 0.5, 0.3], [1.0, 2.0, 3.0, 4.0])
    cm = rank_correlation(t)
    assert cm.value("DICE", "HD") == pytest.approx(1.0, abs=1e-12)


def test_reversed_orderings_correlate_minus_one():
    t = two_metric_table([0.3, 0.5, 0.7, 0.9], [1.0, 2.0, 3.0, 4.0])
    cm = rank_correlation(t)
    assert cm.value("DICE", "HD") == pytest.approx(-1.0, abs=1e-12)


def test_correlation_matches_scipy_on_fixture():
    table = RankTable.from_csv(FIXTURE_RANKS)
    cm = rank_correlation(table)
    want, _ = pearsonr(table.row("MSI").astype(float), table.row("TNR").astype(float))
    assert cm.value("MSI", "TNR") == pytest.approx(want, abs=1e-12)
    assert cm.value("TNR", "MSI") == cm.value("MSI", "TNR")  # exact symmetry
    assert cm.value("DICE", "DICE") == 1.0


def test_zero_variance_row_is_undefined():
    reps = reports_from(a={"DICE": 0.5, "HD": 1.0}, b={"DICE": 0.5, "HD": 2.0},
                        c={"DICE": 0.5, "HD": 3.0})
    cm = rank_correlation(rank_per_patient(reps))
    i = cm.metrics.index("DICE")
    assert np.isnan(cm.matrix[i, i])
    assert np.isnan(cm.value("DICE", "HD"))
    assert cm.value("HD", "HD") == 1.0


# --------------------------------------------------------------- grouping

def test_reference_grouping_at_095():
    cm = rank_correlation(RankTable.from_csv(FIXTURE_RANKS))
    groups = group_metrics(cm, threshold=0.95)
    assert groups.groups == REFERENCE_GROUPS


def test_grouping_threshold_one_still_finds_exact_partners():
    cm = rank_correlation(RankTable.from_csv(FIXTURE_RANKS))
    groups = group_metrics(cm, threshold=1.0).groups
    assert ["DICE", "JAC", "KAP", "ICC", "PBD"] in groups
    assert ["ARI"] in groups


def test_grouping_tiny_threshold_merges_everything():
    cm = rank_correlation(RankTable.from_csv(FIXTURE_RANKS))
    groups = group_metrics(cm, threshold=0.01).groups
    assert len(groups) == 1
    assert sorted(groups[0]) == sorted(METRIC_ORDER)


def test_grouping_permutation_invariance(rng):
    cm = rank_correlation(RankTable.from_csv(FIXTURE_RANKS))
    perm = rng.permutation(len(cm.metrics))
    shuffled = CorrelationMatrix(
        metrics=tuple(cm.metrics[i] for i in perm),
        matrix=cm.matrix[np.ix_(perm, perm)],
    )
    assert group_metrics(shuffled, 0.95).groups == REFERENCE_GROUPS


def test_grouping_warns_on_undefined_and_isolates():
    reps = reports_from(a={"DICE": 0.5, "HD": 1.0}, b={"DICE": 0.5, "HD": 2.0},
                        c={"DICE": 0.5, "HD": 3.0})
    cm = rank_correlation(rank_per_patient(reps))
    with pytest.warns(UserWarning, match="undefined correlations"):
        groups = group_metrics(cm, threshold=0.5)
    assert ["DICE"] in groups.groups


def test_grouping_threshold_validation():
    cm = rank_correlation(RankTable.from_csv(FIXTURE_RANKS))
    with pytest.raises(ValueError):
        group_metrics(cm, threshold=1.5)


def test_groups_to_dict():
    g = group_metrics(rank_correlation(RankTable.from_csv(FIXTURE_RANKS)), 0.95)
    d = g.to_dict()
    assert d["threshold"] == 0.95
    assert d["groups"] == REFERENCE_GROUPS


# ------------------------------------------------------------- CSV forms

def test_rank_table_csv_round_trip(tmp_path):
    reps = reports_from(a={"DICE": 0.9, "HD": 3.0}, b={"DICE": 0.8, "HD": 1.0})
    t = rank_per_patient(reps)
    p = tmp_path / "ranks.csv"
    t.to_csv(p)
    back = RankTable.from_csv(p)
    assert back.metrics == t.metrics
    assert back.segmentors == t.segmentors
    assert np.array_equal(back.ranks, t.ranks)


def test_correlation_csv_round_trip(tmp_path):
    reps = reports_from(a={"DICE": 0.5, "HD": 1.0}, b={"DICE": 0.5, "HD": 2.0},
                        c={"DICE": 0.4, "HD": 3.0})
    cm = rank_correlation(rank_per_patient(reps))
    p = tmp_path / "corr.csv"
    cm.to_csv(p)
    back = CorrelationMatrix.from_csv(p)
    assert back.metrics == cm.metrics
    same_nan = np.isnan(back.matrix) == np.isnan(cm.matrix)
    assert same_nan.all()
    both = ~np.isnan(cm.matrix)
    assert np.array_equal(back.matrix[both], cm.matrix[both])  # repr round trip


# ------------------------------------------------------- range experiment

@pytest.fixture
def range_masks():
    truth = block(64, 64, (4, 19), (4, 19))
    middle = block(64, 64, (9, 24), (9, 24))   # partial overlap
    worst = block(64, 64, (40, 55), (40, 55))  # disjoint
    return truth, truth, middle, worst


def test_range_experiment_classifications(range_masks):
    res = range_experiment(*range_masks)
    cls = {r["symbol"]: r["classification"] for r in res.rows}
    assert [r["symbol"] for r in res.rows] == list(METRIC_ORDER)
    for sym in ("DICE", "JAC", "MSI", "TPR", "PPV", "ICC"):
        assert cls[sym] == "attains", sym
    for sym in ("KAP", "ARI", "PBD", "MHD", "HD", "AVD"):
        assert cls[sym] == "exits", sym
    assert cls["VOI"] == "within"
    assert "undefined" not in cls.values()
    for r in res.rows:
        assert r["mono"] == DIRECTIONS[r["symbol"]]


def test_range_experiment_preconditions(range_masks):
    truth, best, middle, worst = range_masks
    with pytest.raises(MetricError, match="best-case"):
        range_experiment(truth, middle, middle, worst)
    with pytest.raises(MetricError, match="worst-case"):
        range_experiment(truth, best, middle, middle)


def test_range_result_csv(tmp_path, range_masks):
    res = range_experiment(*range_masks)
    p = tmp_path / "ranges.csv"
    res.to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "metric,mono,best,middle,worst,classification"
    assert len(lines) == 21
    assert lines[1].startswith("DICE,+,1.0,")


# ---------------------------------------------------------- TN experiment

TN_CHANGED = {"TNR", "FPR", "ACC", "AUC", "KAP", "ARI", "MI", "VOI", "GCE"}


@pytest.fixture
def tn_pair():
    return disc(48, 48, 24, 22, 10), disc(48, 48, 24, 26, 10)


def test_tn_experiment_changed_partition(tn_pair):
    res = tn_experiment(*tn_pair, paddings=[0, 6, 16])
    changed = {s for s, f in res.changed.items() if f}
    assert changed == TN_CHANGED
    assert not res.changed["ICC"]


def test_tn_experiment_acc_strictly_increases(tn_pair):
    res = tn_experiment(*tn_pair, paddings=[0, 6, 16])
    accs = [rep.value("ACC") for rep in res.reports]
    assert accs[0] < accs[1] < accs[2]
    assert res.tn_counts[0] < res.tn_counts[1] < res.tn_counts[2]


def test_tn_experiment_zero_padding_row_identity(tn_pair):
    truth, pred = tn_pair
    res = tn_experiment(truth, pred, paddings=[0, 4])
    direct = evaluate_all(truth, pred)
    assert res.reports[0].to_dict() == direct.to_dict()


def test_tn_experiment_validation(tn_pair):
    truth, pred = tn_pair
    for bad in ([], [-1, 3], [3, 3], [5, 2]):
        with pytest.raises(ValueError):
            tn_experiment(truth, pred, paddings=bad)


def test_tn_result_csv(tmp_path, tn_pair):
    res = tn_experiment(*tn_pair, paddings=[0, 6])
    p = tmp_path / "tn.csv"
    res.to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "tn," + ",".join(METRIC_ORDER)
    assert lines[1].startswith(f"{res.tn_counts[0]},")
    assert lines[-1].startswith("changed,")
    cells = lines[-1].split(",")
    assert cells[1 + METRIC_ORDER.index("TNR")] == "yes"
    assert cells[1 + METRIC_ORDER.index("DICE")] == "no"


# ----------------------------------------------------------------- corpus

def make_corpus(root, n=3):
    root.mkdir(parents=True, exist_ok=True)
    for i in range(n):
        fmt = "pgm" if i == 2 else "png"
        save_mask(root / f"p{i}.{fmt}", disc(48, 48, 24, 24, 9 + i))


def test_load_corpus_sorted_and_typed(tmp_path):
    make_corpus(tmp_path / "corpus")
    entries = load_corpus(tmp_path / "corpus")
    assert [e[0] for e in entries] == ["p0", "p1", "p2"]
    assert entries[2][2] == "pgm"
    assert isinstance(entries[0][3], BinaryMask)


def test_load_corpus_rejects_duplicates_and_empty(tmp_path):
    d = tmp_path / "corpus"
    make_corpus(d)
    save_mask(d / "p0.pgm", disc(48, 48, 24, 24, 9))  # same id, other format
    with pytest.raises(ValueError, match="duplicate"):
        load_corpus(d)
    empty = tmp_path / "nothing"
    empty.mkdir()
    with pytest.raises(ValueError):
        load_corpus(empty)
    with pytest.raises(FileNotFoundError):
        load_corpus(tmp_path / "missing")


# ---------------------------------------------------------------- battery

BATTERY_CONFIGS = [
    SegmentorConfig(id="identity", fd=FdParams(detail=1.0)),
    SegmentorConfig(id="jitter", fd=FdParams(detail=0.15, range=0.1, magnitude=1.5)),
]

FAILING_CONFIG = SegmentorConfig(
    id="collapse", fd=FdParams(detail=1.0),
    spiculation=SpiculationRange(count=(1, 1), height=(30.0, 30.0),
                                 width_deg=(25.0, 35.0), mode="inward"),
)


def test_run_battery_store_and_manifest(tmp_path):
    make_corpus(tmp_path / "corpus")
    manifest = run_battery(tmp_path / "corpus", BATTERY_CONFIGS, 1234,
                           tmp_path / "store")
    assert manifest["master_seed"] == 1234
    assert [c["id"] for c in manifest["segmentors"]] == ["identity", "jitter"]
    assert [p["id"] for p in manifest["patients"]] == ["p0", "p1", "p2"]
    assert manifest["patients"][0]["width"] == 48
    assert len(manifest["cells"]) == 6
    store = tmp_path / "store"
    for cell in manifest["cells"]:
        assert cell["status"] == "ok"
        assert (store / cell["mask"]).is_file()
        assert (store / cell["provenance"]).is_file()
        rep = MetricReport.from_dict(
            json.loads((store / cell["report"]).read_text()))
        assert rep.is_defined("DICE")
    on_disk = json.loads((store / "manifest.json").read_text())
    assert on_disk == manifest
    # identity cells reproduce the truth exactly
    ident = next(c for c in manifest["cells"]
                 if c["segmentor"] == "identity" and c["patient"] == "p0")
    assert load_mask(store / ident["mask"]) == load_mask(tmp_path / "corpus" / "p0.png")


def test_run_battery_byte_deterministic(tmp_path):
    make_corpus(tmp_path / "corpus")
    run_battery(tmp_path / "corpus", BATTERY_CONFIGS, 99, tmp_path / "a")
    run_battery(tmp_path / "corpus", BATTERY_CONFIGS, 99, tmp_path / "b")
    files_a = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*")
                     if p.is_file())
    files_b = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*")
                     if p.is_file())
    assert files_a == files_b and files_a
    for rel in files_a:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()


def test_run_battery_records_stage_errors(tmp_path):
    make_corpus(tmp_path / "corpus")
    manifest = run_battery(tmp_path / "corpus",
                           BATTERY_CONFIGS + [FAILING_CONFIG], 7, tmp_path / "store")
    bad = [c for c in manifest["cells"] if c["segmentor"] == "collapse"]
    assert bad and all(c["status"] == "error" for c in bad)
    for c in bad:
        assert c["stage"] == "spiculation"
        assert c["message"]
        assert "mask" not in c
    good = [c for c in manifest["cells"] if c["segmentor"] != "collapse"]
    assert all(c["status"] == "ok" for c in good)


def test_store_rank_table(tmp_path):
    make_corpus(tmp_path / "corpus")
    run_battery(tmp_path / "corpus", BATTERY_CONFIGS, 5, tmp_path / "store")
    table = store_rank_table(tmp_path / "store")
    assert table.metrics == METRIC_ORDER
    assert table.segmentors == ("identity", "jitter")
    # identity reproduces the truth, so it can never rank below the jitterer
    assert table.row("DICE")[0] == 1
    patients, segmentors, by_patient = load_store_reports(tmp_path / "store")
    assert patients == ["p0", "p1", "p2"]
    assert segmentors == ["identity", "jitter"]
    assert set(by_patient) == {"p0", "p1", "p2"}
