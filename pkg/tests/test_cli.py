"""Command-line interface, driven through click's test runner."""
import json

from click.testing import CliRunner

from segsynth.cli import main
from segsynth.mask_io import load_mask, save_mask
from segsynth.metrics import METRIC_ORDER

from helpers import block, disc

TWO_SEGMENTORS = [
    {"id": "identity", "fd": {"detail": 1.0}},
    {"id": "rough", "fd": {"detail": 0.15, "range": 0.1, "magnitude": 1.5}},
]


def setup_inputs(root):
    save_mask(root / "truth.png", disc(48, 48, 24, 24, 11))
    save_mask(root / "pred.png", disc(48, 48, 24, 27, 11))
    (root / "segs.json").write_text(json.dumps(TWO_SEGMENTORS))


def run(*args):
    return CliRunner().invoke(main, [str(a) for a in args])


def test_synth_writes_masks_and_provenance(tmp_path):
    setup_inputs(tmp_path)
    r = run("synth", "--truth", tmp_path / "truth.png",
            "--config", tmp_path / "segs.json", "--seed", 9,
            "--out", tmp_path / "out")
    assert r.exit_code == 0, r.output
    for sid in ("identity", "rough"):
        mask_file = tmp_path / "out" / f"truth__{sid}.png"
        assert mask_file.is_file()
        prov = json.loads((tmp_path / "out" / f"truth__{sid}.provenance.json")
                          .read_text())
        assert prov["segmentor"] == sid
    ident = load_mask(tmp_path / "out" / "truth__identity.png")
    assert ident == load_mask(tmp_path / "truth.png")


def test_synth_bad_config_is_friendly(tmp_path):
    setup_inputs(tmp_path)
    (tmp_path / "bad.json").write_text(json.dumps([{"id": "x"}]))
    r = run("synth", "--truth", tmp_path / "truth.png",
            "--config", tmp_path / "bad.json", "--seed", 1,
            "--out", tmp_path / "out")
    assert r.exit_code != 0
    assert "missing required key" in r.output
    assert "Traceback" not in r.output


def test_evaluate_json(tmp_path):
    setup_inputs(tmp_path)
    out = tmp_path / "report.json"
    r = run("evaluate", "--truth", tmp_path / "truth.png",
            "--pred", tmp_path / "pred.png", "--out", out)
    assert r.exit_code == 0, r.output
    doc = json.loads(out.read_text())
    assert set(doc["values"]) == set(METRIC_ORDER)
    assert 0.0 < doc["values"]["DICE"] < 1.0


def test_evaluate_csv(tmp_path):
    setup_inputs(tmp_path)
    out = tmp_path / "report.csv"
    r = run("evaluate", "--truth", tmp_path / "truth.png",
            "--pred", tmp_path / "pred.png", "--out", out)
    assert r.exit_code == 0, r.output
    header, row = out.read_text().splitlines()
    assert header == ",".join(METRIC_ORDER)
    assert len(row.split(",")) == 20


def test_evaluate_rejects_other_extensions(tmp_path):
    setup_inputs(tmp_path)
    r = run("evaluate", "--truth", tmp_path / "truth.png",
            "--pred", tmp_path / "pred.png", "--out", tmp_path / "report.xml")
    assert r.exit_code != 0
    assert ".json or .csv" in r.output


def test_study_pipeline_end_to_end(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    for i in range(3):
        save_mask(corpus / f"p{i}.png", disc(48, 48, 24, 24, 9 + i))
    (tmp_path / "segs.json").write_text(json.dumps(TWO_SEGMENTORS))
    store = tmp_path / "store"

    r = run("study", "run", "--corpus", corpus, "--configs",
            tmp_path / "segs.json", "--seed", 3, "--out", store)
    assert r.exit_code == 0, r.output
    assert "6 cells" in r.output and "(0 failed)" in r.output

    r = run("study", "rank", "--store", store)
    assert r.exit_code == 0, r.output
    ranks = (store / "table3_mode_ranks.csv").read_text().splitlines()
    assert ranks[0] == "metric,identity,rough"
    assert len(ranks) == 21

    r = run("study", "correlate", "--store", store, "--threshold", 0.9)
    assert r.exit_code == 0, r.output
    assert (store / "corr_matrix.csv").is_file()
    groups = json.loads((store / "groups.json").read_text())
    assert groups["threshold"] == 0.9
    assert sorted(sym for g in groups["groups"] for sym in g) == sorted(METRIC_ORDER)


def test_study_ranges_defaults_best_to_truth(tmp_path):
    save_mask(tmp_path / "truth.png", block(64, 64, (4, 19), (4, 19)))
    save_mask(tmp_path / "middle.png", block(64, 64, (9, 24), (9, 24)))
    save_mask(tmp_path / "worst.png", block(64, 64, (40, 55), (40, 55)))
    out = tmp_path / "table4_ranges.csv"
    r = run("study", "ranges", "--truth", tmp_path / "truth.png",
            "--middle", tmp_path / "middle.png",
            "--worst", tmp_path / "worst.png", "--out", out)
    assert r.exit_code == 0, r.output
    lines = out.read_text().splitlines()
    assert lines[0].startswith("metric,mono,")
    assert len(lines) == 21


def test_study_ranges_rejects_overlapping_worst(tmp_path):
    save_mask(tmp_path / "truth.png", block(64, 64, (4, 19), (4, 19)))
    save_mask(tmp_path / "middle.png", block(64, 64, (9, 24), (9, 24)))
    r = run("study", "ranges", "--truth", tmp_path / "truth.png",
            "--middle", tmp_path / "middle.png",
            "--worst", tmp_path / "middle.png",
            "--out", tmp_path / "out.csv")
    assert r.exit_code != 0
    assert "worst-case" in r.output


def test_study_tn(tmp_path):
    setup_inputs(tmp_path)
    out = tmp_path / "table5_tn.csv"
    r = run("study", "tn", "--truth", tmp_path / "truth.png",
            "--pred", tmp_path / "pred.png", "--paddings", "0,8,32",
            "--out", out)
    assert r.exit_code == 0, r.output
    assert "changed:" in r.output
    lines = out.read_text().splitlines()
    assert len(lines) == 5  # header + 3 paddings + changed row
    assert lines[-1].startswith("changed,")


def test_study_tn_bad_paddings(tmp_path):
    setup_inputs(tmp_path)
    r = run("study", "tn", "--truth", tmp_path / "truth.png",
            "--pred", tmp_path / "pred.png", "--paddings", "8,oops",
            "--out", tmp_path / "t.csv")
    assert r.exit_code != 0
    assert "--paddings" in r.output


def test_serve_rejects_bad_bind():
    r = run("serve", "--bind", "not-a-hostport")
    assert r.exit_code != 0


def test_serve_missing_ui_dir(tmp_path):
    r = run("serve", "--serve-ui", tmp_path / "nonexistent")
    assert r.exit_code != 0
    assert "build the frontend" in r.output
