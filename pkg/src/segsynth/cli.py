"""Command line entry points.

    segsynth synth     --truth t.png --config segmentors.json --seed 42 --out outdir
    segsynth evaluate  --truth t.png --pred p.png --out report.json
    segsynth study run --corpus masks/ --configs segmentors.json --seed 42 --out store/
    segsynth study rank --store store/
    segsynth study correlate --store store/ --threshold 0.95
    segsynth study ranges --truth t.png --middle m.png --worst w.png
    segsynth study tn --truth t.png --pred p.png --paddings 0,8,32
    segsynth serve     --bind 127.0.0.1:8080 --session-ttl 3600

Every command exits non-zero with a one-line message on engine errors.
"""

import functools
import json
from pathlib import Path

import click

from .errors import SegsynthError
from .mask_io import load_mask, save_mask
from .metrics import evaluate_all
from .study import (
    group_metrics,
    range_experiment,
    rank_correlation,
    run_battery,
    store_rank_table,
    tn_experiment,
)
from .synth import derive_cell_seed, load_segmentor_configs, synthesize

MAX_SEED = 2**64 - 1

_mask_in = click.Path(exists=True, dir_okay=False, path_type=Path)
_dir_in = click.Path(exists=True, file_okay=False, path_type=Path)
_out_path = click.Path(dir_okay=False, path_type=Path)


def friendly_errors(fn):
    """Engine and input errors become clean CLI failures, not tracebacks."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (SegsynthError, ValueError, OSError, json.JSONDecodeError) as exc:
            raise click.ClickException(str(exc)) from exc

    return wrapper


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")


@click.group()
@click.version_option(package_name="segsynth")
def main():
    """Synthesize segmentation errors and evaluate segmentation metrics."""


@main.command()
@click.option("--truth", required=True, type=_mask_in, help="Truth mask (PNG or PGM).")
@click.option("--config", "config_path", required=True, type=_mask_in,
              help="Segmentor config JSON (one object or a list).")
@click.option("--seed", required=True, type=click.IntRange(0, MAX_SEED),
              help="Master seed; each segmentor gets a derived stream.")
@click.option("--out", "out_dir", required=True,
              type=click.Path(file_okay=False, path_type=Path))
@friendly_errors
def synth(truth: Path, config_path: Path, seed: int, out_dir: Path):
    """Synthesize one segmentation per configured segmentor.

    Writes <truth-stem>__<segmentor-id> mask files in the truth's format,
    each with a provenance JSON alongside. Seeding matches `study run`:
    the per-output stream is derived from (seed, truth stem, segmentor id).
    """
    mask = load_mask(truth)
    configs = load_segmentor_configs(config_path)
    fmt = truth.suffix.lower().lstrip(".") or "png"
    out_dir.mkdir(parents=True, exist_ok=True)
    pid = truth.stem
    for cfg in configs:
        cell_seed = derive_cell_seed(seed, pid, cfg.id)
        result = synthesize(mask, cfg, cell_seed)
        stem = out_dir / f"{pid}__{cfg.id}"
        mask_path = stem.with_suffix(f".{fmt}")
        save_mask(mask_path, result.mask)
        _write_json(stem.with_suffix(".provenance.json"), result.provenance)
        click.echo(f"wrote {mask_path}")


@main.command()
@click.option("--truth", required=True, type=_mask_in)
@click.option("--pred", required=True, type=_mask_in)
@click.option("--out", "out_path", required=True, type=_out_path,
              help="Report destination; .json or .csv by extension.")
@friendly_errors
def evaluate(truth: Path, pred: Path, out_path: Path):
    """Score a prediction against a truth mask with all twenty metrics."""
    report = evaluate_all(load_mask(truth), load_mask(pred))
    suffix = out_path.suffix.lower()
    if suffix == ".json":
        _write_json(out_path, report.to_dict())
    elif suffix == ".csv":
        out_path.write_text(report.csv_header() + "\n" + report.csv_row() + "\n",
                            encoding="utf-8")
    else:
        raise click.ClickException(f"--out must end in .json or .csv, got {out_path}")
    click.echo(f"wrote {out_path}")


@main.group()
def study():
    """Batch experiments: battery, ranking, correlation, range and TN tables."""


@study.command("run")
@click.option("--corpus", required=True, type=_dir_in,
              help="Directory of truth masks; file stem = patient id.")
@click.option("--configs", "configs_path", required=True, type=_mask_in)
@click.option("--seed", required=True, type=click.IntRange(0, MAX_SEED))
@click.option("--out", "out_dir", required=True,
              type=click.Path(file_okay=False, path_type=Path))
@friendly_errors
def study_run(corpus: Path, configs_path: Path, seed: int, out_dir: Path):
    """Synthesize and evaluate every (patient, segmentor) cell into a store."""
    configs = load_segmentor_configs(configs_path)
    manifest = run_battery(corpus, configs, seed, out_dir)
    cells = manifest["cells"]
    failed = [c for c in cells if c["status"] != "ok"]
    click.echo(f"{len(cells)} cells -> {out_dir} ({len(failed)} failed)")
    for c in failed:
        click.echo(f"  {c['patient']}__{c['segmentor']}: "
                   f"[{c['stage']}] {c['message']}")


@study.command("rank")
@click.option("--store", required=True, type=_dir_in,
              help="Battery store produced by `study run`.")
@click.option("--out", "out_path", type=_out_path, default=None,
              help="Defaults to <store>/table3_mode_ranks.csv.")
@friendly_errors
def study_rank(store: Path, out_path):
    """Mode-aggregated per-metric segmentor ranks for a battery store."""
    table = store_rank_table(store)
    out_path = out_path or store / "table3_mode_ranks.csv"
    table.to_csv(out_path)
    click.echo(f"wrote {out_path}")


@study.command("correlate")
@click.option("--store", required=True, type=_dir_in)
@click.option("--threshold", type=click.FloatRange(0.0, 1.0, min_open=True),
              default=0.95, show_default=True,
              help="Minimum pairwise correlation within a group.")
@click.option("--out-matrix", type=_out_path, default=None,
              help="Defaults to <store>/corr_matrix.csv.")
@click.option("--out-groups", type=_out_path, default=None,
              help="Defaults to <store>/groups.json.")
@friendly_errors
def study_correlate(store: Path, threshold: float, out_matrix, out_groups):
    """Rank-correlation matrix and metric groups for a battery store."""
    table = store_rank_table(store)
    corr = rank_correlation(table)
    groups = group_metrics(corr, threshold=threshold)
    out_matrix = out_matrix or store / "corr_matrix.csv"
    out_groups = out_groups or store / "groups.json"
    corr.to_csv(out_matrix)
    _write_json(out_groups, groups.to_dict())
    click.echo(f"wrote {out_matrix}")
    click.echo(f"wrote {out_groups} ({len(groups.groups)} groups)")


@study.command("ranges")
@click.option("--truth", required=True, type=_mask_in)
@click.option("--best", type=_mask_in, default=None,
              help="Best-case prediction; defaults to the truth itself.")
@click.option("--middle", required=True, type=_mask_in,
              help="Partial-overlap prediction.")
@click.option("--worst", required=True, type=_mask_in,
              help="Prediction disjoint from the truth.")
@click.option("--out", "out_path", type=_out_path,
              default=Path("table4_ranges.csv"), show_default=True)
@friendly_errors
def study_ranges(truth: Path, best, middle: Path, worst: Path, out_path: Path):
    """Evaluate best/middle/worst cases and classify each metric's range."""
    truth_mask = load_mask(truth)
    best_mask = truth_mask if best is None else load_mask(best)
    result = range_experiment(truth_mask, best_mask, load_mask(middle),
                              load_mask(worst))
    result.to_csv(out_path)
    click.echo(f"wrote {out_path}")


@study.command("tn")
@click.option("--truth", required=True, type=_mask_in)
@click.option("--pred", required=True, type=_mask_in)
@click.option("--paddings", default="0,8,32", show_default=True,
              help="Comma-separated background borders, strictly increasing.")
@click.option("--out", "out_path", type=_out_path,
              default=Path("table5_tn.csv"), show_default=True)
@friendly_errors
def study_tn(truth: Path, pred: Path, paddings: str, out_path: Path):
    """Grow only the background and flag which metrics move."""
    try:
        pads = [int(tok) for tok in paddings.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise click.ClickException(f"bad --paddings {paddings!r}: {exc}") from exc
    result = tn_experiment(load_mask(truth), load_mask(pred), pads)
    result.to_csv(out_path)
    changed = [sym for sym, flag in result.changed.items() if flag]
    click.echo(f"wrote {out_path} (changed: {', '.join(changed) or 'none'})")


@main.command()
@click.option("--bind", default="127.0.0.1:8080", show_default=True,
              help="HOST:PORT to listen on.")
@click.option("--session-ttl", default=3600.0, show_default=True,
              type=click.FloatRange(0.0, min_open=True),
              help="Idle seconds before a session expires.")
@click.option("--serve-ui", "ui_dir", is_flag=False, flag_value="frontend/dist",
              default=None, type=click.Path(file_okay=False, path_type=Path),
              help="Also serve the static frontend from this directory "
                   "(bare flag: ./frontend/dist).")
@friendly_errors
def serve(bind: str, session_ttl: float, ui_dir):
    """Run the local HTTP service for the interactive frontend."""
    if ui_dir is not None and not Path(ui_dir).is_dir():
        raise click.ClickException(
            f"UI directory {ui_dir} not found; build the frontend first "
            "(npm run build in frontend/)")
    from .service import run_server

    run_server(bind=bind, session_ttl=session_ttl, ui_dir=ui_dir)


if __name__ == "__main__":
    main()
