"""Command-line entry point.

Exit codes: 0 success, 1 one or more subjects (or the requested
computation) failed, 2 configuration / usage error.
"""
from __future__ import annotations

import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import click

from . import synth
from .adaptive import marginal_si_screen, recommend_variables
from .errors import ConfigError, SleepAdaptError
from .features import FeatureTable
from .ingest import Manifest, load_subject
from .pipeline import (
    STATUS_NAMES,
    PipelineConfig,
    evaluate as evaluate_features,
    features_from_run,
    load_subject_outputs,
    ok_subjects,
    pca_diagnostics,
    read_outcomes,
    run_pipeline,
    select_subjects,
)

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2


def _subjects(value: str | None) -> list[str] | None:
    if not value:
        return None
    return [s.strip() for s in value.split(",") if s.strip()]


def _config(path: str | None, seed: int | None) -> PipelineConfig:
    cfg = PipelineConfig.load(path) if path else PipelineConfig()
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    return cfg


def _fail(msg: str, code: int) -> None:
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


config_opt = click.option("--config", "config_path", type=click.Path(dir_okay=False), help="JSON or TOML config.")
manifest_opt = click.option("--manifest", type=click.Path(dir_okay=False), help="Cohort manifest JSON.")
seed_opt = click.option("--seed", type=int, default=None, help="Override the config seed.")
subjects_opt = click.option("--subjects", default=None, help="Comma-separated subject ids (default: all).")


@click.group()
def main() -> None:
    """Adaptive sleep/wake detection for wearable recordings."""


@main.command()
@manifest_opt
@config_opt
@click.option("--out", required=True, type=click.Path(file_okay=False))
@subjects_opt
def ingest(manifest, config_path, out, subjects):
    """Summarise raw signals into epoch statistics (subjects/<id>/epochs.csv)."""
    try:
        cfg = _config(config_path, None)
        if not manifest:
            raise ConfigError("--manifest is required")
        man = Manifest.load(manifest)
        entries = select_subjects(man, _subjects(subjects))
    except ConfigError as exc:
        _fail(str(exc), EXIT_CONFIG)
    failed = 0
    for e in entries:
        sdir = Path(out) / "subjects" / e.subject_id
        sdir.mkdir(parents=True, exist_ok=True)
        try:
            series = load_subject(e, cfg.epoch_length)
            series.to_csv(sdir / "epochs.csv")
            click.echo(f"{e.subject_id}: {len(series)} epochs, {int(series.na_mask.sum())} NA")
        except (SleepAdaptError, OSError, ValueError) as exc:
            failed += 1
            click.echo(f"{e.subject_id}: FAILED {exc}", err=True)
    sys.exit(EXIT_PARTIAL if failed else EXIT_OK)


@main.command()
@manifest_opt
@config_opt
@click.option("--out", required=True, type=click.Path(file_okay=False))
@seed_opt
@subjects_opt
def detect(manifest, config_path, out, seed, subjects):
    """Run screening, HMM bootstrap, sequential labelling, sessions and features."""
    try:
        cfg = _config(config_path, seed)
        if not manifest:
            raise ConfigError("--manifest is required")
        result = run_pipeline(Manifest.load(manifest), cfg, out, _subjects(subjects))
    except ConfigError as exc:
        _fail(str(exc), EXIT_CONFIG)
    for r in result.results:
        extra = r.error or (f"abnormal {r.abnormal_proportion:.3f}" if r.status != "failed" else "")
        click.echo(f"{r.subject_id}: {r.status} {extra}".rstrip())
    sys.exit(result.exit_code)


@main.command()
@config_opt
@click.option("--out", required=True, type=click.Path(file_okay=False), help="Directory written by `detect`.")
@click.option("--day", type=int, default=None, help="Only this study day.")
@subjects_opt
def features(config_path, out, day, subjects):
    """Rebuild the feature table from a detection run (features.csv or features_day<D>.csv)."""
    try:
        cfg = _config(config_path, None)
        if not (Path(out) / "report.json").exists():
            raise ConfigError(f"{out} is not a detection run directory")
        table = features_from_run(out, day, _subjects(subjects), cfg.day_origin)
    except ConfigError as exc:
        _fail(str(exc), EXIT_CONFIG)
    name = "features.csv" if day is None else f"features_day{day}.csv"
    table.to_csv(Path(out) / name)
    click.echo(f"{len(table.rows)} rows x {len(table.columns)} features -> {Path(out) / name}")


@main.command()
@click.option("--features", "features_path", required=True, type=click.Path(dir_okay=False))
@click.option("--labels", "labels_path", required=True, type=click.Path(dir_okay=False))
@click.option("--day", type=int, required=True)
@click.option("--out", required=True, type=click.Path(file_okay=False))
def evaluate(features_path, labels_path, day, out):
    """Per-feature logistic / continuation-ratio models scored by LOOCV AUC."""
    try:
        table = FeatureTable.from_csv(features_path)
        outcomes = read_outcomes(labels_path)
    except (ConfigError, OSError) as exc:
        _fail(str(exc), EXIT_CONFIG)
    try:
        ev = evaluate_features(table, outcomes, day)
    except SleepAdaptError as exc:
        _fail(str(exc), EXIT_PARTIAL)
    ev.write(out)
    click.echo("feature\tcoef\tAUC")
    for r in ev.binary[:10]:
        click.echo(f"{r['feature']}\t{r['coef']:.4g}\t{r['auc']:.3f}")


@main.command()
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--seed", type=int, default=0)
@click.option("--subjects", "n_subjects", type=int, default=6, help="Number of subjects to simulate.")
@click.option("--days", type=int, default=4)
@click.option("--abnormal-fraction", type=float, default=0.08)
@click.option("--shedders", type=int, default=0, help="Subjects (the first N) that lose sleep on --day.")
@click.option("--day", "effect_day", type=int, default=0)
def simulate(out, seed, n_subjects, days, abnormal_fraction, shedders, effect_day):
    """Write a synthetic cohort (signal CSVs, manifest, truth, labels.csv)."""
    if n_subjects < 1 or days < 2 or not 0 <= abnormal_fraction < 1 or not 0 <= shedders <= n_subjects:
        _fail("invalid simulation parameters", EXIT_CONFIG)
    cfgs = synth.cohort(n_subjects, seed, days, abnormal_fraction, range(shedders), effect_day)
    # later shedders lose less sleep and map to later ordinal classes
    for i in range(shedders):
        level = 1 + (i % 3)
        cfgs[i].sleep_hours_by_day = {effect_day: cfgs[i].sleep_hours - (4 - level)}
    path = synth.write_cohort(cfgs, out)
    with open(Path(out) / "labels.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subject", "binary", "ordinal"])
        for i, c in enumerate(cfgs):
            w.writerow([c.subject_id, int(i < shedders), 1 + (i % 3) if i < shedders else "NA"])
    click.echo(f"manifest -> {path}")


@main.command()
@click.option("--out", type=click.Path(file_okay=False), default=None)
@click.option("--seed", type=int, default=0, help="First seed.")
@click.option("--n-seeds", type=int, default=100)
@click.option("--n-per-class", type=int, default=100)
@click.option("--mu", "mus", type=float, multiple=True, default=(0.0, 1.5, 3.0))
def fig3(out, seed, n_seeds, n_per_class, mus):
    """Seed-averaged SI under projection and Euclidean distance for BVN classes."""
    if n_seeds < 1 or n_per_class < 2:
        _fail("need n_seeds >= 1 and n_per_class >= 2", EXIT_CONFIG)
    seeds = range(seed, seed + n_seeds)
    rows = [(mu, *synth.fig3_experiment(mu, n_per_class, seeds)) for mu in mus]
    click.echo(f"n_per_class={n_per_class} seeds={n_seeds}")
    click.echo("mu\tSI_projection\tSI_euclidean")
    for mu, s1, s2 in rows:
        click.echo(f"{mu:g}\t{s1:.4f}\t{s2:.4f}")
    if out:
        o = Path(out)
        o.mkdir(parents=True, exist_ok=True)
        with open(o / "fig3.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["mu", "n_per_class", "n_seeds", "si_projection", "si_euclidean"])
            for mu, s1, s2 in rows:
                w.writerow([repr(mu), n_per_class, n_seeds, repr(s1), repr(s2)])
        with open(o / "fig3_points.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["mu", "x1", "x2", "label"])
            for mu in mus:
                X, y = synth.fig3_sample(mu, n_per_class, seed)
                for (a, b), lab in zip(X, y):
                    w.writerow([repr(mu), repr(float(a)), repr(float(b)), int(lab)])


@main.command()
@config_opt
@click.option("--out", required=True, type=click.Path(file_okay=False), help="Directory written by `detect`.")
@subjects_opt
def diagnose(config_path, out, subjects):
    """PCA scores per epoch and marginal SI screening (written to <out>/diagnostics)."""
    try:
        cfg = _config(config_path, None)
        if not (Path(out) / "report.json").exists():
            raise ConfigError(f"{out} is not a detection run directory")
        ids = ok_subjects(out)
        want = _subjects(subjects)
        if want:
            unknown = sorted(set(want) - set(ids))
            if unknown:
                raise ConfigError(f"subjects not detected successfully: {unknown}")
            ids = [i for i in ids if i in set(want)]
    except ConfigError as exc:
        _fail(str(exc), EXIT_CONFIG)
    ddir = Path(out) / "diagnostics"
    ddir.mkdir(parents=True, exist_ok=True)
    tables, failed = [], 0
    summary = {}
    for sid in ids:
        series, _, usable, smoothed = load_subject_outputs(out, sid)
        try:
            pca = pca_diagnostics(series)
            with open(ddir / f"{sid}_pca.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["epoch_start", "status", "pc1", "pc2"])
                for r, (a, b) in zip(pca.rows, pca.scores):
                    w.writerow([repr(float(series.epoch_starts[r])), STATUS_NAMES[int(smoothed[r])], repr(float(a)), repr(float(b))])
            rows = marginal_si_screen(series, clock_origin=cfg.clock_origin, usable=usable)
            tables.append(rows)
            summary[sid] = {
                "explained_variance": pca.explained[:2].tolist(),
                "dropped_constant": list(pca.dropped),
                "screen": {r.variable: {"si": r.si, "zero_fraction": r.zero_fraction} for r in rows},
            }
        except SleepAdaptError as exc:
            failed += 1
            summary[sid] = {"error": f"{type(exc).__name__}: {exc}"}
            click.echo(f"{sid}: FAILED {exc}", err=True)
    rec = recommend_variables(tables) if tables else []
    with open(ddir / "screening.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["variable", "mean_si", "recommended"])
        for v, si, ok in rec:
            w.writerow([v, repr(si), int(ok)])
    (ddir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    for v, si, ok in rec:
        click.echo(f"{v}\t{si:.3f}\t{'*' if ok else ''}")
    sys.exit(EXIT_PARTIAL if failed else EXIT_OK)


if __name__ == "__main__":  # pragma: no cover
    main()
