"""End-to-end orchestration: config, per-subject detection, cohort outputs.

Run directory layout::

    run_metadata.json       config, config hash, seed, package versions
    report.json             per-subject status and final epoch-status counts
    features.csv            cohort feature table (usable subjects only)
    subjects/<id>/
        epochs.csv          epoch statistics
        cutoffs.json        screening rules and abnormal proportion
        hmm.json            selected HMM and every candidate's SI
        timeline.csv        epoch status before/after smoothing + provenance
        audit.jsonl         one line per sequential batch
        sessions.csv        sleep/wake sessions with assigned days
        excluded_categories.csv
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__, kernels
from .adaptive import LabeledTimeline, SequencerConfig, Status, sequential_label
from .anomaly import (
    DEFAULT_SCREENING,
    ScreeningVariable,
    categorize_excluded,
    category_counts,
    compute_rules,
    filter_epochs,
)
from .errors import ConfigError, DataError, SleepAdaptError
from .features import FEATURE_NAMES, FeatureTable, build_table
from .hmm import DEFAULT_POOL, ModelConfig, select_model
from .ingest import SIGNALS, STATS, EpochSeries, Manifest, SubjectEntry, load_subject, parse_variable
from .predict import ORDINAL_CLASSES, fit_continuation_ratio, fit_logistic, loocv_auc
from .sessions import (
    HOUR,
    Session,
    assign_day,
    median_smooth,
    partition_sessions,
    session_mask,
    sessions_from_csv,
    sessions_to_csv,
)

STATUS_NAMES = {int(s): s.name for s in Status}


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


def _check_variable(name: str) -> str:
    try:
        sig, stat = parse_variable(name)
    except (ValueError, SleepAdaptError) as exc:
        raise ConfigError(f"bad variable name {name!r}") from exc
    if sig not in SIGNALS or stat not in STATS:
        raise ConfigError(f"unknown variable {name!r}")
    return name


@dataclass(frozen=True)
class PipelineConfig:
    epoch_length: float = 60.0
    screening: tuple[ScreeningVariable, ...] = DEFAULT_SCREENING
    hmm_pool: tuple[ModelConfig, ...] = DEFAULT_POOL
    init_hours: float = 24.0
    sequencer: SequencerConfig = SequencerConfig()
    median_window: int = 5
    min_sleep: float | None = 3600.0
    min_prior_wake: float = 5 * HOUR
    night_window: tuple[float, float] = (20.0, 4.0)
    day_origin: float = 0.0
    clock_origin: float = 0.0
    unusable_threshold: float = 0.40
    seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        if not self.epoch_length > 0:
            raise ConfigError("epoch_length must be positive")
        if not self.init_hours > 0:
            raise ConfigError("init_hours must be positive")
        if self.median_window < 3 or self.median_window % 2 == 0:
            raise ConfigError("median_window must be odd and >= 3")
        if self.min_sleep is not None and self.min_sleep < 0:
            raise ConfigError("min_sleep must be >= 0")
        if not 0 < self.unusable_threshold <= 1:
            raise ConfigError("unusable_threshold must lie in (0, 1]")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not self.hmm_pool:
            raise ConfigError("hmm_pool is empty")
        for h in self.night_window:
            if not 0 <= h < 24:
                raise ConfigError("night_window hours must lie in [0, 24)")
        for sv in self.screening:
            _check_variable(sv.variable)
            if sv.abnormal_side not in (None, "low", "high"):
                raise ConfigError(f"abnormal_side must be low, high or null; got {sv.abnormal_side!r}")
        for mc in self.hmm_pool:
            for f in mc.features:
                _check_variable(f)

    def variables(self) -> set[str]:
        out = {sv.variable for sv in self.screening}
        for mc in self.hmm_pool:
            out.update(mc.features)
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "epoch_length": self.epoch_length,
            "screening": [{"variable": s.variable, "abnormal_side": s.abnormal_side} for s in self.screening],
            "hmm_pool": [{"features": list(m.features), "K": m.K} for m in self.hmm_pool],
            "init_hours": self.init_hours,
            "sequencer": {
                "batch_hours": self.sequencer.batch / HOUR,
                "window_hours": [w / HOUR for w in self.sequencer.windows],
                "gamma": self.sequencer.gamma,
                "min_per_class": self.sequencer.min_per_class,
            },
            "median_window": self.median_window,
            "min_sleep": 0.0 if self.min_sleep is None else self.min_sleep,
            "min_prior_wake_hours": self.min_prior_wake / HOUR,
            "night_window": list(self.night_window),
            "day_origin": self.day_origin,
            "clock_origin": self.clock_origin,
            "unusable_threshold": self.unusable_threshold,
            "seed": self.seed,
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "PipelineConfig":
        doc = dict(doc)
        known = set(cls().to_dict())
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw: dict[str, Any] = {}
        try:
            for key in ("epoch_length", "init_hours", "day_origin", "clock_origin", "unusable_threshold"):
                if key in doc:
                    kw[key] = float(doc[key])
            for key in ("median_window", "seed", "workers"):
                if key in doc:
                    kw[key] = int(doc[key])
            if "min_sleep" in doc:
                ms = float(doc["min_sleep"])
                kw["min_sleep"] = None if ms == 0 else ms
            if "min_prior_wake_hours" in doc:
                kw["min_prior_wake"] = float(doc["min_prior_wake_hours"]) * HOUR
            if "night_window" in doc:
                a, b = doc["night_window"]
                kw["night_window"] = (float(a), float(b))
            if "screening" in doc:
                kw["screening"] = tuple(
                    ScreeningVariable(str(s["variable"]), s.get("abnormal_side")) for s in doc["screening"]
                )
            if "hmm_pool" in doc:
                kw["hmm_pool"] = tuple(ModelConfig(tuple(m["features"]), int(m["K"])) for m in doc["hmm_pool"])
            if "sequencer" in doc:
                s = doc["sequencer"]
                extra = set(s) - {"batch_hours", "window_hours", "gamma", "min_per_class"}
                if extra:
                    raise ConfigError(f"unknown sequencer keys: {sorted(extra)}")
                d = SequencerConfig()
                kw["sequencer"] = SequencerConfig(
                    float(s.get("batch_hours", d.batch / HOUR)) * HOUR,
                    tuple(float(w) * HOUR for w in s.get("window_hours", [w / HOUR for w in d.windows])),
                    float(s.get("gamma", d.gamma)),
                    int(s.get("min_per_class", d.min_per_class)),
                )
        except (TypeError, KeyError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed config: {exc}") from exc
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            if path.suffix.lower() == ".toml":
                if sys.version_info >= (3, 11):
                    import tomllib
                else:
                    import tomli as tomllib
                doc = tomllib.loads(text)
            else:
                doc = json.loads(text)
        except ValueError as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from exc
        return cls.from_dict(doc)

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


# --------------------------------------------------------------------------
# per-subject detection
# --------------------------------------------------------------------------


@dataclass
class SubjectResult:
    subject_id: str
    status: str  # ok | unusable | failed
    error: str | None = None
    series: EpochSeries | None = None
    usable: np.ndarray | None = None
    sessions: list[Session] = field(default_factory=list)
    timeline: LabeledTimeline | None = None
    abnormal_proportion: float = float("nan")
    selected: str | None = None
    selected_si: float = float("nan")
    categories: dict[str, int] = field(default_factory=dict)
    final_counts: dict[str, int] = field(default_factory=dict)

    def report(self) -> dict[str, Any]:
        return {
            "id": self.subject_id,
            "status": self.status,
            "error": self.error,
            "n_epochs": 0 if self.series is None else len(self.series),
            "abnormal_proportion": None if math.isnan(self.abnormal_proportion) else self.abnormal_proportion,
            "selected_model": self.selected,
            "selected_si": None if math.isnan(self.selected_si) else self.selected_si,
            "excluded_categories": self.categories,
            "final_status_counts": self.final_counts,
        }


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _counts(status: np.ndarray) -> dict[str, int]:
    return {name: int((status == code).sum()) for code, name in STATUS_NAMES.items()}


def write_timeline(path: Path, tl: LabeledTimeline) -> None:
    smoothed = tl.smoothed if tl.smoothed is not None else tl.status
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch_start", "status", "smoothed", "provenance"])
        for t, s, m, p in zip(tl.epoch_starts, tl.status, smoothed, tl.provenance):
            w.writerow([repr(float(t)), STATUS_NAMES[int(s)], STATUS_NAMES[int(m)], int(p)])


def read_timeline(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (epoch_starts, raw status codes, smoothed status codes)."""
    codes = {v: k for k, v in STATUS_NAMES.items()}
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    t = np.array([float(r["epoch_start"]) for r in rows])
    s = np.array([codes[r["status"]] for r in rows], dtype=np.int8)
    m = np.array([codes[r["smoothed"]] for r in rows], dtype=np.int8)
    return t, s, m


def detect_subject(entry: SubjectEntry, cfg: PipelineConfig, out_dir: Path | None = None) -> SubjectResult:
    """Run the full labelling chain for one subject; errors are captured."""
    res = SubjectResult(entry.subject_id, "failed")
    sdir = None
    if out_dir is not None:
        sdir = Path(out_dir) / "subjects" / entry.subject_id
        sdir.mkdir(parents=True, exist_ok=True)
    try:
        series = load_subject(entry, cfg.epoch_length)
        res.series = series
        if sdir is not None:
            series.to_csv(sdir / "epochs.csv")
        missing = sorted(v for v in cfg.variables() if not series.has(v))
        if missing:
            raise DataError(f"missing variables {missing}")

        rules = compute_rules(series, cfg.screening, cfg.seed)
        fr = filter_epochs(series, rules)
        res.abnormal_proportion = fr.abnormal_proportion
        unusable = fr.abnormal_proportion > cfg.unusable_threshold
        if sdir is not None:
            _write_json(
                sdir / "cutoffs.json",
                {
                    "rules": [r.to_json() for r in rules],
                    "n_epochs": len(series),
                    "n_na": int(series.na_mask.sum()),
                    "n_clean": int(fr.clean_mask.sum()),
                    "n_excluded": int(fr.excluded_mask.sum()),
                    "abnormal_proportion": fr.abnormal_proportion,
                    "unusable_threshold": cfg.unusable_threshold,
                    "unusable": bool(unusable),
                },
            )
        status = np.full(len(series), Status.NA, dtype=np.int8)
        status[fr.excluded_mask] = Status.ABNORMAL
        if unusable:
            res.status = "unusable"
            status[fr.clean_mask] = -1
            res.final_counts = _counts(status)
            res.final_counts["UNLABELED"] = int(fr.clean_mask.sum())
            return res

        t = series.epoch_starts
        init_end = series.origin + cfg.init_hours * HOUR - cfg.epoch_length
        init_rows = np.flatnonzero(fr.clean_mask & (t <= init_end))
        sel = select_model(cfg.hmm_pool, series, init_rows, cfg.seed)
        res.selected, res.selected_si = sel.config.label(), sel.si
        if sdir is not None:
            _write_json(
                sdir / "hmm.json",
                {
                    "selected": sel.config.label(),
                    "si": sel.si,
                    "model": sel.model.to_json(),
                    "candidates": [c.to_json() for c in sel.candidates],
                },
            )

        init_labels = np.full(len(series), -1, dtype=np.int64)
        init_labels[init_rows] = sel.labels
        tl = sequential_label(
            series,
            sel.config.features,
            init_labels,
            init_end,
            cfg.sequencer,
            usable=fr.clean_mask,
            excluded=fr.excluded_mask,
        )
        smoothed_bin = median_smooth(tl.binary(), cfg.median_window)
        smoothed = tl.status.copy()
        lab = smoothed_bin >= 0
        smoothed[lab] = smoothed_bin[lab]
        tl.smoothed = smoothed
        res.timeline = tl

        sessions = partition_sessions(smoothed_bin, t, cfg.epoch_length, cfg.min_sleep, cfg.median_window)
        sessions = assign_day(sessions, cfg.day_origin, cfg.clock_origin, cfg.min_prior_wake, cfg.night_window)
        res.sessions = sessions
        res.usable = fr.clean_mask

        excluded = series.select(fr.excluded_mask)
        wake_ref = series.select(fr.clean_mask & session_mask(sessions, t, "wake"))
        cats = (
            categorize_excluded(excluded, wake_ref)
            if len(excluded)
            else np.array([], dtype=object)
        )
        res.categories = category_counts(cats)
        res.final_counts = _counts(smoothed)
        if sdir is not None:
            write_timeline(sdir / "timeline.csv", tl)
            tl.write_audit(sdir / "audit.jsonl")
            sessions_to_csv(sdir / "sessions.csv", [(entry.subject_id, s) for s in sessions])
            with open(sdir / "excluded_categories.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["epoch_start", "category"])
                for ts, c in zip(excluded.epoch_starts, cats):
                    w.writerow([repr(float(ts)), c])
        res.status = "ok"
    except (SleepAdaptError, OSError, ValueError) as exc:
        res.status = "failed"
        res.error = f"{type(exc).__name__}: {exc}"
    return res


def _detect_star(args):
    entry, cfg, out = args
    return detect_subject(entry, cfg, out)


# --------------------------------------------------------------------------
# cohort run
# --------------------------------------------------------------------------


def select_subjects(manifest: Manifest, subjects: Sequence[str] | None) -> list[SubjectEntry]:
    entries = sorted(manifest.subjects, key=lambda e: e.subject_id)
    ids = [e.subject_id for e in entries]
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate subject ids in manifest")
    if subjects:
        unknown = sorted(set(subjects) - set(ids))
        if unknown:
            raise ConfigError(f"subjects not in manifest: {unknown}")
        entries = [e for e in entries if e.subject_id in set(subjects)]
    return entries


def run_metadata(cfg: PipelineConfig, subjects: Sequence[str]) -> dict[str, Any]:
    from importlib.metadata import version

    return {
        "config": cfg.to_dict(),
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "subjects": list(subjects),
        "versions": {
            "sleepadapt": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": version("scipy"),
            "click": version("click"),
        },
        "kernel_backend": kernels.BACKEND,
    }


@dataclass
class RunResult:
    results: list[SubjectResult]
    table: FeatureTable

    @property
    def n_failed(self) -> int:
        return sum(r.status == "failed" for r in self.results)

    @property
    def exit_code(self) -> int:
        return 1 if self.n_failed else 0


def run_pipeline(
    manifest: Manifest, cfg: PipelineConfig, out, subjects: Sequence[str] | None = None
) -> RunResult:
    """Detect every subject, then write the cohort feature table and report."""
    out = Path(out)
    entries = select_subjects(manifest, subjects)
    if manifest.epoch_length != cfg.epoch_length:
        raise ConfigError(
            f"manifest epoch_length {manifest.epoch_length} != config epoch_length {cfg.epoch_length}"
        )
    available = set().union(*(e.signals for e in entries)) if entries else set()
    needed = {parse_variable(v)[0] for v in cfg.variables()}
    if not needed <= available:
        raise ConfigError(f"config references signals absent from the manifest: {sorted(needed - available)}")
    out.mkdir(parents=True, exist_ok=True)

    jobs = [(e, cfg, out) for e in entries]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, len(jobs))) as ex:
            results = list(ex.map(_detect_star, jobs))
    else:
        results = [_detect_star(j) for j in jobs]

    ok = {r.subject_id: (r.sessions, r.series, r.usable) for r in results if r.status == "ok"}
    table = build_table(ok, day_origin=cfg.day_origin)
    table.to_csv(out / "features.csv")
    _write_json(out / "run_metadata.json", run_metadata(cfg, [e.subject_id for e in entries]))
    _write_json(
        out / "report.json",
        {
            "subjects": [r.report() for r in results],
            "n_failed": sum(r.status == "failed" for r in results),
            "n_unusable": sum(r.status == "unusable" for r in results),
            "unusable_subjects": [r.subject_id for r in results if r.status == "unusable"],
        },
    )
    return RunResult(results, table)


def load_subject_outputs(run_dir, subject_id: str):
    """Re-read a detected subject: (series, sessions, usable, smoothed status)."""
    sdir = Path(run_dir) / "subjects" / subject_id
    series = EpochSeries.from_csv(sdir / "epochs.csv", subject_id)
    _, status, smoothed = read_timeline(sdir / "timeline.csv")
    sessions = [s for _, s in sessions_from_csv(sdir / "sessions.csv")]
    usable = status <= Status.SLEEP
    return series, sessions, usable, smoothed


def ok_subjects(run_dir) -> list[str]:
    doc = json.loads((Path(run_dir) / "report.json").read_text())
    return [s["id"] for s in doc["subjects"] if s["status"] == "ok"]


def features_from_run(
    run_dir, day: int | None = None, subjects: Sequence[str] | None = None, day_origin: float = 0.0
) -> FeatureTable:
    ids = ok_subjects(run_dir)
    if subjects:
        unknown = sorted(set(subjects) - set(ids))
        if unknown:
            raise ConfigError(f"subjects not detected successfully in {run_dir}: {unknown}")
        ids = [i for i in ids if i in set(subjects)]
    data = {}
    for sid in ids:
        series, sessions, usable, _ = load_subject_outputs(run_dir, sid)
        data[sid] = (sessions, series, usable)
    return build_table(data, None if day is None else [day], day_origin)


# --------------------------------------------------------------------------
# diagnostics
# --------------------------------------------------------------------------


@dataclass
class PcaResult:
    scores: np.ndarray  # n x 2, one row per non-NA epoch
    rows: np.ndarray  # epoch indices of the scored epochs
    explained: np.ndarray  # explained-variance ratio of every component
    columns: tuple[str, ...]
    dropped: tuple[str, ...]


def pca_diagnostics(series: EpochSeries, variables: Sequence[str] | None = None) -> PcaResult:
    """First two principal-component scores of the standardised statistics.

    Constant columns are dropped (and reported) before scaling.
    """
    cols = tuple(variables or series.columns)
    rows = np.flatnonzero(~series.na_mask)
    if rows.size < 3:
        raise DataError("PCA needs at least 3 non-NA epochs")
    X = series.matrix(cols)[rows]
    fin = np.isfinite(X).all(axis=1)
    rows, X = rows[fin], X[fin]
    if rows.size < 3:
        raise DataError("PCA needs at least 3 complete epochs")
    sd = X.std(axis=0, ddof=1)
    keep = sd > 1e-12 * np.maximum(1.0, np.abs(X).max(axis=0))
    dropped = tuple(c for c, k in zip(cols, keep) if not k)
    X = X[:, keep]
    if X.shape[1] < 2:
        raise DataError(f"PCA rank < 2 after dropping constant columns {dropped}")
    Z = (X - X.mean(axis=0)) / sd[keep]
    U, S, Vt = np.linalg.svd(Z, full_matrices=False)
    tol = S.max() * max(Z.shape) * np.finfo(float).eps
    if (S > tol).sum() < 2:
        raise DataError("PCA rank < 2")
    # deterministic sign: largest-magnitude loading positive
    for j in range(Vt.shape[0]):
        if Vt[j, np.argmax(np.abs(Vt[j]))] < 0:
            Vt[j] *= -1
            U[:, j] *= -1
    var = S**2
    return PcaResult(U[:, :2] * S[:2], rows, var / var.sum(), tuple(c for c, k in zip(cols, keep) if k), dropped)


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------


@dataclass
class Outcomes:
    binary: dict[str, int]
    ordinal: dict[str, int]


def read_outcomes(path) -> Outcomes:
    """CSV with header ``subject,binary,ordinal``; blank or NA marks missing."""
    binary, ordinal = {}, {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "subject" not in reader.fieldnames:
            raise ConfigError(f"{path}: labels file needs a 'subject' column")
        for r in reader:
            sid = r["subject"]
            for key, dest in (("binary", binary), ("ordinal", ordinal)):
                v = (r.get(key) or "").strip()
                if v and v.upper() != "NA":
                    dest[sid] = int(v)
    return Outcomes(binary, ordinal)


@dataclass
class Evaluation:
    binary: list[dict[str, Any]]
    ordinal: list[dict[str, Any]]
    top: list[str]
    correlation: np.ndarray

    def write(self, out) -> None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        _write_rows(out / "binary_results.csv", self.binary)
        _write_rows(out / "ordinal_results.csv", self.ordinal)
        with open(out / "correlation.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["feature", *self.top])
            for name, row in zip(self.top, self.correlation):
                w.writerow([name, *(_fmt(v) for v in row)])


def _fmt(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float) and not math.isfinite(v):
        return "NA"
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def _write_rows(path: Path, rows: list[dict[str, Any]]) -> None:
    with open(path, "w", newline="") as fh:
        if not rows:
            return
        w = csv.writer(fh)
        w.writerow(list(rows[0]))
        for r in rows:
            w.writerow([_fmt(v) for v in r.values()])


def _usable_feature(x: np.ndarray) -> bool:
    return x.size >= 4 and np.ptp(x) > 0


def evaluate(table: FeatureTable, outcomes: Outcomes, day: int, n_top: int = 3) -> Evaluation:
    """Per-feature marginal models for ``day``, ranked by LOOCV AUC."""
    tab = table.for_day(day)
    if not tab.rows:
        raise DataError(f"feature table has no rows for day {day}")
    subjects = [s for s, _ in tab.rows]
    labelled = set(outcomes.binary) | set(outcomes.ordinal)
    unmatched = sorted(labelled.symmetric_difference(subjects))
    if unmatched:
        raise DataError(f"unmatched subject ids between features and labels: {unmatched}")

    binary_rows, ordinal_rows = [], []
    yb = np.array([outcomes.binary.get(s, -1) for s in subjects])
    yo = np.array([outcomes.ordinal.get(s, -1) for s in subjects])
    for j, name in enumerate(tab.columns):
        col = tab.values[:, j]
        m = np.isfinite(col) & (yb >= 0)
        row = {"feature": name, "n": int(m.sum()), "coef": math.nan, "auc": math.nan, "separated": False}
        if _usable_feature(col[m]) and 0 < yb[m].sum() < m.sum():
            fit = fit_logistic(col[m], yb[m], name)
            row["coef"], row["separated"] = fit.beta1, fit.separated
            row["auc"] = loocv_auc(col[m], yb[m], "binary").auc
        binary_rows.append(row)

        m = np.isfinite(col) & (yo >= 1)
        orow: dict[str, Any] = {"feature": name, "n": int(m.sum()), "coef_j1": math.nan, "coef_j2": math.nan}
        orow.update({f"auc_{c.lower()}": math.nan for c in ORDINAL_CLASSES})
        if _usable_feature(col[m]) and all((yo[m] == k).any() for k in (1, 2, 3)):
            try:
                cr = fit_continuation_ratio(col[m], yo[m], name)
                orow["coef_j1"], orow["coef_j2"] = cr.level1.beta1, cr.level2.beta1
                res = loocv_auc(col[m], yo[m], "ordinal")
                for c in ORDINAL_CLASSES:
                    orow[f"auc_{c.lower()}"] = res.auc[c]
            except SleepAdaptError:
                pass
        ordinal_rows.append(orow)

    def key_b(r):
        return -r["auc"] if math.isfinite(r["auc"]) else math.inf

    def key_o(r):
        v = [r[f"auc_{c.lower()}"] for c in ORDINAL_CLASSES]
        v = [x for x in v if math.isfinite(x)]
        return -float(np.mean(v)) if v else math.inf

    binary_rows.sort(key=key_b)
    ordinal_rows.sort(key=key_o)
    top = [r["feature"] for r in binary_rows[:n_top] if math.isfinite(r["auc"])]
    corr = feature_correlation(tab, top)
    return Evaluation(binary_rows, ordinal_rows, top, corr)


def feature_correlation(table: FeatureTable, names: Sequence[str]) -> np.ndarray:
    """Pearson correlations over pairwise-complete rows."""
    k = len(names)
    out = np.eye(k)
    cols = [table.column(n) for n in names]
    for a in range(k):
        for b in range(a + 1, k):
            m = np.isfinite(cols[a]) & np.isfinite(cols[b])
            r = np.corrcoef(cols[a][m], cols[b][m])[0, 1] if m.sum() > 2 else math.nan
            out[a, b] = out[b, a] = r
    return out


__all__ = [
    "FEATURE_NAMES",
    "PipelineConfig",
    "SubjectResult",
    "RunResult",
    "detect_subject",
    "run_pipeline",
    "features_from_run",
    "pca_diagnostics",
    "read_outcomes",
    "evaluate",
]
