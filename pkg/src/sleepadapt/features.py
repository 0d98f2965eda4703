"""Per-day session features (196 per subject-day).

Sleep side: total and night-sleep duration (hours), night-sleep onset and
offset (hours from the start of the assigned day, so a next-morning
offset exceeds 24), plus the 96 shared statistics. Wake side: the 96
shared statistics. For each signal and each per-epoch statistic s the
shared block holds:

* mean / median / sd of s over all epochs of the day's sessions of a kind;
* intercept and slope of s regressed on hours since session onset;
* intercept, linear and quadratic terms of the same regression.

Features that involve a standard deviation are stored as natural logs of
``max(value, 1e-6)``. For regressions of the SD statistic the log is taken
on the epoch values before fitting, since a log of a signed coefficient is
meaningless.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .ingest import STATS, EpochSeries, column_name
from .sessions import DAY, HOUR, Session

FEATURE_SIGNALS = ("HR", "TEMP", "ACC", "EDA")
KINDS = ("sleep", "wake")
AGGS = ("mean", "median", "sd")
SD_FLOOR = 1e-6
SLEEP_ONLY = ("sleep.duration.total", "sleep.duration.night", "sleep.night.onset", "sleep.night.offset")


def _block_names(kind: str) -> list[str]:
    names = []
    for sig in FEATURE_SIGNALS:
        for stat in STATS:
            base = f"{kind}.{sig}.{stat}"
            names += [f"{base}.{a}" for a in AGGS]
            names += [f"{base}.lin.coef{j}" for j in range(2)]
            names += [f"{base}.quad.coef{j}" for j in range(3)]
    return names


FEATURE_NAMES: tuple[str, ...] = tuple(list(SLEEP_ONLY) + _block_names("sleep") + _block_names("wake"))


def is_sd_feature(name: str) -> bool:
    parts = name.split(".")
    return "SD" in parts or "sd" in parts


def _logsd(x):
    return np.log(np.maximum(x, SD_FLOOR))


def poly_coefficients(x, y, degree: int) -> np.ndarray:
    """Least-squares polynomial coefficients, intercept first; NaN if underdetermined."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.unique(x).size <= degree:
        return np.full(degree + 1, np.nan)
    V = np.vander(x, degree + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(V, y, rcond=None)
    return coef


def _pooled(sessions: Sequence[Session], t: np.ndarray, usable: np.ndarray):
    """Epoch indices and hours-since-onset for a list of sessions."""
    idx, hrs = [], []
    for s in sessions:
        m = np.flatnonzero(usable & (t >= s.onset) & (t < s.offset))
        idx.append(m)
        hrs.append((t[m] - s.onset) / HOUR)
    if not idx:
        return np.array([], dtype=np.int64), np.array([])
    return np.concatenate(idx), np.concatenate(hrs)


def _block(kind, sessions, series: EpochSeries, usable) -> dict[str, float]:
    out: dict[str, float] = {}
    idx, hrs = _pooled(sessions, series.epoch_starts, usable)
    for sig in FEATURE_SIGNALS:
        for stat in STATS:
            base = f"{kind}.{sig}.{stat}"
            col = column_name(sig, stat)
            raw = series.column(col)[idx] if series.has(col) else np.full(idx.size, np.nan)
            fin = np.isfinite(raw)
            v, h = raw[fin], hrs[fin]
            if v.size:
                aggs = (v.mean(), np.median(v), v.std(ddof=1) if v.size > 1 else np.nan)
            else:
                aggs = (np.nan, np.nan, np.nan)
            for a, val in zip(AGGS, aggs):
                out[f"{base}.{a}"] = float(val)
            target = _logsd(v) if stat == "SD" else v
            lin = poly_coefficients(h, target, 1) if v.size else np.full(2, np.nan)
            quad = poly_coefficients(h, target, 2) if v.size else np.full(3, np.nan)
            for j in range(2):
                out[f"{base}.lin.coef{j}"] = float(lin[j])
            for j in range(3):
                out[f"{base}.quad.coef{j}"] = float(quad[j])
    return out


def extract_features(
    sessions: Sequence[Session],
    series: EpochSeries,
    day: int,
    usable: np.ndarray | None = None,
    day_origin: float = 0.0,
) -> dict[str, float]:
    """One feature row for ``day``; values are NaN where undefined."""
    if usable is None:
        usable = ~series.na_mask
    row = dict.fromkeys(FEATURE_NAMES, float("nan"))
    sleep = [s for s in sessions if s.is_sleep and s.assigned_day == day]
    wake = [s for s in sessions if not s.is_sleep and s.assigned_day == day]
    day_start = day_origin + day * DAY

    if sleep:
        row["sleep.duration.total"] = sum(s.duration for s in sleep) / HOUR
        night = [s for s in sleep if s.is_night_sleep]
        row["sleep.duration.night"] = night[0].duration / HOUR if night else 0.0
        if night:
            row["sleep.night.onset"] = (night[0].onset - day_start) / HOUR
            row["sleep.night.offset"] = (night[0].offset - day_start) / HOUR
        row.update(_block("sleep", sleep, series, usable))
    if wake:
        row.update(_block("wake", wake, series, usable))

    for k, v in row.items():
        if is_sd_feature(k) and ".lin." not in k and ".quad." not in k and math.isfinite(v):
            row[k] = float(_logsd(v))
    return row


@dataclass
class FeatureTable:
    rows: list[tuple[str, int]]
    values: np.ndarray  # len(rows) x 196
    columns: tuple[str, ...] = FEATURE_NAMES

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]

    def for_day(self, day: int) -> "FeatureTable":
        keep = [i for i, (_, d) in enumerate(self.rows) if d == day]
        return FeatureTable([self.rows[i] for i in keep], self.values[keep], self.columns)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["subject", "day", *self.columns])
            for (subj, day), vals in zip(self.rows, self.values):
                w.writerow([subj, day, *("NA" if not math.isfinite(x) else repr(float(x)) for x in vals)])

    @classmethod
    def from_csv(cls, path) -> "FeatureTable":
        with open(path, newline="") as fh:
            r = csv.reader(fh)
            header = next(r)
            body = list(r)
        cols = tuple(header[2:])
        rows = [(b[0], int(b[1])) for b in body]
        vals = np.array([[np.nan if x == "NA" else float(x) for x in b[2:]] for b in body]).reshape(
            len(body), len(cols)
        )
        return cls(rows, vals, cols)


def build_table(
    subjects: Mapping[str, tuple[Sequence[Session], EpochSeries, np.ndarray]],
    days: Iterable[int] | None = None,
    day_origin: float = 0.0,
) -> FeatureTable:
    """Feature rows for every subject (sorted by id) and day."""
    rows, vals = [], []
    for subj in sorted(subjects):
        sessions, series, usable = subjects[subj]
        subj_days = sorted({s.assigned_day for s in sessions if s.assigned_day is not None})
        for d in days if days is not None else subj_days:
            feat = extract_features(sessions, series, d, usable, day_origin)
            rows.append((subj, d))
            vals.append([feat[c] for c in FEATURE_NAMES])
    return FeatureTable(rows, np.array(vals, dtype=float).reshape(len(rows), len(FEATURE_NAMES)))
