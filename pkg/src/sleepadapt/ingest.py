"""Raw sensor streams -> fixed-length epochs of summary statistics.

Each signal is binned into non-overlapping epochs ``[t_j, t_j + L)`` on a
grid anchored at the study origin, and summarised by MEAN, MED and SD
(sample SD, n-1). An epoch is NA for the whole row when any signal has
fewer than 90% of its designed sample count (``sampling_hz * L``).
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataError

SIGNALS = ("ACC", "HR", "TEMP", "EDA")
STATS = ("MEAN", "MED", "SD")
CAPACITY_FRACTION = 0.9
DEFAULT_EPOCH_LENGTH = 60.0


def column_name(signal: str, stat: str) -> str:
    return f"{signal}_{stat}"


def parse_variable(name: str) -> tuple[str, str]:
    """``"HR_MED"`` or ``"HR MED"`` -> ``("HR", "MED")``."""
    parts = name.replace(" ", "_").split("_")
    if len(parts) != 2 or parts[1] not in STATS:
        raise ConfigError(f"not a (signal, stat) variable name: {name!r}")
    return parts[0], parts[1]


@dataclass(frozen=True)
class RawStream:
    """One signal's raw samples. ACC values are already the 3-axis norm."""

    signal_id: str
    timestamps: np.ndarray
    values: np.ndarray
    sampling_hz: float

    def __post_init__(self) -> None:
        t = np.asarray(self.timestamps, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "values", v)
        if not self.sampling_hz > 0:
            raise ConfigError(f"{self.signal_id}: sampling_hz must be positive")
        if t.ndim != 1 or t.shape != v.shape:
            raise DataError(f"{self.signal_id}: timestamps and values must be equal-length vectors")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            bad = int(np.argmin(np.diff(t) > 0)) + 1
            raise DataError(
                f"{self.signal_id}: timestamps not strictly increasing at sample {bad} (t={t[bad]!r})"
            )

    @classmethod
    def from_xyz(cls, timestamps, xyz, sampling_hz: float, signal_id: str = "ACC") -> "RawStream":
        xyz = np.asarray(xyz, dtype=np.float64)
        return cls(signal_id, timestamps, np.sqrt((xyz**2).sum(axis=1)), sampling_hz)

    def __len__(self) -> int:
        return self.timestamps.size


@dataclass
class EpochSeries:
    """Per-subject epoch grid of summary statistics with an NA mask."""

    subject_id: str
    epoch_length: float
    epoch_starts: np.ndarray
    signals: tuple[str, ...]
    stats: np.ndarray  # N x 3p, columns ordered signal-major: ACC_MEAN, ACC_MED, ACC_SD, HR_MEAN...
    na_mask: np.ndarray
    origin: float = 0.0
    columns: tuple[str, ...] = field(init=False)

    def __post_init__(self) -> None:
        self.epoch_starts = np.asarray(self.epoch_starts, dtype=np.float64)
        self.stats = np.asarray(self.stats, dtype=np.float64)
        self.na_mask = np.asarray(self.na_mask, dtype=bool)
        self.signals = tuple(self.signals)
        self.columns = tuple(column_name(s, st) for s in self.signals for st in STATS)
        if self.stats.shape != (self.epoch_starts.size, len(self.columns)):
            raise DataError(
                f"stats shape {self.stats.shape} does not match "
                f"{self.epoch_starts.size} epochs x {len(self.columns)} columns"
            )

    def __len__(self) -> int:
        return self.epoch_starts.size

    def has(self, variable: str) -> bool:
        return variable in self.columns

    def column(self, variable: str) -> np.ndarray:
        try:
            return self.stats[:, self.columns.index(variable)]
        except ValueError:
            raise ConfigError(f"variable {variable!r} not in series ({', '.join(self.columns)})") from None

    def matrix(self, variables: Sequence[str]) -> np.ndarray:
        return np.column_stack([self.column(v) for v in variables])

    def select(self, mask: np.ndarray) -> "EpochSeries":
        return EpochSeries(
            self.subject_id,
            self.epoch_length,
            self.epoch_starts[mask],
            self.signals,
            self.stats[mask],
            self.na_mask[mask],
            self.origin,
        )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch_start", *self.columns, "na"])
            for t, row, na in zip(self.epoch_starts, self.stats, self.na_mask):
                cells = ["NA"] * len(row) if na else [_fmt(x) for x in row]
                w.writerow([_fmt(t), *cells, int(na)])

    @classmethod
    def from_csv(cls, path, subject_id: str = "", origin: float = 0.0) -> "EpochSeries":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header = rows[0]
        if header[0] != "epoch_start" or header[-1] != "na":
            raise DataError(f"{path}: unexpected epoch CSV header")
        cols = header[1:-1]
        signals = tuple(dict.fromkeys(c.split("_")[0] for c in cols))
        body = rows[1:]
        starts = np.array([float(r[0]) for r in body])
        stats = np.array([[np.nan if x == "NA" else float(x) for x in r[1:-1]] for r in body]).reshape(
            len(body), len(cols)
        )
        na = np.array([r[-1] == "1" for r in body], dtype=bool)
        length = float(starts[1] - starts[0]) if len(starts) > 1 else DEFAULT_EPOCH_LENGTH
        return cls(subject_id, length, starts, signals, stats, na, origin)


def _fmt(x: float) -> str:
    if isinstance(x, (float, np.floating)) and not math.isfinite(x):
        return "NA"
    return repr(float(x))


def _bin_stats(t, v, origin, epoch_length, n_epochs):
    """Per-epoch (count, mean, median, sd) for one stream."""
    idx = np.floor((t - origin) / epoch_length).astype(np.int64)
    keep = (idx >= 0) & (idx < n_epochs)
    idx, v = idx[keep], v[keep]

    count = np.bincount(idx, minlength=n_epochs)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.bincount(idx, weights=v, minlength=n_epochs) / count
        ss = np.bincount(idx, weights=(v - mean[idx]) ** 2, minlength=n_epochs)
        sd = np.sqrt(ss / (count - 1))
    sd[count < 2] = np.nan

    order = np.lexsort((v, idx))
    vs = v[order]
    start = np.concatenate(([0], np.cumsum(count)[:-1]))
    med = np.full(n_epochs, np.nan)
    has = count > 0
    lo = start[has] + (count[has] - 1) // 2
    hi = start[has] + count[has] // 2
    med[has] = 0.5 * (vs[lo] + vs[hi])
    return count, mean, med, sd


def segment_and_summarize(
    streams: Mapping[str, RawStream] | Iterable[RawStream],
    epoch_length: float = DEFAULT_EPOCH_LENGTH,
    origin: float = 0.0,
    subject_id: str = "",
    n_epochs: int | None = None,
) -> EpochSeries:
    """Bin raw streams into epochs and compute MEAN/MED/SD per signal.

    The grid is ``origin + j * epoch_length`` for ``j = 0..N-1``; by default
    N is just large enough to hold the last sample of any stream. Samples
    before ``origin`` or past the grid are ignored.
    """
    if isinstance(streams, Mapping):
        streams = list(streams.values())
    streams = sorted(streams, key=lambda s: SIGNALS.index(s.signal_id) if s.signal_id in SIGNALS else 99)
    if not streams:
        raise ConfigError("no streams supplied")
    if not epoch_length > 0:
        raise ConfigError("epoch_length must be positive")
    ids = [s.signal_id for s in streams]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"duplicate signals: {ids}")
    for s in streams:
        if len(s) == 0:
            raise ConfigError(f"{s.signal_id}: empty stream")

    if n_epochs is None:
        t_max = max(float(s.timestamps[-1]) for s in streams)
        n_epochs = max(int(math.floor((t_max - origin) / epoch_length)) + 1, 0)

    cols = []
    na = np.zeros(n_epochs, dtype=bool)
    for s in streams:
        count, mean, med, sd = _bin_stats(s.timestamps, s.values, origin, epoch_length, n_epochs)
        designed = s.sampling_hz * epoch_length
        na |= count < CAPACITY_FRACTION * designed
        na |= ~np.isfinite(sd)
        cols.extend([mean, med, sd])

    stats = np.column_stack(cols) if cols else np.empty((n_epochs, 0))
    stats[na] = np.nan
    starts = origin + epoch_length * np.arange(n_epochs)
    return EpochSeries(subject_id, float(epoch_length), starts, tuple(ids), stats, na, float(origin))


# --------------------------------------------------------------------------
# file formats
# --------------------------------------------------------------------------


def read_signal_csv(path, signal_id: str, sampling_hz: float) -> RawStream:
    """Read ``timestamp,value`` (or ``timestamp,x,y,z`` for ACC) into a stream."""
    path = Path(path)
    with open(path, newline="") as fh:
        header = [h.strip() for h in fh.readline().split(",")]
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if header[:1] != ["timestamp"]:
        raise DataError(f"{path}: first column must be 'timestamp'")
    if header[1:] == ["value"]:
        return RawStream(signal_id, data[:, 0], data[:, 1], sampling_hz)
    if header[1:] == ["x", "y", "z"]:
        return RawStream.from_xyz(data[:, 0], data[:, 1:4], sampling_hz, signal_id)
    raise DataError(f"{path}: expected header timestamp,value or timestamp,x,y,z; got {header}")


def write_signal_csv(path, stream: RawStream, xyz: np.ndarray | None = None) -> None:
    if xyz is not None:
        arr = np.column_stack([stream.timestamps, xyz])
        header = "timestamp,x,y,z"
    else:
        arr = np.column_stack([stream.timestamps, stream.values])
        header = "timestamp,value"
    np.savetxt(path, arr, delimiter=",", header=header, comments="", fmt="%.10g")


@dataclass
class SubjectEntry:
    subject_id: str
    origin: float
    signals: dict[str, tuple[Path, float]]  # signal -> (file, sampling_hz)


@dataclass
class Manifest:
    """Cohort manifest: which files hold which signals for which subject."""

    subjects: list[SubjectEntry]
    epoch_length: float = DEFAULT_EPOCH_LENGTH

    @classmethod
    def load(cls, path) -> "Manifest":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read manifest {path}: {exc}") from exc
        base = path.parent
        default_origin = float(doc.get("origin", 0.0))
        entries = doc.get("subjects")
        if not entries:
            raise ConfigError(f"{path}: manifest lists no subjects")
        subjects = []
        for e in entries:
            sigs = {}
            for name, spec in e["signals"].items():
                if name not in SIGNALS:
                    raise ConfigError(f"subject {e['id']}: unknown signal {name!r}")
                sigs[name] = (base / spec["file"], float(spec["sampling_hz"]))
            subjects.append(SubjectEntry(str(e["id"]), float(e.get("origin", default_origin)), sigs))
        return cls(subjects, float(doc.get("epoch_length", DEFAULT_EPOCH_LENGTH)))

    def to_json(self, base: Path | None = None) -> dict:
        def rel(p: Path) -> str:
            return str(p.relative_to(base)) if base is not None else str(p)

        return {
            "epoch_length": self.epoch_length,
            "subjects": [
                {
                    "id": s.subject_id,
                    "origin": s.origin,
                    "signals": {k: {"file": rel(f), "sampling_hz": hz} for k, (f, hz) in s.signals.items()},
                }
                for s in self.subjects
            ],
        }


def load_subject(entry: SubjectEntry, epoch_length: float) -> EpochSeries:
    streams = [read_signal_csv(f, name, hz) for name, (f, hz) in entry.signals.items()]
    return segment_and_summarize(streams, epoch_length, entry.origin, entry.subject_id)
