"""Sequential sleep/wake labelling with an SI-selected sliding window.

Starting from HMM labels on the initial segment, the timeline is walked
forward in batches of ``batch`` seconds. For every candidate window length
an LDA is trained on the labelled epochs in ``(current - d, current]``,
used to predict the batch ``(current, current + batch]``, and scored by the
separability index of train and batch together under that LDA's
direction. The window with the highest SI supplies the batch's labels,
which then become training data for later batches.
"""
from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .errors import ConfigError, DataError, SingleClassError
from .ingest import EpochSeries
from .lda import LdaClassifier, fit_lda

HOUR = 3600.0
UNINFORMATIVE_ZERO_FRACTION = 0.5
RECOMMEND_SI = 0.7


class Status(enum.IntEnum):
    WAKE = 0
    SLEEP = 1
    ABNORMAL = 2
    NA = 3


PROV_NONE = -2
PROV_HMM = -1


# --------------------------------------------------------------------------
# separability index
# --------------------------------------------------------------------------


def _check_labels(y) -> np.ndarray:
    y = np.asarray(y).astype(np.int64).ravel()
    if y.size < 2:
        raise DataError("separability index needs at least two samples")
    return y


def si_scores(z, y) -> float:
    """SI on 1-D scores: share of points whose nearest other point has the same label.

    Distance ties go to the earliest point, so pass samples in time order.
    """
    y = _check_labels(y)
    z = np.ascontiguousarray(z, dtype=np.float64).ravel()
    if z.size != y.size:
        raise DataError("scores and labels differ in length")
    nn = kernels.nearest_neighbor_1d(z)
    return float(np.mean(y[nn] == y))


def separability_index(X, y, w) -> float:
    """SI under the projection distance |w'(x_t - x_s)|."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return si_scores(X @ np.atleast_1d(np.asarray(w, dtype=float)), y)


def euclidean_neighbors(X, chunk: int = 2048) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    nn = np.empty(n, dtype=np.int64)
    sq = (X**2).sum(axis=1)
    for s in range(0, n, chunk):
        e = min(n, s + chunk)
        d2 = sq[s:e, None] + sq[None, :] - 2.0 * X[s:e] @ X.T
        d2[np.arange(e - s), np.arange(s, e)] = np.inf
        nn[s:e] = np.argmin(d2, axis=1)
    return nn


def si_euclidean(X, y) -> float:
    """SI with Euclidean nearest neighbours (ties to the earliest point)."""
    y = _check_labels(y)
    nn = euclidean_neighbors(X)
    return float(np.mean(y[nn] == y))


def zero_distance_fraction(values) -> float:
    """Fraction of distinct pairs at distance zero."""
    v = np.asarray(values).ravel()
    n = v.size
    if n < 2:
        return 0.0
    _, counts = np.unique(v, return_counts=True)
    return float((counts * (counts - 1)).sum() / (n * (n - 1)))


# --------------------------------------------------------------------------
# marginal screening
# --------------------------------------------------------------------------


def _in_clock_window(t, window, clock_origin):
    h = ((np.asarray(t) - clock_origin) % 86400.0) / HOUR
    a, b = window
    return (h >= a) & (h < b) if a <= b else (h >= a) | (h < b)


@dataclass(frozen=True)
class ScreenRow:
    variable: str
    si: float
    zero_fraction: float
    n_rest: int
    n_sleep: int

    @property
    def uninformative(self) -> bool:
        return self.zero_fraction > UNINFORMATIVE_ZERO_FRACTION


def marginal_si_screen(
    series: EpochSeries,
    rest_window: tuple[float, float] = (21.0, 22.0),
    sleep_window: tuple[float, float] = (3.0, 4.0),
    clock_origin: float = 0.0,
    variables: Sequence[str] | None = None,
    usable: np.ndarray | None = None,
) -> list[ScreenRow]:
    """Per-variable SI separating a resting-awake window from a sleep window.

    Windows are clock hours ``[start, end)``; ``clock_origin`` is the study
    time of a local midnight.
    """
    ok = ~series.na_mask if usable is None else np.asarray(usable, dtype=bool)
    rest = ok & _in_clock_window(series.epoch_starts, rest_window, clock_origin)
    sleep = ok & _in_clock_window(series.epoch_starts, sleep_window, clock_origin)
    for name, m in (("rest", rest), ("sleep", sleep)):
        if m.sum() < 1:
            raise DataError(f"{name} window {rest_window if name == 'rest' else sleep_window} has no epochs")
    both = rest | sleep
    if both.sum() < 2:
        raise DataError("screening windows hold fewer than two epochs")
    y = sleep[both].astype(np.int64)
    rows = []
    for v in variables or series.columns:
        z = series.column(v)[both]
        rows.append(ScreenRow(v, si_scores(z, y), zero_distance_fraction(z), int(rest.sum()), int(sleep.sum())))
    return rows


def recommend_variables(tables: Sequence[Sequence[ScreenRow]], threshold: float = RECOMMEND_SI):
    """Average per-variable SI across subjects; returns [(variable, mean SI, recommended)] best first."""
    acc: dict[str, list[float]] = {}
    flagged: set[str] = set()
    for rows in tables:
        for r in rows:
            acc.setdefault(r.variable, []).append(r.si)
            if r.uninformative:
                flagged.add(r.variable)
    out = [(v, float(np.mean(s)), float(np.mean(s)) > threshold and v not in flagged) for v, s in acc.items()]
    return sorted(out, key=lambda r: -r[1])


# --------------------------------------------------------------------------
# sequential labelling
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SequencerConfig:
    batch: float = 6 * HOUR
    windows: tuple[float, ...] = (24 * HOUR, 48 * HOUR, 72 * HOUR)
    gamma: float = 1.0
    min_per_class: int = 5

    def __post_init__(self) -> None:
        object.__setattr__(self, "windows", tuple(float(w) for w in self.windows))
        if not self.batch > 0:
            raise ConfigError("batch length must be positive")
        if not self.windows:
            raise ConfigError("need at least one window candidate")
        if any(b <= a for a, b in zip(self.windows, self.windows[1:])):
            raise ConfigError("window candidates must be strictly increasing")
        if not self.gamma > 0:
            raise ConfigError("gamma must be positive")


@dataclass
class CandidateResult:
    window: float
    n_train: int
    si: float | None = None
    error: str | None = None


@dataclass
class BatchAudit:
    index: int
    start: float
    end: float
    n_test: int
    candidates: list[CandidateResult] = field(default_factory=list)
    chosen_window: float | None = None
    si: float | None = None
    n_sleep: int = 0
    n_wake: int = 0
    fallback: bool = False
    skipped: bool = False
    classifier: dict | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class LabeledTimeline:
    epoch_starts: np.ndarray
    status: np.ndarray  # Status codes
    provenance: np.ndarray  # PROV_HMM, PROV_NONE or batch index
    audit: list[BatchAudit]
    init_end: float
    smoothed: np.ndarray | None = None  # status after median smoothing

    def binary(self) -> np.ndarray:
        """Sleep indicator with -1 where there is no sleep/wake label."""
        s = self.status
        return np.where(s <= Status.SLEEP, s, -1).astype(np.int8)

    def write_audit(self, path) -> None:
        with open(path, "w") as fh:
            for a in self.audit:
                fh.write(a.to_json() + "\n")


def _statuses(n, usable, excluded):
    status = np.full(n, Status.NA, dtype=np.int8)
    if excluded is not None:
        status[np.asarray(excluded, dtype=bool)] = Status.ABNORMAL
    return status


def sequential_label_arrays(
    X: np.ndarray,
    times: np.ndarray,
    usable: np.ndarray,
    init_labels: np.ndarray,
    init_end: float,
    cfg: SequencerConfig = SequencerConfig(),
    excluded: np.ndarray | None = None,
) -> LabeledTimeline:
    """Core loop over plain arrays.

    ``init_labels`` holds 0/1 for usable epochs with ``time <= init_end``
    (anything else is ignored). ``usable`` marks epochs that may be
    labelled at all (non-NA and not excluded).
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    t = np.asarray(times, dtype=float)
    usable = np.asarray(usable, dtype=bool)
    n, dim = X.shape
    if np.any(np.diff(t) <= 0):
        raise DataError("epoch times must be strictly increasing")

    labels = np.full(n, -1, dtype=np.int64)
    prov = np.full(n, PROV_NONE, dtype=np.int32)
    init = usable & (t <= init_end)
    y0 = np.asarray(init_labels)[init].astype(np.int64)
    if not np.isin(y0, (0, 1)).all():
        raise DataError("initial labels must be 0/1 on every usable initial epoch")
    labels[init] = y0
    prov[init] = PROV_HMM
    try:
        prev = fit_lda(X[init], y0, cfg.gamma)
    except (SingleClassError, DataError) as exc:
        raise DataError(
            f"initial segment cannot start the sequencer ({exc}); choose a different init_end or HMM config"
        ) from exc

    min_class = max(cfg.min_per_class, dim + 1)
    audit: list[BatchAudit] = []
    current = float(init_end)
    last = float(t[-1]) if n else current
    k = 0
    while current < last:
        end = current + cfg.batch
        test = usable & (t > current) & (t <= end)
        entry = BatchAudit(k, current, end, int(test.sum()))
        if not test.any():
            entry.skipped = True
            audit.append(entry)
            current = end
            k += 1
            continue

        labeled = labels >= 0
        test_idx = np.flatnonzero(test)
        best: tuple[float, float, LdaClassifier, np.ndarray] | None = None
        for d in cfg.windows:
            train = labeled & (t > current - d) & (t <= current)
            cand = CandidateResult(d, int(train.sum()))
            entry.candidates.append(cand)
            ytr = labels[train]
            n1 = int(ytr.sum())
            n0 = ytr.size - n1
            if n0 < min_class or n1 < min_class:
                cand.error = f"ineligible: {n0} wake / {n1} sleep < {min_class}"
                continue
            try:
                clf = fit_lda(X[train], ytr, cfg.gamma)
            except (SingleClassError, DataError) as exc:
                cand.error = f"{type(exc).__name__}: {exc}"
                continue
            yhat = clf.classify(X[test_idx]).astype(np.int64)
            joint = train | test
            yj = labels.copy()
            yj[test_idx] = yhat
            cand.si = separability_index(X[joint], yj[joint], clf.w)
            if best is None or (cand.si, d) >= (best[0], best[1]):
                best = (cand.si, d, clf, yhat)

        if best is None:
            clf = prev
            yhat = clf.classify(X[test_idx]).astype(np.int64)
            entry.fallback = True
        else:
            entry.si, entry.chosen_window, clf, yhat = best[0], best[1], best[2], best[3]
        labels[test_idx] = yhat
        prov[test_idx] = k
        entry.n_sleep = int(yhat.sum())
        entry.n_wake = int(yhat.size - yhat.sum())
        entry.classifier = clf.to_json()
        audit.append(entry)
        prev = clf
        current = end
        k += 1

    status = _statuses(n, usable, excluded)
    status[labels >= 0] = labels[labels >= 0]
    return LabeledTimeline(t.copy(), status, prov, audit, float(init_end))


def sequential_label(
    series: EpochSeries,
    features: Sequence[str],
    init_labels: np.ndarray,
    init_end: float,
    cfg: SequencerConfig = SequencerConfig(),
    usable: np.ndarray | None = None,
    excluded: np.ndarray | None = None,
) -> LabeledTimeline:
    """Label every usable epoch of ``series`` (see module docstring)."""
    if usable is None:
        usable = ~series.na_mask
        if excluded is not None:
            usable &= ~np.asarray(excluded, dtype=bool)
    return sequential_label_arrays(
        series.matrix(features), series.epoch_starts, usable, init_labels, init_end, cfg, excluded
    )


def static_labels(X, init_mask, init_labels, gamma: float = 1.0) -> np.ndarray:
    """Labels from one LDA trained on the initial segment only (baseline)."""
    X = np.asarray(X, dtype=float)
    clf = fit_lda(X[init_mask], np.asarray(init_labels)[init_mask], gamma)
    return clf.classify(X).astype(np.int8)
