"""Epoch labels -> sleep/wake sessions assigned to study days."""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import ConfigError

DAY = 86400.0
HOUR = 3600.0
DEFAULT_WINDOW = 5
MIN_SLEEP = 3600.0
MIN_PRIOR_WAKE = 5 * HOUR
NIGHT_WINDOW = (20.0, 4.0)


def _segments(valid: np.ndarray, max_gap: int) -> np.ndarray:
    """Segment id per position; gap runs of length >= max_gap start a new segment."""
    n = valid.size
    seg = np.zeros(n, dtype=np.int64)
    run = 0
    sid = 0
    for i in range(n):
        if valid[i]:
            if run >= max_gap and i > run:
                sid += 1
            run = 0
        else:
            run += 1
        seg[i] = sid
    return seg


def _median_pass(y, valid, seg, h):
    n = y.size
    idx = np.arange(n)
    # segment bounds per position
    starts = np.r_[0, np.flatnonzero(np.diff(seg)) + 1]
    ends = np.r_[starts[1:], n]
    lo = np.maximum(idx - h, starts[seg])
    hi = np.minimum(idx + h, ends[seg] - 1)
    ones = np.r_[0, np.cumsum(valid & (y == 1))]
    cnt = np.r_[0, np.cumsum(valid)]
    k1 = ones[hi + 1] - ones[lo]
    k = cnt[hi + 1] - cnt[lo]
    out = y.copy()
    out[valid & (2 * k1 > k)] = 1
    out[valid & (2 * k1 < k)] = 0
    return out


def median_smooth(labels, window: int = DEFAULT_WINDOW) -> np.ndarray:
    """Binary running median, repeated until nothing changes (a root signal).

    ``labels`` holds 0/1 with -1 marking gaps (abnormal or NA epochs). Gap
    epochs are skipped inside a window; gap runs of ``window`` epochs or
    more split the sequence into independently smoothed pieces. Windows
    are truncated at piece edges and a tied vote keeps the current label.
    Gaps stay -1 in the output.
    """
    if window < 3 or window % 2 == 0:
        raise ConfigError(f"median window must be odd and >= 3, got {window}")
    y = np.asarray(labels).astype(np.int64).copy()
    valid = y >= 0
    if not valid.any():
        return y
    seg = _segments(valid, window)
    h = window // 2
    for _ in range(y.size + 1):
        nxt = _median_pass(y, valid, seg, h)
        if np.array_equal(nxt, y):
            break
        y = nxt
    return y


@dataclass
class Session:
    kind: str  # "sleep" | "wake"
    onset: float
    offset: float
    assigned_day: int | None = None
    is_night_sleep: bool = False

    @property
    def duration(self) -> float:
        return self.offset - self.onset

    @property
    def is_sleep(self) -> bool:
        return self.kind == "sleep"


def _kind(v: int) -> str:
    return "sleep" if v == 1 else "wake"


def partition_sessions(
    labels,
    epoch_starts,
    epoch_length: float,
    min_sleep: float | None = MIN_SLEEP,
    max_gap: int = DEFAULT_WINDOW,
) -> list[Session]:
    """Maximal constant runs -> sessions; short sleep is absorbed into wake.

    Runs continue across gaps shorter than ``max_gap`` epochs; longer gaps
    end the current session. Sleep sessions shorter than ``min_sleep``
    seconds become wake and neighbouring same-kind sessions are merged
    (only within a gap-free block). ``min_sleep=None`` disables the rule.
    """
    y = np.asarray(labels).astype(np.int64)
    t = np.asarray(epoch_starts, dtype=float)
    pos = np.flatnonzero(y >= 0)
    if pos.size == 0:
        return []

    blocks: list[list[Session]] = [[]]
    prev = None
    for i in pos:
        kind = _kind(y[i])
        if prev is not None and i - prev - 1 >= max_gap:
            blocks.append([])
        cur = blocks[-1]
        if cur and cur[-1].kind == kind and prev is not None and i - prev - 1 < max_gap:
            cur[-1].offset = float(t[i] + epoch_length)
        else:
            cur.append(Session(kind, float(t[i]), float(t[i] + epoch_length)))
        prev = i

    out: list[Session] = []
    for block in blocks:
        if min_sleep is not None:
            block = [replace(s, kind="wake") if s.is_sleep and s.duration < min_sleep else s for s in block]
        merged: list[Session] = []
        for s in block:
            if merged and merged[-1].kind == s.kind:
                merged[-1].offset = s.offset
            else:
                merged.append(replace(s))
        out.extend(merged)
    return out


def clock_hour(t, clock_origin: float = 0.0):
    return ((np.asarray(t, dtype=float) - clock_origin) % DAY) / HOUR


def _in_window(h: float, window: tuple[float, float]) -> bool:
    a, b = window
    return a <= h < b if a <= b else (h >= a or h < b)


def assign_day(
    sessions: Sequence[Session],
    day_origin: float = 0.0,
    clock_origin: float = 0.0,
    min_prior_wake: float = MIN_PRIOR_WAKE,
    night_window: tuple[float, float] = NIGHT_WINDOW,
) -> list[Session]:
    """Attach study days and flag night sleep.

    Wake sessions belong to the day of their onset. A sleep session belongs
    to its onset day when the wake preceding it lasts more than
    ``min_prior_wake``; otherwise to the previous day. Wake sessions split
    only by excluded/NA gaps count as one wake period (their durations are
    summed, the gaps are not). The night sleep
    of a day is its longest sleep session with onset clock time inside
    ``night_window``.
    """
    out = [replace(s, assigned_day=None, is_night_sleep=False) for s in sessions]
    wake_run = 0.0
    for s in out:
        day = int(np.floor((s.onset - day_origin) / DAY))
        if s.is_sleep:
            if not wake_run > min_prior_wake:
                day -= 1
            wake_run = 0.0
        else:
            wake_run += s.duration
        s.assigned_day = day

    best: dict[int, Session] = {}
    for s in out:
        if s.is_sleep and _in_window(float(clock_hour(s.onset, clock_origin)), night_window):
            cur = best.get(s.assigned_day)
            if cur is None or s.duration > cur.duration:
                best[s.assigned_day] = s
    for s in best.values():
        s.is_night_sleep = True
    return out


def sessions_to_csv(path, rows: Sequence[tuple[str, Session]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subject", "kind", "onset", "offset", "assigned_day", "is_night_sleep"])
        for subject, s in rows:
            w.writerow([subject, s.kind, repr(float(s.onset)), repr(float(s.offset)), s.assigned_day, int(s.is_night_sleep)])


def sessions_from_csv(path) -> list[tuple[str, Session]]:
    with open(path, newline="") as fh:
        return [
            (
                r["subject"],
                Session(
                    r["kind"],
                    float(r["onset"]),
                    float(r["offset"]),
                    int(r["assigned_day"]) if r["assigned_day"] not in ("", "None") else None,
                    r["is_night_sleep"] == "1",
                ),
            )
            for r in csv.DictReader(fh)
        ]


def session_mask(sessions: Sequence[Session], epoch_starts, kind: str, day: int | None = None) -> np.ndarray:
    """Epochs whose start falls inside a session of ``kind`` (optionally on ``day``)."""
    t = np.asarray(epoch_starts, dtype=float)
    m = np.zeros(t.size, dtype=bool)
    for s in sessions:
        if s.kind == kind and (day is None or s.assigned_day == day):
            m |= (t >= s.onset) & (t < s.offset)
    return m
