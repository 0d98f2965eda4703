"""Per-subject adaptive thresholding of abnormal epochs.

Each screening variable is clustered into three groups with 1-D k-means.
The normal set is the top cluster, or the top two when the bottom cluster
sits further from the middle one than the top does; the cutoff is the 2.5%
(or 97.5%) quantile of the normal set, whichever side faces the abnormal
values. For variables whose abnormal readings are *high* (heart rate
during vigorous activity) the same rule is applied to the mirrored axis.

After sleep/wake detection, excluded epochs are sorted into device states
(NW, LOC, ACTIVE, OTHER) against Tukey fences of the detected wake epochs.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Literal, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataError, DegenerateInputError
from .ingest import EpochSeries

LOWER_QUANTILE = 0.025
UPPER_QUANTILE = 0.975
UNUSABLE_PROPORTION = 0.40
KMEANS_RESTARTS = 20


class Direction(str, enum.Enum):
    LOWER_BOUND = "LOWER_BOUND"  # feasible [c, inf)
    UPPER_BOUND = "UPPER_BOUND"  # feasible (-inf, c]


class ExcludedCategory(str, enum.Enum):
    NW = "NW"
    LOC = "LOC"
    ACTIVE = "ACTIVE"
    OTHER = "OTHER"


@dataclass(frozen=True)
class ClusterSummary:
    """1-D k-means result. Cluster 0 has the highest centroid."""

    assignments: np.ndarray
    centroids: np.ndarray  # descending
    wcss: float

    def members(self, j: int) -> np.ndarray:
        return self.assignments == j


@dataclass(frozen=True)
class CutoffRule:
    variable: str
    cutoff: float
    direction: Direction
    normal_mean: float
    abnormal_mean: float

    def feasible(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.direction is Direction.LOWER_BOUND:
            return x >= self.cutoff
        return x <= self.cutoff

    def to_json(self) -> dict:
        return {
            "variable": self.variable,
            "cutoff": self.cutoff,
            "direction": self.direction.value,
            "normal_mean": self.normal_mean,
            "abnormal_mean": self.abnormal_mean,
        }


@dataclass(frozen=True)
class ScreeningVariable:
    variable: str
    abnormal_side: Literal["low", "high"] | None = None


DEFAULT_SCREENING = (ScreeningVariable("HR_MED", "high"), ScreeningVariable("TEMP_MED", "low"))


# --------------------------------------------------------------------------
# k-means
# --------------------------------------------------------------------------


def _farthest_point_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = [x[rng.integers(x.size)]]
    d = np.abs(x - centers[0])
    for _ in range(1, k):
        c = x[int(np.argmax(d))]
        centers.append(c)
        d = np.minimum(d, np.abs(x - c))
    return np.array(centers, dtype=float)


def _lloyd_1d(x: np.ndarray, centers: np.ndarray, max_iter: int = 300):
    k = centers.size
    assign = np.full(x.size, -1)
    for _ in range(max_iter):
        new = np.argmin(np.abs(x[:, None] - centers[None, :]), axis=1)
        if np.array_equal(new, assign):
            break
        assign = new
        counts = np.bincount(assign, minlength=k)
        for j in np.flatnonzero(counts == 0):
            # re-seed an empty cluster at the worst-fit point
            far = int(np.argmax(np.abs(x - centers[assign])))
            centers[j] = x[far]
            assign[far] = j
        counts = np.bincount(assign, minlength=k)
        sums = np.bincount(assign, weights=x, minlength=k)
        centers = sums / counts
    wcss = float(((x - centers[assign]) ** 2).sum())
    return assign, centers, wcss


def kmeans_1d(values, k: int = 3, seed: int = 0, n_init: int = KMEANS_RESTARTS) -> ClusterSummary:
    """Lloyd's algorithm on a line with farthest-point seeding.

    Keeps the restart with the lowest within-cluster sum of squares (ties
    go to the earliest restart). Centroids come back in descending order
    and ``assignments`` index into them.
    """
    x = np.asarray(values, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise DataError("kmeans_1d: non-finite values")
    if np.unique(x).size < k:
        raise DegenerateInputError(f"kmeans_1d: need at least {k} distinct values, got {np.unique(x).size}")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        res = _lloyd_1d(x, _farthest_point_init(x, k, rng))
        if best is None or res[2] < best[2]:
            best = res
    assign, centers, wcss = best
    order = np.argsort(-centers, kind="stable")
    rank = np.empty(k, dtype=np.int64)
    rank[order] = np.arange(k)
    return ClusterSummary(rank[assign], centers[order], wcss)


# --------------------------------------------------------------------------
# cutoffs
# --------------------------------------------------------------------------


def normal_set(summary: ClusterSummary, abnormal_side: Literal["low", "high"] = "low") -> np.ndarray:
    """Boolean mask of normal samples for a 3-cluster summary."""
    mu = summary.centroids
    if abnormal_side == "low":
        near, mid, far = 0, 1, 2
    else:
        near, mid, far = 2, 1, 0
    if abs(mu[mid] - mu[near]) < abs(mu[far] - mu[mid]):
        return summary.members(near) | summary.members(mid)
    return summary.members(near)


def infer_abnormal_side(summary: ClusterSummary) -> Literal["low", "high"]:
    """The more isolated extreme cluster is taken as the abnormal side."""
    mu = summary.centroids
    return "high" if abs(mu[0] - mu[1]) > abs(mu[1] - mu[2]) else "low"


def compute_cutoff(
    values,
    seed: int = 0,
    abnormal_side: Literal["low", "high"] | None = None,
    variable: str = "",
    lower_q: float = LOWER_QUANTILE,
    upper_q: float = UPPER_QUANTILE,
) -> CutoffRule:
    x = np.asarray(values, dtype=float).ravel()
    x = x[np.isfinite(x)]
    summary = kmeans_1d(x, 3, seed)
    side = abnormal_side or infer_abnormal_side(summary)
    nor = normal_set(summary, side)
    mu_nor = float(x[nor].mean())
    mu_abn = float(x[~nor].mean()) if (~nor).any() else mu_nor
    if mu_nor > mu_abn:
        return CutoffRule(variable, float(np.quantile(x[nor], lower_q)), Direction.LOWER_BOUND, mu_nor, mu_abn)
    return CutoffRule(variable, float(np.quantile(x[nor], upper_q)), Direction.UPPER_BOUND, mu_nor, mu_abn)


def compute_rules(
    series: EpochSeries, screening: Sequence[ScreeningVariable] = DEFAULT_SCREENING, seed: int = 0
) -> list[CutoffRule]:
    ok = ~series.na_mask
    return [
        compute_cutoff(series.column(sv.variable)[ok], seed, sv.abnormal_side, sv.variable)
        for sv in screening
    ]


@dataclass(frozen=True)
class FilterResult:
    clean: EpochSeries
    excluded: np.ndarray  # epoch indices into the input series
    clean_mask: np.ndarray
    excluded_mask: np.ndarray

    @property
    def abnormal_proportion(self) -> float:
        usable = int(self.clean_mask.sum() + self.excluded_mask.sum())
        return float(self.excluded_mask.sum() / usable) if usable else 1.0


def filter_epochs(series: EpochSeries, rules: Sequence[CutoffRule]) -> FilterResult:
    """Exclude non-NA epochs that fall outside any rule's feasible interval."""
    for r in rules:
        if not series.has(r.variable):
            raise ConfigError(f"cutoff rule references missing variable {r.variable!r}")
    ok = ~series.na_mask
    feasible = np.ones(len(series), dtype=bool)
    for r in rules:
        feasible &= r.feasible(np.where(ok, series.column(r.variable), np.nan)) | ~ok
    excluded_mask = ok & ~feasible
    clean_mask = ok & feasible
    return FilterResult(series.select(clean_mask), np.flatnonzero(excluded_mask), clean_mask, excluded_mask)


def is_unusable(result: FilterResult, threshold: float = UNUSABLE_PROPORTION) -> bool:
    return result.abnormal_proportion > threshold


# --------------------------------------------------------------------------
# post-hoc categorisation
# --------------------------------------------------------------------------


def tukey_fences(values) -> tuple[float, float]:
    x = np.asarray(values, dtype=float).ravel()
    x = x[np.isfinite(x)]
    if x.size == 0:
        raise DataError("tukey_fences: empty input")
    q1, q3 = np.quantile(x, [0.25, 0.75])
    iqr = q3 - q1
    return float(q1 - 1.5 * iqr), float(q3 + 1.5 * iqr)


def categorize_excluded(
    excluded: Mapping[str, np.ndarray] | EpochSeries,
    wake_reference: Mapping[str, np.ndarray] | EpochSeries,
    temp: str = "TEMP_MED",
    acc: str = "ACC_SD",
    hr: str = "HR_MED",
) -> np.ndarray:
    """Label excluded epochs NW / LOC / ACTIVE / OTHER.

    Normal ranges are Tukey fences over the wake-session epochs in
    ``wake_reference``.
    """

    def col(src, name):
        return np.asarray(src.column(name) if isinstance(src, EpochSeries) else src[name], dtype=float)

    ref = {v: col(wake_reference, v) for v in (temp, acc, hr)}
    if any(np.isfinite(r).sum() == 0 for r in ref.values()):
        raise DataError("categorize_excluded: empty wake reference")
    fences = {v: tukey_fences(r) for v, r in ref.items()}
    T, A, H = (col(excluded, v) for v in (temp, acc, hr))

    t_low = T < fences[temp][0]
    t_ok = (T >= fences[temp][0]) & (T <= fences[temp][1])
    a_low = A < fences[acc][0]
    a_ok = (A >= fences[acc][0]) & (A <= fences[acc][1])
    a_high = A > fences[acc][1]
    h_high = H > fences[hr][1]

    out = np.full(T.shape, ExcludedCategory.OTHER.value, dtype=object)
    out[t_low & a_low] = ExcludedCategory.NW.value
    out[t_low & a_ok] = ExcludedCategory.LOC.value
    out[t_ok & h_high & a_high] = ExcludedCategory.ACTIVE.value
    return out


def category_counts(categories) -> dict[str, int]:
    cats = list(categories)
    return {c.value: cats.count(c.value) for c in ExcludedCategory}
