import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sleepadapt.anomaly import (
    CutoffRule,
    Direction,
    compute_cutoff,
    compute_rules,
    categorize_excluded,
    category_counts,
    filter_epochs,
    is_unusable,
    kmeans_1d,
    normal_set,
    tukey_fences,
)
from sleepadapt.errors import ConfigError, DataError, DegenerateInputError
from sleepadapt.ingest import EpochSeries
from oracles import kmeans_exhaustive, quantile_type7


def series_from(cols: dict, na=None):
    names = list(cols)
    n = len(next(iter(cols.values())))
    stats = np.column_stack([np.asarray(cols[c], dtype=float) for c in names])
    sigs = tuple(dict.fromkeys(c.split("_")[0] for c in names))
    # EpochSeries expects full MEAN/MED/SD triplets per signal
    full, full_names = [], []
    for s in sigs:
        for stat in ("MEAN", "MED", "SD"):
            key = f"{s}_{stat}"
            full.append(stats[:, names.index(key)] if key in names else np.zeros(n))
            full_names.append(key)
    na = np.zeros(n, dtype=bool) if na is None else np.asarray(na)
    arr = np.column_stack(full)
    arr[na] = np.nan
    return EpochSeries("X", 60.0, 60.0 * np.arange(n), sigs, arr, na, 0.0)


def test_kmeans_separated():
    s = kmeans_1d([0, 0, 0, 10, 10, 10, 20, 20, 20], 3, seed=0)
    assert s.centroids.tolist() == [20, 10, 0]
    assert np.bincount(s.assignments).tolist() == [3, 3, 3]


def test_kmeans_pairs_frozen(frozen):
    s = kmeans_1d([0, 1, 10, 11, 20, 21], 3, seed=3)
    np.testing.assert_allclose(s.centroids, frozen["kmeans_pairs"]["centroids"], atol=1e-12)
    assert s.wcss == pytest.approx(frozen["kmeans_pairs"]["wcss"])


def test_kmeans_degenerate():
    with pytest.raises(DegenerateInputError):
        kmeans_1d([5, 5, 5, 5], 3)


@pytest.mark.parametrize("seed", range(8))
def test_kmeans_reaches_exhaustive_optimum(seed):
    rng = np.random.default_rng(seed)
    x = np.round(rng.normal(size=8) * 5, 2)
    cents, wcss = kmeans_exhaustive(x, 3)
    s = kmeans_1d(x, 3, seed=seed)
    assert s.wcss == pytest.approx(wcss, rel=1e-9, abs=1e-9)
    np.testing.assert_allclose(s.centroids, cents, atol=1e-9)


@given(st.integers(0, 2**16))
def test_kmeans_well_separated_groups_any_seed(seed):
    rng = np.random.default_rng(seed)
    groups = [rng.normal(c, 0.1, 10) for c in (0, 10, 25)]
    s = kmeans_1d(np.concatenate(groups), 3, seed=seed)
    truth = np.repeat([2, 1, 0], 10)  # descending centroid order
    assert np.array_equal(s.assignments, truth)


def test_upper_bound_example(frozen):
    values = np.r_[np.arange(1, 101), np.arange(1000, 1011)]
    rule = compute_cutoff(values, abnormal_side="high")
    assert rule.direction is Direction.UPPER_BOUND
    assert rule.cutoff == pytest.approx(frozen["quantile_1_100_q975"], abs=1e-9)


def test_upper_bound_example_inferred_side(frozen):
    values = np.r_[np.arange(1, 101), np.arange(1000, 1011)]
    rule = compute_cutoff(values)
    assert rule.direction is Direction.UPPER_BOUND
    assert rule.cutoff == pytest.approx(frozen["quantile_1_100_q975"], abs=1e-9)


def test_temperature_lower_bound():
    rng = np.random.default_rng(0)
    normal = np.r_[rng.normal(35, 0.3, 400), rng.normal(33.8, 0.3, 600)]
    abn = rng.normal(23, 0.8, 80)
    rule = compute_cutoff(np.r_[normal, abn], abnormal_side="low")
    assert rule.direction is Direction.LOWER_BOUND
    assert 32 < rule.cutoff < 34
    assert rule.normal_mean > rule.abnormal_mean


def test_normal_set_rule_merges_two_nearest():
    x = np.r_[np.zeros(5), np.full(5, 2.0), np.full(5, 10.0)]
    s = kmeans_1d(x, 3)
    # centroids (10, 2, 0): |2-10| > |0-2| so with "low" abnormal only the top cluster is normal
    assert normal_set(s, "low").sum() == 5
    # mirrored: the two low clusters are close, so they form the normal set
    assert normal_set(s, "high").sum() == 10


def test_compute_cutoff_quantile_oracle():
    rng = np.random.default_rng(5)
    x = np.r_[rng.normal(50, 1, 100), rng.normal(60, 1, 100), rng.normal(200, 1, 10)]
    rule = compute_cutoff(x, abnormal_side="high")
    s = kmeans_1d(x, 3)
    nor = x[normal_set(s, "high")]
    assert rule.cutoff == pytest.approx(quantile_type7(nor, 0.975), abs=1e-12)


@given(st.integers(0, 1000), st.floats(0.1, 50))
def test_cutoff_order_and_scale_invariance(seed, scale):
    rng = np.random.default_rng(seed)
    x = np.r_[rng.normal(30, 1, 60), rng.normal(36, 1, 60), rng.normal(5, 1, 15)]
    a = compute_cutoff(x, abnormal_side="low")
    b = compute_cutoff(rng.permutation(x), abnormal_side="low")
    c = compute_cutoff(x * scale, abnormal_side="low")
    assert a.cutoff == pytest.approx(b.cutoff, rel=1e-12)
    assert c.cutoff == pytest.approx(a.cutoff * scale, rel=1e-9)
    assert a.direction == b.direction == c.direction


def test_direction_invariant():
    rng = np.random.default_rng(1)
    for side in ("low", "high", None):
        x = np.r_[rng.normal(0, 1, 50), rng.normal(5, 1, 50), rng.normal(40, 2, 10)]
        r = compute_cutoff(x, abnormal_side=side)
        assert (r.direction is Direction.LOWER_BOUND) == (r.normal_mean > r.abnormal_mean)


def test_filter_epochs_rules():
    s = series_from({"TEMP_MED": [34, 19, 35, 34.5], "HR_MED": [60, 60, 60, 60]}, na=[False, False, False, True])
    rules = [CutoffRule("TEMP_MED", 30.0, Direction.LOWER_BOUND, 34, 20)]
    res = filter_epochs(s, rules)
    assert res.excluded.tolist() == [1]
    assert res.clean_mask.tolist() == [True, False, True, False]
    assert not res.excluded_mask[3] and not res.clean_mask[3]
    assert len(res.clean) == 2
    # idempotence
    again = filter_epochs(res.clean, rules)
    assert again.excluded.size == 0
    with pytest.raises(ConfigError):
        filter_epochs(s, [CutoffRule("EDA_MED", 0.0, Direction.LOWER_BOUND, 1, 0)])


def test_filter_identity():
    s = series_from({"TEMP_MED": [34, 35, 36]})
    res = filter_epochs(s, [CutoffRule("TEMP_MED", 30.0, Direction.LOWER_BOUND, 35, 20)])
    assert res.excluded.size == 0 and len(res.clean) == 3


def test_unusable_flag():
    s = series_from({"TEMP_MED": [20] * 5 + [35] * 5})
    res = filter_epochs(s, [CutoffRule("TEMP_MED", 30.0, Direction.LOWER_BOUND, 35, 20)])
    assert res.abnormal_proportion == 0.5 and is_unusable(res)
    assert not is_unusable(res, 0.6)


def test_tukey(frozen):
    lo, up = tukey_fences(np.arange(1, 101))
    assert [lo, up] == pytest.approx(frozen["tukey_1_100"])
    assert tukey_fences([7, 7, 7]) == (7, 7)
    with pytest.raises(DataError):
        tukey_fences([])


def test_tukey_direct_formula():
    x = np.r_[np.full(25, 0.0), np.full(25, 10.0), np.full(25, 20.0), np.full(25, 30.0)]
    q1, q3 = np.quantile(x, [0.25, 0.75])
    assert tukey_fences(x) == (q1 - 1.5 * (q3 - q1), q3 + 1.5 * (q3 - q1))


@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=50))
def test_tukey_ordering(values):
    lo, up = tukey_fences(values)
    q1, q3 = np.quantile(values, [0.25, 0.75])
    assert lo <= q1 + 1e-9 and q1 <= q3 and q3 <= up + 1e-9


def test_categorize():
    rng = np.random.default_rng(0)
    wake = {"TEMP_MED": rng.normal(34, 0.3, 500), "ACC_SD": rng.normal(0.08, 0.01, 500), "HR_MED": rng.normal(75, 4, 500)}
    exc = {
        "TEMP_MED": np.array([22.0, 27.0, 34.0, 34.0]),
        "ACC_SD": np.array([0.001, 0.08, 0.5, 0.08]),
        "HR_MED": np.array([75.0, 75.0, 130.0, 75.0]),
    }
    cats = categorize_excluded(exc, wake)
    assert cats.tolist() == ["NW", "LOC", "ACTIVE", "OTHER"]
    assert category_counts(cats) == {"NW": 1, "LOC": 1, "ACTIVE": 1, "OTHER": 1}
    with pytest.raises(DataError):
        categorize_excluded(exc, {k: np.array([]) for k in wake})


def test_compute_rules_defaults():
    rng = np.random.default_rng(2)
    n = 300
    s = series_from(
        {
            "HR_MED": np.r_[rng.normal(58, 2, n), rng.normal(76, 4, 2 * n), rng.normal(130, 5, 40)],
            "TEMP_MED": np.r_[rng.normal(35, 0.3, n), rng.normal(34, 0.3, 2 * n), rng.normal(34, 0.3, 40)],
        }
    )
    hr, temp = compute_rules(s)
    assert hr.variable == "HR_MED" and hr.direction is Direction.UPPER_BOUND and 80 < hr.cutoff < 100
    assert temp.variable == "TEMP_MED"
