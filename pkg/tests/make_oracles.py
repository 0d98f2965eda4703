"""Regenerate tests/frozen_oracles.json from the reference implementations.

    python3 tests/make_oracles.py
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

import oracles

OUT = Path(__file__).with_name("frozen_oracles.json")


def build() -> dict:
    doc: dict = {}
    cents, wcss = oracles.kmeans_exhaustive([0, 1, 10, 11, 20, 21], 3)
    doc["kmeans_pairs"] = {"centroids": cents, "wcss": wcss}
    doc["quantile_1_100_q975"] = oracles.quantile_type7(range(1, 101), 0.975)
    doc["quantile_1_100_q025"] = oracles.quantile_type7(range(1, 101), 0.025)
    q1 = oracles.quantile_type7(range(1, 101), 0.25)
    q3 = oracles.quantile_type7(range(1, 101), 0.75)
    doc["tukey_1_100"] = [q1 - 1.5 * (q3 - q1), q3 + 1.5 * (q3 - q1)]
    doc["hr_60_68"] = {
        "mean": sum([60, 62, 64, 66, 68]) / 5,
        "med": oracles.median([60, 62, 64, 66, 68]),
        "sd": oracles.sample_sd([60, 62, 64, 66, 68]),
    }
    c0 = [(0, 1), (0, -1), (1, 0), (-1, 0)]
    c1 = [(x + 3, y) for x, y in c0]
    m0 = [sum(p[i] for p in c0) / 4 for i in range(2)]
    m1 = [sum(p[i] for p in c1) / 4 for i in range(2)]
    S = [[0.0, 0.0], [0.0, 0.0]]
    for pts, m in ((c0, m0), (c1, m1)):
        for p in pts:
            d = [p[0] - m[0], p[1] - m[1]]
            for i in range(2):
                for j in range(2):
                    S[i][j] += d[i] * d[j]
    doc["lda_hand"] = {"S_W": S, "w": oracles.fisher_w_2x2(m0, m1, S)}
    doc["median_window5"] = oracles.running_median_root([1, 1, 0, 1, 1, 1, 0, 1, 1], 5)
    doc["median_window3_blip"] = oracles.running_median_root([0, 0, 1, 0, 0], 3)
    t = np.linspace(0, 6, 25)
    doc["temp_linear_quad"] = oracles.normal_equations(t, 33.0 + 0.5 * t, 2).tolist()
    doc["sqrt10"] = math.sqrt(10)
    return doc


if __name__ == "__main__":
    OUT.write_text(json.dumps(build(), indent=2, sort_keys=True) + "\n")
    print(f"wrote {OUT}")
