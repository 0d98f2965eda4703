"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Semantics match the Cython module exactly; the test-suite runs both and
compares outputs. Recursions over time stay as Python loops (vectorised
over states only), so these are noticeably slower on long series.
"""
from __future__ import annotations

import numpy as np


def forward(b, pi, A):
    N, K = b.shape
    alpha = np.empty((N, K))
    c = np.empty(N)
    a = pi * b[0]
    s = a.sum()
    if s <= 0.0:
        raise FloatingPointError("zero likelihood at t=0")
    c[0] = s
    alpha[0] = a / s
    for t in range(1, N):
        a = (alpha[t - 1] @ A) * b[t]
        s = a.sum()
        if s <= 0.0:
            raise FloatingPointError(f"zero likelihood at t={t}")
        c[t] = s
        alpha[t] = a / s
    return alpha, c


def backward(b, A, c):
    N, K = b.shape
    beta = np.empty((N, K))
    beta[-1] = 1.0
    for t in range(N - 2, -1, -1):
        beta[t] = A @ (b[t + 1] * beta[t + 1]) / c[t + 1]
    return beta


def xi_sum(alpha, beta, b, A, c):
    r = b[1:] * beta[1:] / c[1:, None]
    return A * (alpha[:-1].T @ r)


def viterbi(log_b, log_pi, log_A):
    N, K = log_b.shape
    psi = np.zeros((N, K), dtype=np.int64)
    delta = log_pi + log_b[0]
    for t in range(1, N):
        cand = delta[:, None] + log_A  # cand[i, j]: from i into j
        psi[t] = np.argmax(cand, axis=0)  # first maximum -> lowest index
        delta = cand[psi[t], np.arange(K)] + log_b[t]
    path = np.empty(N, dtype=np.int64)
    path[-1] = int(np.argmax(delta))
    for t in range(N - 1, 0, -1):
        path[t - 1] = psi[t, path[t]]
    return path


def nearest_neighbor_1d(z):
    z = np.ascontiguousarray(z, dtype=np.float64)
    n = z.shape[0]
    if n < 2:
        raise ValueError("need at least two points")
    order = np.argsort(z, kind="stable")
    zs = z[order]
    new_group = np.r_[True, zs[1:] != zs[:-1]]
    starts = np.flatnonzero(new_group)
    sizes = np.diff(np.r_[starts, n])
    gid = np.cumsum(new_group) - 1
    ng = starts.size

    first = order[starts]
    second = np.where(sizes >= 2, order[np.minimum(starts + 1, n - 1)], -1)
    values = zs[starts]

    nn = np.empty(n, dtype=np.int64)
    g = gid
    me = order
    dup = sizes[g] >= 2
    nn[me[dup]] = np.where(me[dup] == first[g[dup]], second[g[dup]], first[g[dup]])

    single = ~dup
    gs = g[single]
    ms = me[single]
    left_ok = gs > 0
    right_ok = gs < ng - 1
    gl = np.maximum(gs - 1, 0)
    gr = np.minimum(gs + 1, ng - 1)
    dl = np.where(left_ok, values[gs] - values[gl], np.inf)
    dr = np.where(right_ok, values[gr] - values[gs], np.inf)
    pick = np.where(
        dl < dr,
        first[gl],
        np.where(dr < dl, first[gr], np.minimum(first[gl], first[gr])),
    )
    nn[ms] = pick
    return nn
