# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for HMM recursions and 1-D nearest neighbours.

Every function here has a numpy twin in ``_kernels_py`` with the same
signature and semantics; ``kernels`` picks one at import time.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport log, INFINITY

cnp.import_array()

ctypedef cnp.float64_t f64
ctypedef cnp.int64_t i64


def forward(const f64[:, ::1] b, const f64[::1] pi, const f64[:, ::1] A):
    """Scaled forward pass. ``b`` holds emission likelihoods (row-rescaled).

    Returns (alpha_hat, c) with alpha_hat rows summing to one and c the
    per-step normalisers, so that log P(obs) = sum(log c) + row shifts.
    """
    cdef Py_ssize_t N = b.shape[0], K = b.shape[1]
    cdef Py_ssize_t t, i, j
    cdef f64 s, acc
    alpha_arr = np.empty((N, K), dtype=np.float64)
    c_arr = np.empty(N, dtype=np.float64)
    cdef f64[:, ::1] alpha = alpha_arr
    cdef f64[::1] c = c_arr

    s = 0.0
    for j in range(K):
        alpha[0, j] = pi[j] * b[0, j]
        s += alpha[0, j]
    if s <= 0.0:
        raise FloatingPointError("zero likelihood at t=0")
    c[0] = s
    for j in range(K):
        alpha[0, j] /= s

    for t in range(1, N):
        s = 0.0
        for j in range(K):
            acc = 0.0
            for i in range(K):
                acc += alpha[t - 1, i] * A[i, j]
            acc *= b[t, j]
            alpha[t, j] = acc
            s += acc
        if s <= 0.0:
            raise FloatingPointError(f"zero likelihood at t={t}")
        c[t] = s
        for j in range(K):
            alpha[t, j] /= s
    return alpha_arr, c_arr


def backward(const f64[:, ::1] b, const f64[:, ::1] A, const f64[::1] c):
    """Scaled backward pass matching :func:`forward`'s normalisers."""
    cdef Py_ssize_t N = b.shape[0], K = b.shape[1]
    cdef Py_ssize_t t, i, j
    cdef f64 acc
    beta_arr = np.empty((N, K), dtype=np.float64)
    cdef f64[:, ::1] beta = beta_arr
    cdef f64[::1] tmp = np.empty(K, dtype=np.float64)

    for j in range(K):
        beta[N - 1, j] = 1.0
    for t in range(N - 2, -1, -1):
        for j in range(K):
            tmp[j] = b[t + 1, j] * beta[t + 1, j]
        for i in range(K):
            acc = 0.0
            for j in range(K):
                acc += A[i, j] * tmp[j]
            beta[t, i] = acc / c[t + 1]
    return beta_arr


def xi_sum(const f64[:, ::1] alpha, const f64[:, ::1] beta,
           const f64[:, ::1] b, const f64[:, ::1] A, const f64[::1] c):
    """Expected transition counts summed over time."""
    cdef Py_ssize_t N = b.shape[0], K = b.shape[1]
    cdef Py_ssize_t t, i, j
    cdef f64 r
    out_arr = np.zeros((K, K), dtype=np.float64)
    cdef f64[:, ::1] out = out_arr
    for t in range(N - 1):
        for j in range(K):
            r = b[t + 1, j] * beta[t + 1, j] / c[t + 1]
            for i in range(K):
                out[i, j] += alpha[t, i] * A[i, j] * r
    return out_arr


def viterbi(const f64[:, ::1] log_b, const f64[::1] log_pi, const f64[:, ::1] log_A):
    """Most probable state path; ties resolve to the lower state index."""
    cdef Py_ssize_t N = log_b.shape[0], K = log_b.shape[1]
    cdef Py_ssize_t t, i, j, best_i
    cdef f64 best, v
    delta_arr = np.empty((N, K), dtype=np.float64)
    psi_arr = np.zeros((N, K), dtype=np.int64)
    path_arr = np.empty(N, dtype=np.int64)
    cdef f64[:, ::1] delta = delta_arr
    cdef i64[:, ::1] psi = psi_arr
    cdef i64[::1] path = path_arr

    for j in range(K):
        delta[0, j] = log_pi[j] + log_b[0, j]
    for t in range(1, N):
        for j in range(K):
            best = -INFINITY
            best_i = 0
            for i in range(K):
                v = delta[t - 1, i] + log_A[i, j]
                if v > best:
                    best = v
                    best_i = i
            delta[t, j] = best + log_b[t, j]
            psi[t, j] = best_i

    best = -INFINITY
    best_i = 0
    for j in range(K):
        if delta[N - 1, j] > best:
            best = delta[N - 1, j]
            best_i = j
    path[N - 1] = best_i
    for t in range(N - 1, 0, -1):
        path[t - 1] = psi[t, path[t]]
    return path_arr


def nearest_neighbor_1d(const f64[::1] z):
    """Index of each point's nearest other point on the line.

    Distance ties (including exact duplicates) go to the smallest index,
    i.e. the earliest epoch when ``z`` is in time order.
    """
    cdef Py_ssize_t n = z.shape[0]
    if n < 2:
        raise ValueError("need at least two points")
    order_arr = np.argsort(np.asarray(z), kind="stable").astype(np.int64)
    cdef i64[::1] order = order_arr
    # group starts over the sorted values
    starts_arr = np.empty(n + 1, dtype=np.int64)
    cdef i64[::1] starts = starts_arr
    cdef Py_ssize_t g = 0, k, p, q, ng
    starts[0] = 0
    for k in range(1, n):
        if z[order[k]] != z[order[k - 1]]:
            g += 1
            starts[g] = k
    ng = g + 1
    starts[ng] = n

    nn_arr = np.empty(n, dtype=np.int64)
    cdef i64[::1] nn = nn_arr
    cdef i64 m_left, m_right, me, first, second
    cdef f64 dl, dr, v
    for g in range(ng):
        p = starts[g]
        q = starts[g + 1]
        v = z[order[p]]
        if q - p >= 2:
            # stable sort keeps original index order inside a tie group
            first = order[p]
            second = order[p + 1]
            for k in range(p, q):
                me = order[k]
                nn[me] = second if me == first else first
            continue
        me = order[p]
        if g == 0:
            nn[me] = order[starts[1]]
        elif g == ng - 1:
            nn[me] = order[starts[g - 1]]
        else:
            m_left = order[starts[g - 1]]
            m_right = order[q]
            dl = v - z[m_left]
            dr = z[m_right] - v
            if dl < dr:
                nn[me] = m_left
            elif dr < dl:
                nn[me] = m_right
            else:
                nn[me] = m_left if m_left < m_right else m_right
    return nn_arr
