"""Multivariate Gaussian HMM used to bootstrap sleep/wake labels.

The HMM is fitted by Baum-Welch on an early, unperturbed stretch of the
recording, decoded with Viterbi, and its states collapsed to a binary
sleep label (the lowest-heart-rate state is sleep). Several feature/state
configurations are fitted and the one whose labelled window is most
separable (highest SI under its own Fisher direction) is kept.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular

from . import kernels
from .errors import ConfigError, DataError, FitError, SingleClassError
from .lda import fit_lda

MAX_ITER = 500
TOL = 1e-6
N_RESTARTS = 5
COV_FLOOR = 1e-6
MIN_ROWS_PER_PARAM = 10
K_BOUNDS = (2, 4)


@dataclass(frozen=True)
class ModelConfig:
    features: tuple[str, ...]
    K: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "features", tuple(self.features))
        if not self.features:
            raise ConfigError("model config needs at least one feature")
        if not K_BOUNDS[0] <= self.K <= K_BOUNDS[1]:
            raise ConfigError(f"K={self.K} outside {K_BOUNDS}")

    def label(self) -> str:
        return f"{'+'.join(self.features)}|K={self.K}"


DEFAULT_POOL = (
    ModelConfig(("HR_MED", "HR_SD", "ACC_SD"), 2),
    ModelConfig(("HR_MED", "HR_SD", "ACC_SD"), 3),
)


@dataclass
class HmmModel:
    means: np.ndarray  # K x d
    covs: np.ndarray  # K x d x d
    A: np.ndarray
    pi: np.ndarray
    feature_ids: tuple[str, ...] = ()
    seed: int = 0
    loglik: float = float("nan")
    loglik_history: list[float] = field(default_factory=list)

    @property
    def K(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def log_emission(self, obs) -> np.ndarray:
        X = _as_obs(obs, self.dim)
        return _log_gauss(X, self.means, self.covs)

    def log_likelihood(self, obs) -> float:
        logb = self.log_emission(obs)
        shift = logb.max(axis=1, keepdims=True)
        _, c = kernels.forward(np.exp(logb - shift), self.pi, self.A)
        return float(np.log(c).sum() + shift.sum())

    def to_json(self) -> dict:
        return {
            "K": self.K,
            "feature_ids": list(self.feature_ids),
            "means": self.means.tolist(),
            "covariances": self.covs.tolist(),
            "transition": self.A.tolist(),
            "initial": self.pi.tolist(),
            "seed": self.seed,
            "loglik": self.loglik,
        }

    @classmethod
    def from_json(cls, doc: dict | str) -> "HmmModel":
        if isinstance(doc, str):
            doc = json.loads(doc)
        return cls(
            np.array(doc["means"], dtype=float),
            np.array(doc["covariances"], dtype=float),
            np.array(doc["transition"], dtype=float),
            np.array(doc["initial"], dtype=float),
            tuple(doc["feature_ids"]),
            int(doc.get("seed", 0)),
            float(doc.get("loglik", float("nan"))),
        )


def _as_obs(obs, dim: int | None = None) -> np.ndarray:
    X = np.asarray(obs, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if dim is not None and X.shape[1] != dim:
        raise DataError(f"observation dimension {X.shape[1]} != model dimension {dim}")
    return X


def _log_gauss(X: np.ndarray, means: np.ndarray, covs: np.ndarray) -> np.ndarray:
    N, d = X.shape
    out = np.empty((N, means.shape[0]))
    for k in range(means.shape[0]):
        L = np.linalg.cholesky(covs[k])
        sol = solve_triangular(L, (X - means[k]).T, lower=True)
        out[:, k] = -0.5 * (d * math.log(2 * math.pi) + (sol**2).sum(axis=0)) - np.log(np.diag(L)).sum()
    return out


def _kmeans_init(X: np.ndarray, K: int, rng: np.random.Generator, n_iter: int = 100) -> np.ndarray:
    """k-means on standardised rows; returns hard assignments."""
    Z = (X - X.mean(axis=0)) / X.std(axis=0)
    centers = [Z[rng.integers(len(Z))]]
    d2 = ((Z - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, K):
        centers.append(Z[int(np.argmax(d2))])
        d2 = np.minimum(d2, ((Z - centers[-1]) ** 2).sum(axis=1))
    C = np.array(centers)
    assign = np.zeros(len(Z), dtype=np.int64)
    for _ in range(n_iter):
        new = np.argmin(((Z[:, None, :] - C[None]) ** 2).sum(axis=2), axis=1)
        if np.array_equal(new, assign) and _ > 0:
            break
        assign = new
        for k in range(K):
            if (assign == k).any():
                C[k] = Z[assign == k].mean(axis=0)
    return assign


def _em(X, K, rng, eps, max_iter, tol):
    N, d = X.shape
    assign = _kmeans_init(X, K, rng)
    global_cov = np.cov(X.T).reshape(d, d)
    means = np.empty((K, d))
    covs = np.empty((K, d, d))
    for k in range(K):
        Xk = X[assign == k]
        means[k] = Xk.mean(axis=0) if len(Xk) else X[rng.integers(N)]
        covs[k] = (np.cov(Xk.T).reshape(d, d) if len(Xk) > d else global_cov) + np.diag(eps)
    pi = np.full(K, 1.0 / K)
    A = np.full((K, K), 0.1 / (K - 1))
    np.fill_diagonal(A, 0.9)

    history: list[float] = []
    for _ in range(max_iter):
        logb = _log_gauss(X, means, covs)
        shift = logb.max(axis=1, keepdims=True)
        b = np.ascontiguousarray(np.exp(logb - shift))
        alpha, c = kernels.forward(b, pi, A)
        ll = float(np.log(c).sum() + shift.sum())
        history.append(ll)
        if len(history) > 1 and abs(ll - history[-2]) < tol * abs(history[-2]):
            break
        beta = kernels.backward(b, A, c)
        post = alpha * beta
        post /= post.sum(axis=1, keepdims=True)
        xi = kernels.xi_sum(alpha, beta, b, A, c)

        pi = post[0] / post[0].sum()
        rows = xi.sum(axis=1)
        A = np.where(rows[:, None] > 0, xi / np.where(rows > 0, rows, 1)[:, None], A)
        w = post.sum(axis=0)
        means = (post.T @ X) / w[:, None]
        for k in range(K):
            D = X - means[k]
            covs[k] = (post[:, k, None] * D).T @ D / w[k] + np.diag(eps)
            covs[k] = 0.5 * (covs[k] + covs[k].T)
    return HmmModel(means, covs, A, pi, loglik=history[-1], loglik_history=history)


def fit_hmm(
    obs,
    K: int,
    seed: int = 0,
    feature_ids: Sequence[str] = (),
    n_restarts: int = N_RESTARTS,
    max_iter: int = MAX_ITER,
    tol: float = TOL,
) -> HmmModel:
    """Baum-Welch from k-means starts; the best of ``n_restarts`` is returned."""
    if K < 2:
        raise ConfigError("K must be >= 2")
    X = _as_obs(obs)
    N, d = X.shape
    if not np.all(np.isfinite(X)):
        raise DataError("non-finite observations")
    if N < MIN_ROWS_PER_PARAM * K * d:
        raise DataError(f"{N} rows < {MIN_ROWS_PER_PARAM}*K*dim = {MIN_ROWS_PER_PARAM * K * d}")
    var = X.var(axis=0)
    if np.any(var == 0):
        raise FitError("degenerate observations: zero variance in " + ", ".join(
            str(feature_ids[j]) if feature_ids else f"column {j}" for j in np.flatnonzero(var == 0)))
    eps = COV_FLOOR * var

    best, causes = None, []
    for r in range(n_restarts):
        rng = np.random.default_rng([seed, r])
        try:
            with np.errstate(divide="ignore", under="ignore"):
                m = _em(X, K, rng, eps, max_iter, tol)
        except (np.linalg.LinAlgError, FloatingPointError) as exc:
            causes.append(f"restart {r}: {exc}")
            continue
        if not (len(m.loglik_history) > 1 and m.loglik_history[-1] > m.loglik_history[0]):
            causes.append(f"restart {r}: no improvement over initialisation")
            continue
        if best is None or m.loglik > best.loglik:
            best = m
    if best is None:
        raise FitError("EM failed on all restarts: " + "; ".join(causes))
    best.feature_ids = tuple(feature_ids)
    best.seed = seed
    return best


def decode(model: HmmModel, obs) -> np.ndarray:
    """Viterbi path (state indices)."""
    logb = model.log_emission(obs)
    with np.errstate(divide="ignore"):
        return kernels.viterbi(
            np.ascontiguousarray(logb), np.log(model.pi), np.ascontiguousarray(np.log(model.A))
        )


def sleep_state(model: HmmModel) -> int:
    """Index of the state read as sleep: lowest HR mean, else lowest ACC SD mean."""
    fids = list(model.feature_ids)
    for pref in ("HR_MED", "HR_MEAN", "HR_SD", "ACC_SD"):
        if pref in fids:
            return int(np.argmin(model.means[:, fids.index(pref)]))
    hr = [i for i, f in enumerate(fids) if f.startswith("HR_")]
    if hr:
        return int(np.argmin(model.means[:, hr[0]]))
    raise DataError(f"no HR or ACC_SD feature to identify the sleep state in {fids}")


def derive_sleep_labels(model: HmmModel, states) -> np.ndarray:
    return (np.asarray(states) == sleep_state(model)).astype(np.int8)


@dataclass
class Candidate:
    config: ModelConfig
    model: HmmModel | None = None
    labels: np.ndarray | None = None
    si: float = float("nan")
    error: str | None = None

    def to_json(self) -> dict:
        return {"config": self.config.label(), "si": self.si, "error": self.error}


@dataclass
class Selection:
    model: HmmModel
    config: ModelConfig
    labels: np.ndarray
    si: float
    candidates: list[Candidate]


def select_model(configs: Sequence[ModelConfig], series, init_rows: np.ndarray, seed: int = 0) -> Selection:
    """Fit every config on ``series`` rows ``init_rows`` and keep the best by SI.

    ``init_rows`` are integer indices of clean epochs in time order. Ties in
    SI prefer fewer features, then fewer states, then pool order.
    """
    from .adaptive import separability_index

    if not configs:
        raise ConfigError("empty model-config pool")
    cands = []
    for cfg in configs:
        cand = Candidate(cfg)
        cands.append(cand)
        try:
            X = series.matrix(cfg.features)[init_rows]
            model = fit_hmm(X, cfg.K, seed, cfg.features)
            labels = derive_sleep_labels(model, decode(model, X))
            clf = fit_lda(X, labels)
            cand.model, cand.labels = model, labels
            cand.si = separability_index(X, labels, clf.w)
        except (DataError, FitError, ConfigError, SingleClassError) as exc:
            cand.error = f"{type(exc).__name__}: {exc}"
    ok = [(i, c) for i, c in enumerate(cands) if c.error is None]
    if not ok:
        raise FitError("all HMM configs failed: " + "; ".join(f"{c.config.label()}: {c.error}" for c in cands))
    _, best = min(ok, key=lambda ic: (-ic[1].si, len(ic[1].config.features), ic[1].config.K, ic[0]))
    return Selection(best.model, best.config, best.labels, best.si, cands)
