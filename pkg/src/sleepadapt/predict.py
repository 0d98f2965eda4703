"""Marginal logistic and continuation-ratio models scored by LOOCV AUC."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, log_expit
from scipy.stats import rankdata

from .errors import DataError, SingleClassError

MAX_ITER = 100
TOL = 1e-8
COEF_CAP = 30.0
ORDINAL_CLASSES = ("Early", "Mid", "Late")


def _design(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return np.column_stack([np.ones(len(x)), x])


def _loglik(X, y, beta) -> float:
    eta = X @ beta
    return float((y * log_expit(eta) + (1 - y) * log_expit(-eta)).sum())


@dataclass
class BinaryModel:
    coef: np.ndarray  # intercept first
    converged: bool
    separated: bool = False
    feature_id: str = ""
    loglik_history: list[float] = field(default_factory=list)

    @property
    def beta0(self) -> float:
        return float(self.coef[0])

    @property
    def beta1(self) -> float:
        return float(self.coef[1])

    def predict_proba(self, x) -> np.ndarray:
        return expit(_design(x) @ self.coef)


def fit_logistic(x, y, feature_id: str = "", max_iter: int = MAX_ITER, tol: float = TOL) -> BinaryModel:
    """Logistic MLE by IRLS with step halving.

    Diverging coefficients (complete or quasi-complete separation) are
    rescaled so that max |beta| = 30 and the fit is flagged unconverged.
    """
    X = _design(x)
    y = np.asarray(y, dtype=float).ravel()
    if len(y) != len(X):
        raise DataError("x and y lengths differ")
    if not np.all(np.isfinite(X)):
        raise DataError("non-finite covariates")
    n1 = int(y.sum())
    if n1 == 0 or n1 == len(y):
        raise SingleClassError("logistic fit needs both outcome classes")

    beta = np.zeros(X.shape[1])
    ll = _loglik(X, y, beta)
    history = [ll]
    for _ in range(max_iter):
        p = expit(X @ beta)
        W = p * (1 - p)
        H = X.T @ (W[:, None] * X)
        g = X.T @ (y - p)
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, g, rcond=None)[0]
        for _ in range(40):
            cand = beta + step
            ll_new = _loglik(X, y, cand)
            if ll_new >= ll - 1e-12 * abs(ll):
                break
            step = step / 2
        else:
            cand, ll_new = beta, ll
        delta = np.max(np.abs(cand - beta))
        beta, ll = cand, ll_new
        history.append(ll)
        if np.max(np.abs(beta)) > COEF_CAP:
            beta = beta * (COEF_CAP / np.max(np.abs(beta)))
            return BinaryModel(beta, False, True, feature_id, history)
        if delta < tol:
            return BinaryModel(beta, True, False, feature_id, history)
    return BinaryModel(beta, False, False, feature_id, history)


@dataclass
class OrdinalModel:
    """Continuation-ratio logits: level j vs levels >= j, for j = 1, 2."""

    level1: BinaryModel
    level2: BinaryModel

    @property
    def converged(self) -> bool:
        return self.level1.converged and self.level2.converged

    def predict_proba(self, x) -> np.ndarray:
        """Columns Pr(Y=1), Pr(Y=2), Pr(Y=3)."""
        p1 = self.level1.predict_proba(x)
        q2 = self.level2.predict_proba(x)
        return np.column_stack([p1, (1 - p1) * q2, (1 - p1) * (1 - q2)])


def fit_continuation_ratio(x, y, feature_id: str = "") -> OrdinalModel:
    y = np.asarray(y).astype(np.int64).ravel()
    if not np.isin(y, (1, 2, 3)).all():
        raise DataError("ordinal labels must be in {1, 2, 3}")
    for lvl in (1, 2, 3):
        if not (y == lvl).any():
            raise SingleClassError(f"ordinal level {lvl} is empty")
    x = np.asarray(x, dtype=float)
    m1 = fit_logistic(x, y == 1, feature_id)
    ge2 = y >= 2
    m2 = fit_logistic(x[ge2], y[ge2] == 2, feature_id)
    return OrdinalModel(m1, m2)


def auc(scores, labels) -> float:
    """Mann-Whitney AUC: P(score_pos > score_neg) with ties counted one half."""
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(labels).astype(bool).ravel()
    n1 = int(y.sum())
    n0 = y.size - n1
    if n1 == 0 or n0 == 0:
        raise SingleClassError("AUC needs both classes")
    r = rankdata(s)
    return float((r[y].sum() - n1 * (n1 + 1) / 2) / (n1 * n0))


@dataclass
class LoocvResult:
    auc: float | dict[str, float]
    scores: np.ndarray  # held-out scores; NaN for skipped folds
    skipped: list[int]


def loocv_auc(x, y, kind: str = "binary") -> LoocvResult:
    """Leave-one-out held-out scores and their AUC.

    ``kind="binary"`` scores Pr(Y=1); ``kind="ordinal"`` scores each class's
    probability and returns one-vs-rest AUCs keyed Early/Mid/Late. Folds
    whose training labels cannot be fitted are skipped and reported.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y).astype(np.int64).ravel()
    n = y.size
    if n < 4:
        raise DataError("LOOCV needs at least 4 samples")
    width = 1 if kind == "binary" else 3
    held = np.full((n, width), np.nan)
    skipped = []
    for i in range(n):
        tr = np.arange(n) != i
        try:
            if kind == "binary":
                held[i, 0] = fit_logistic(x[tr], y[tr]).predict_proba(x[i : i + 1])[0]
            elif kind == "ordinal":
                held[i] = fit_continuation_ratio(x[tr], y[tr]).predict_proba(x[i : i + 1])[0]
            else:
                raise ValueError(f"unknown model kind {kind!r}")
        except SingleClassError:
            skipped.append(i)
    ok = np.isfinite(held[:, 0])
    if kind == "binary":
        lab = y[ok] == 1
        value = auc(held[ok, 0], lab) if 0 < lab.sum() < lab.size else float("nan")
        return LoocvResult(value, held[:, 0], skipped)
    aucs = {}
    for c, name in enumerate(ORDINAL_CLASSES, start=1):
        lab = y[ok] == c
        aucs[name] = auc(held[ok, c - 1], lab) if 0 < lab.sum() < lab.size else float("nan")
    return LoocvResult(aucs, held, skipped)
