"""Two-class Fisher linear discriminant with a variance-weighted decision rule."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, SingleClassError

RIDGE = 1e-8
# S_W is ridge-regularised only past this condition number, so that
# well-posed problems are solved exactly.
COND_LIMIT = 1e12


@dataclass(frozen=True)
class LdaClassifier:
    w: np.ndarray
    z_mean0: float
    z_mean1: float
    var0: float
    var1: float
    gamma: float
    centroid0: np.ndarray
    centroid1: np.ndarray
    scatter: np.ndarray
    n0: int
    n1: int
    regularized: bool = False

    @property
    def dim(self) -> int:
        return self.w.size

    def score(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return X @ self.w if X.ndim > 1 else np.atleast_1d(X @ self.w)

    def decision(self, X) -> np.ndarray:
        """Left side minus right side of the decision inequality (>0 means sleep)."""
        z = self.score(X)
        q = (z - self.z_mean0) ** 2 / self.var0 - (z - self.z_mean1) ** 2 / self.var1
        return q - np.log(self.gamma * self.var1 / self.var0)

    def classify(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.dim:
            raise DataError(f"sample dimension {X.shape[-1]} != classifier dimension {self.dim}")
        return (self.decision(X) > 0).astype(np.int8)

    def to_json(self) -> dict:
        return {
            "w": self.w.tolist(),
            "z_mean": [self.z_mean0, self.z_mean1],
            "z_var": [self.var0, self.var1],
            "gamma": self.gamma,
            "n": [self.n0, self.n1],
            "regularized": self.regularized,
        }


def within_class_scatter(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    S = np.zeros((X.shape[1], X.shape[1]))
    for k in (0, 1):
        D = X[y == k] - X[y == k].mean(axis=0)
        S += D.T @ D
    return S


def fit_lda(X, y, gamma: float = 1.0, ridge: float = RIDGE) -> LdaClassifier:
    """Fit w = S_W^{-1} (xbar_1 - xbar_0) and the per-class score moments."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y).astype(np.int64).ravel()
    if X.shape[0] != y.size:
        raise DataError("X and y lengths differ")
    if not np.all(np.isfinite(X)):
        raise DataError("non-finite training samples")
    n0, n1 = int((y == 0).sum()), int((y == 1).sum())
    if n0 < 2 or n1 < 2:
        raise SingleClassError(f"need >= 2 samples per class, got {n0} wake / {n1} sleep")

    c0, c1 = X[y == 0].mean(axis=0), X[y == 1].mean(axis=0)
    S = within_class_scatter(X, y)
    regularized = False
    if np.linalg.cond(S) > COND_LIMIT:
        S = S + ridge * np.trace(S) / S.shape[0] * np.eye(S.shape[0])
        regularized = True
    try:
        w = np.linalg.solve(S, c1 - c0)
    except np.linalg.LinAlgError as exc:
        raise DataError(f"within-class scatter is singular: {exc}") from exc
    if not np.all(np.isfinite(w)) or not np.any(w):
        raise DataError("degenerate discriminant direction")

    z = X @ w
    z0, z1 = z[y == 0], z[y == 1]
    v0, v1 = float(z0.var(ddof=1)), float(z1.var(ddof=1))
    if not (v0 > 0 and v1 > 0):
        raise DataError("zero within-class score variance")
    return LdaClassifier(
        w, float(z0.mean()), float(z1.mean()), v0, v1, float(gamma), c0, c1, S, n0, n1, regularized
    )


def fisher_criterion(w, X, y) -> float:
    """Between-class over within-class variation of the projected scores."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    z = X @ np.asarray(w, dtype=float)
    zbar = z.mean()
    z0, z1 = z[y == 0], z[y == 1]
    num = (z1.mean() - zbar) ** 2 + (z0.mean() - zbar) ** 2
    den = ((z1 - z1.mean()) ** 2).sum() + ((z0 - z0.mean()) ** 2).sum()
    return float(num / den)
