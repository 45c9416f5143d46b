"""One-class score functions; smaller score = more outlying.

These stand in for arbitrary black-box one-class classifiers: any scorer can
be plugged into the pipeline through the score-CSV interface instead.  All
scorers are deterministic given their fit and invariant to the ordering of
training rows (k-NN up to ties, broken by training-row index).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def _as_matrix(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2 or a.shape[1] < 1:
        raise ValueError("expected a (rows, features) matrix")
    if not np.isfinite(a).all():
        raise ValueError("data matrix must be finite")
    return a


def _pairwise_sq_dists(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # (len(x), len(y)) squared Euclidean distances via the expansion trick
    d2 = (x * x).sum(axis=1)[:, None] + (y * y).sum(axis=1)[None, :] - 2.0 * (x @ y.T)
    return np.maximum(d2, 0.0)


@dataclass(frozen=True)
class KnnScorer:
    """score(x) = -(mean Euclidean distance to the k nearest training rows)."""

    train: np.ndarray
    k: int

    def score(self, x) -> np.ndarray:
        q = _as_matrix(x)
        if q.shape[1] != self.train.shape[1]:
            raise ValueError("feature dimension mismatch")
        d2 = _pairwise_sq_dists(q, self.train)
        if self.k < d2.shape[1]:
            part = np.partition(d2, self.k - 1, axis=1)[:, :self.k]
        else:
            part = d2
        return -np.sqrt(part).mean(axis=1)


@dataclass(frozen=True)
class MahalanobisScorer:
    """score(x) = -sqrt((x-mu)' (Sigma + ridge I)^-1 (x-mu))."""

    mean: np.ndarray
    precision: np.ndarray  # inverse of (Sigma + ridge I)

    def score(self, x) -> np.ndarray:
        q = _as_matrix(x) - self.mean
        return -np.sqrt(np.maximum((q @ self.precision * q).sum(axis=1), 0.0))


@dataclass(frozen=True)
class MixtureOracleScorer:
    """score(x) = log density of the Gaussian mixture sum_w N(w, a I)/|W|."""

    centers: np.ndarray
    a: float

    def score(self, x) -> np.ndarray:
        q = _as_matrix(x)
        d = q.shape[1]
        if d != self.centers.shape[1]:
            raise ValueError("feature dimension mismatch")
        d2 = _pairwise_sq_dists(q, self.centers)
        expo = -0.5 * d2 / self.a
        peak = expo.max(axis=1, keepdims=True)
        lse = peak[:, 0] + np.log(np.exp(expo - peak).sum(axis=1))
        return (lse - math.log(self.centers.shape[0])
                - 0.5 * d * math.log(2.0 * math.pi * self.a))


def fit_knn(train, k: int) -> KnnScorer:
    """Mean-distance-to-k-nearest-neighbors scorer."""
    t = _as_matrix(train)
    if t.shape[0] == 0:
        raise ValueError("empty training set")
    if not 1 <= k <= t.shape[0]:
        raise ValueError(f"k must satisfy 1 <= k <= {t.shape[0]}, got {k}")
    t = t.copy()
    t.setflags(write=False)
    return KnnScorer(train=t, k=int(k))


def fit_mahalanobis(train, ridge: float = 0.0) -> MahalanobisScorer:
    """Negative Mahalanobis distance scorer with optional ridge."""
    t = _as_matrix(train)
    if t.shape[0] == 0:
        raise ValueError("empty training set")
    if ridge < 0.0:
        raise ValueError(f"ridge must be >= 0, got {ridge}")
    if ridge == 0.0 and t.shape[0] <= t.shape[1]:
        raise ValueError("covariance is rank-deficient (rows <= cols); supply ridge > 0")
    mu = t.mean(axis=0)
    d = t.shape[1]
    if t.shape[0] > 1:
        sigma = np.cov(t, rowvar=False, ddof=1).reshape(d, d)
    else:
        sigma = np.zeros((d, d))
    sigma = sigma + ridge * np.eye(d)
    try:
        np.linalg.cholesky(sigma)  # positive-definiteness check
        precision = np.linalg.inv(sigma)
    except np.linalg.LinAlgError:
        raise ValueError("singular covariance; supply ridge > 0") from None
    mu.setflags(write=False)
    precision.setflags(write=False)
    return MahalanobisScorer(mean=mu, precision=precision)


def oracle_mixture(spec, a: float) -> MixtureOracleScorer:
    """Log-density scorer for the inlier mixture law (the ideal score)."""
    if a < 1.0:
        raise ValueError(f"signal strength a must be >= 1, got {a}")
    centers = np.asarray(spec.centers, dtype=np.float64).copy()
    centers.setflags(write=False)
    return MixtureOracleScorer(centers=centers, a=float(a))
