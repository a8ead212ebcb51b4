"""Evaluation primitives: F1 scores, clustering agreement, k-means, linear SVM.

Everything here is deterministic given its seed so experiment runs are
reproducible bit-for-bit.
"""

from __future__ import annotations

from math import comb

import numpy as np


def accuracy(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    return float(np.mean(y_true == y_pred))


def f1_scores(y_true, y_pred, num_classes: int) -> tuple[float, float]:
    """(macro_f1, micro_f1) over classes 0..num_classes-1.

    A class with an empty F1 denominator contributes 0. For single-label
    predictions micro-F1 coincides with plain accuracy.
    """
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    tp = np.zeros(num_classes)
    fp = np.zeros(num_classes)
    fn = np.zeros(num_classes)
    for c in range(num_classes):
        tp[c] = np.sum((y_pred == c) & (y_true == c))
        fp[c] = np.sum((y_pred == c) & (y_true != c))
        fn[c] = np.sum((y_pred != c) & (y_true == c))
    denom = 2 * tp + fp + fn
    per_class = np.where(denom > 0, 2 * tp / np.where(denom > 0, denom, 1), 0.0)
    macro = float(per_class.mean())
    total = 2 * tp.sum() + fp.sum() + fn.sum()
    micro = float(2 * tp.sum() / total) if total > 0 else 0.0
    return macro, micro


def _contingency(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ua, ia = np.unique(a, return_inverse=True)
    ub, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ua.size, ub.size), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    return table


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def nmi(a, b) -> float:
    """Normalized mutual information with arithmetic-mean normalization.

    Defined as 0 when either labeling has zero entropy.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    table = _contingency(a, b)
    n = table.sum()
    row = table.sum(axis=1)
    col = table.sum(axis=0)
    h_a = _entropy(row)
    h_b = _entropy(col)
    if h_a == 0.0 or h_b == 0.0:
        return 0.0
    nz = table > 0
    p = table[nz] / n
    outer = np.outer(row, col)[nz] / (n * n)
    mi = float((p * np.log(p / outer)).sum())
    return mi / ((h_a + h_b) / 2.0)


def ari(a, b) -> float:
    """Adjusted Rand index; 1.0 by convention when both partitions are trivial."""
    table = _contingency(np.asarray(a), np.asarray(b))
    n = int(table.sum())
    sum_cells = sum(comb(int(x), 2) for x in table.ravel())
    sum_rows = sum(comb(int(x), 2) for x in table.sum(axis=1))
    sum_cols = sum(comb(int(x), 2) for x in table.sum(axis=0))
    total = comb(n, 2)
    expected = sum_rows * sum_cols / total if total else 0.0
    maximum = (sum_rows + sum_cols) / 2.0
    if maximum == expected:
        return 1.0
    return float((sum_cells - expected) / (maximum - expected))


def kmeans(
    X: np.ndarray,
    k: int,
    seed: int = 0,
    restarts: int = 10,
    max_iters: int = 300,
    tol: float = 1e-6,
) -> tuple[np.ndarray, float]:
    """Lloyd's algorithm with k-means++ seeding; best inertia over restarts."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if k > n:
        raise ValueError(f"k = {k} exceeds number of points {n}")
    rng = np.random.default_rng(seed)
    best_labels = None
    best_inertia = np.inf
    for _ in range(restarts):
        centers = _kmeanspp(X, k, rng)
        labels = np.zeros(n, dtype=np.int64)
        prev_inertia = np.inf
        for _ in range(max_iters):
            dists = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            labels = dists.argmin(axis=1)
            inertia = float(dists[np.arange(n), labels].sum())
            for c in range(k):
                members = labels == c
                if members.any():
                    centers[c] = X[members].mean(axis=0)
                else:
                    # resurrect empty clusters at the farthest point
                    far = dists[np.arange(n), labels].argmax()
                    centers[c] = X[far]
                    labels[far] = c
            if prev_inertia < np.inf and (
                prev_inertia - inertia <= tol * max(prev_inertia, 1e-12)
            ):
                break
            prev_inertia = inertia
        dists = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = dists.argmin(axis=1)
        inertia = float(dists[np.arange(n), labels].sum())
        if inertia < best_inertia:
            best_inertia = inertia
            best_labels = labels
    return best_labels, best_inertia


def _kmeanspp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    closest = ((X - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = closest.sum()
        if total <= 0:
            centers[c] = X[rng.integers(n)]
        else:
            centers[c] = X[rng.choice(n, p=closest / total)]
        closest = np.minimum(closest, ((X - centers[c]) ** 2).sum(axis=1))
    return centers.copy()


class LinearSVM:
    """One-vs-rest linear SVM trained by full-batch subgradient descent.

    Hinge loss with L2 regularization and step size 1/(lam * t); the bias
    rides along as a constant feature so the whole vector shares the
    regularizer's shrinkage. Prediction is the argmax of per-class scores.
    """

    def __init__(self, num_classes: int, lam: float = 1e-3, epochs: int = 500, seed: int = 0):
        self.num_classes = num_classes
        self.lam = lam
        self.epochs = epochs
        self.seed = seed
        self.w = None
        self.b = None

    def fit(self, X: np.ndarray, y: np.ndarray) -> "LinearSVM":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        aug = np.hstack([X, np.ones((X.shape[0], 1))])
        n, d = aug.shape
        rng = np.random.default_rng(self.seed)
        w = rng.normal(0.0, 1e-6, size=(self.num_classes, d))
        signs = np.where(y[None, :] == np.arange(self.num_classes)[:, None], 1.0, -1.0)
        for t in range(1, self.epochs + 1):
            eta = 1.0 / (self.lam * t)
            margins = signs * (aug @ w.T).T
            violating = (margins < 1.0).astype(np.float64)
            grad = self.lam * w - (violating * signs) @ aug / n
            w -= eta * grad
        self.w = w[:, :-1]
        self.b = w[:, -1]
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        scores = np.asarray(X, dtype=np.float64) @ self.w.T + self.b
        return scores.argmax(axis=1)
