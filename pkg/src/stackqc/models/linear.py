"""Linear least-squares regression and L2 logistic regression (IRLS)."""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateLabels


class LinearRegression:
    """Ordinary least squares, optionally ridge-penalized.

    Rank-deficient systems are solved through the pseudo-inverse and flagged
    in ``rank_deficient_``.
    """

    def __init__(self, l2: float = 0.0):
        self.l2 = float(l2)

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        n, p = X.shape
        A = np.hstack([np.ones((n, 1)), X])
        if self.l2 > 0:
            penalty = np.eye(p + 1) * self.l2
            penalty[0, 0] = 0.0  # never penalize the intercept
            gram = A.T @ A + penalty
            beta = np.linalg.solve(gram, A.T @ y)
            self.rank_deficient_ = False
        else:
            beta, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
            self.rank_deficient_ = rank < p + 1
        self.intercept_ = float(beta[0])
        self.coef_ = beta[1:]
        self.train_std_ = X.std(axis=0)
        self.n_features_ = p
        return self

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        return X @ self.coef_ + self.intercept_

    def feature_importances(self) -> np.ndarray:
        imp = np.abs(self.coef_ * self.train_std_)
        s = imp.sum()
        return imp / s if s > 0 else np.full(self.n_features_, 1.0 / self.n_features_)


class LogisticRegression:
    """Binary logistic regression fit by iteratively reweighted least
    squares with L2 strength ``l2`` on the weights (not the intercept)."""

    def __init__(self, l2: float = 1.0, max_iter: int = 100, tol: float = 1e-10):
        self.l2 = float(l2)
        self.max_iter = int(max_iter)
        self.tol = float(tol)

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if np.unique(y).size < 2:
            raise DegenerateLabels("logistic regression needs both classes")
        n, p = X.shape
        A = np.hstack([np.ones((n, 1)), X])
        beta = np.zeros(p + 1)
        penalty = np.eye(p + 1) * self.l2
        penalty[0, 0] = 0.0
        for _ in range(self.max_iter):
            z = A @ beta
            prob = 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))
            grad = A.T @ (y - prob) - penalty @ beta
            if np.max(np.abs(grad)) < self.tol:
                break
            w = np.maximum(prob * (1.0 - prob), 1e-9)
            hess = (A * w[:, None]).T @ A + penalty
            try:
                step = np.linalg.solve(hess, grad)
            except np.linalg.LinAlgError:
                step = np.linalg.pinv(hess) @ grad
            beta = beta + step
        self.intercept_ = float(beta[0])
        self.coef_ = beta[1:]
        self.train_std_ = X.std(axis=0)
        self.n_features_ = p
        return self

    def decision_function(self, X):
        X = np.asarray(X, dtype=np.float64)
        return X @ self.coef_ + self.intercept_

    def predict(self, X):
        """Probability of the positive (include) class."""
        return 1.0 / (1.0 + np.exp(-np.clip(self.decision_function(X), -500, 500)))

    def feature_importances(self) -> np.ndarray:
        imp = np.abs(self.coef_ * self.train_std_)
        s = imp.sum()
        return imp / s if s > 0 else np.full(self.n_features_, 1.0 / self.n_features_)


class ConstantModel:
    """Baseline predictor: always returns a fixed value."""

    def __init__(self, value: float = 0.0):
        self.value = float(value)

    def fit(self, X, y):
        self.n_features_ = np.asarray(X).shape[1]
        return self

    def predict(self, X):
        return np.full(len(X), self.value)
