"""Tree ensembles on the shared CART core: random forest, gradient
boosting and SAMME AdaBoost stumps.

Default hyperparameters follow the conventional library defaults the
original experiments relied on (compatibility table):

====================  =========================================
random forest         100 trees, unlimited depth, sqrt(p)
                      features/split for classification, p/3
                      for regression, bootstrap sampling
gradient boosting     100 rounds, depth 3, learning rate 0.1,
                      subsample 1.0
adaboost              50 depth-1 stumps, learning rate 1.0
====================  =========================================

All fits are deterministic given (hyperparameters, seed, data); per-tree
random streams derive from (seed, tree index) so results do not depend on
scheduling.
"""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateLabels
from .tree import DecisionTree


def _tree_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, index)))


def _check_classification_target(y):
    classes = np.unique(y)
    if classes.size < 2:
        raise DegenerateLabels("classification target has a single class")
    if not np.all(np.isin(classes, (0.0, 1.0))):
        raise ValueError("classification target must be binary 0/1")


class RandomForest:
    """Bagged CART trees; mean of per-tree predictions (class-1 fraction
    leaves for classification)."""

    def __init__(self, task: str = "regression", n_trees: int = 100,
                 max_depth=None, max_features="auto", min_samples_leaf: int = 1,
                 seed: int = 0, oob: bool = False):
        self.task = task
        self.n_trees = int(n_trees)
        self.max_depth = max_depth
        if max_features == "auto":
            max_features = "sqrt" if task == "classification" else "third"
        self.max_features = max_features
        self.min_samples_leaf = int(min_samples_leaf)
        self.seed = int(seed)
        self.oob = oob

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if self.task == "classification":
            _check_classification_target(y)
        n = len(y)
        criterion = "gini" if self.task == "classification" else "variance"
        self.trees_ = []
        oob_sum = np.zeros(n)
        oob_count = np.zeros(n)
        for t in range(self.n_trees):
            rng = _tree_rng(self.seed, t)
            sample = rng.integers(0, n, n)
            tree = DecisionTree(criterion=criterion, max_depth=self.max_depth,
                                min_samples_leaf=self.min_samples_leaf,
                                max_features=self.max_features,
                                splitter="best", rng=rng)
            tree.fit(X[sample], y[sample])
            self.trees_.append(tree)
            if self.oob:
                mask = np.ones(n, dtype=bool)
                mask[sample] = False
                if mask.any():
                    oob_sum[mask] += tree.predict(X[mask])
                    oob_count[mask] += 1
        if self.oob:
            seen = oob_count > 0
            self.oob_prediction_ = np.full(n, np.nan)
            self.oob_prediction_[seen] = oob_sum[seen] / oob_count[seen]
        self.n_features_ = X.shape[1]
        return self

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        acc = np.zeros(len(X))
        for tree in self.trees_:
            acc += tree.predict(X)
        return acc / len(self.trees_)

    def feature_importances(self) -> np.ndarray:
        total = np.zeros(self.n_features_)
        for tree in self.trees_:
            total += tree.importances_
        s = total.sum()
        return total / s if s > 0 else np.full(self.n_features_, 1.0 / self.n_features_)


class ExtraTrees(RandomForest):
    """Extremely randomized trees: no bootstrap, one uniform random
    threshold per candidate feature."""

    def __init__(self, task: str = "regression", n_trees: int = 100,
                 max_depth=None, max_features=None, min_samples_leaf: int = 1,
                 seed: int = 0):
        super().__init__(task=task, n_trees=n_trees, max_depth=max_depth,
                         max_features="auto", min_samples_leaf=min_samples_leaf,
                         seed=seed, oob=False)
        if max_features is not None:
            self.max_features = max_features
        elif task == "regression":
            self.max_features = None  # all features

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if self.task == "classification":
            _check_classification_target(y)
        criterion = "gini" if self.task == "classification" else "variance"
        self.trees_ = []
        for t in range(self.n_trees):
            rng = _tree_rng(self.seed, t)
            tree = DecisionTree(criterion=criterion, max_depth=self.max_depth,
                                min_samples_leaf=self.min_samples_leaf,
                                max_features=self.max_features,
                                splitter="random", rng=rng)
            tree.fit(X, y)
            self.trees_.append(tree)
        self.n_features_ = X.shape[1]
        return self


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))


class GradientBoosting:
    """Least-squares boosting for regression, binomial deviance with
    Newton leaf steps for classification. ``train_losses_`` records the
    training loss after every round."""

    def __init__(self, task: str = "regression", n_rounds: int = 100,
                 max_depth: int = 3, learning_rate: float = 0.1,
                 subsample: float = 1.0, seed: int = 0):
        self.task = task
        self.n_rounds = int(n_rounds)
        self.max_depth = int(max_depth)
        self.learning_rate = float(learning_rate)
        self.subsample = float(subsample)
        self.seed = int(seed)

    def _loss(self, y, score):
        if self.task == "regression":
            return float(np.mean((y - score) ** 2))
        p = _sigmoid(score)
        eps = 1e-12
        return float(-np.mean(y * np.log(p + eps) + (1 - y) * np.log(1 - p + eps)))

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        n = len(y)
        if self.task == "classification":
            _check_classification_target(y)
            pos = y.mean()
            self.base_score_ = float(np.log(pos / (1.0 - pos)))
        else:
            self.base_score_ = float(y.mean())

        score = np.full(n, self.base_score_)
        self.trees_ = []
        self.train_losses_ = [self._loss(y, score)]
        for t in range(self.n_rounds):
            rng = _tree_rng(self.seed, t)
            if self.task == "classification":
                residual = y - _sigmoid(score)
            else:
                residual = y - score
            rows = np.arange(n)
            if self.subsample < 1.0:
                m = max(1, int(round(self.subsample * n)))
                rows = np.sort(rng.permutation(n)[:m])
            tree = DecisionTree(criterion="variance", max_depth=self.max_depth,
                                rng=rng)
            tree.fit(X[rows], residual[rows])
            if self.task == "classification":
                # Newton step per leaf: sum(residual) / sum(p*(1-p))
                leaves = tree.apply(X[rows])
                p = _sigmoid(score[rows])
                hess = np.maximum(p * (1.0 - p), 1e-6)
                uniq = np.unique(leaves)
                gamma = np.zeros(uniq.size)
                for i, leaf in enumerate(uniq):
                    sel = leaves == leaf
                    gamma[i] = residual[rows][sel].sum() / hess[sel].sum()
                tree.set_leaf_values(uniq, np.clip(gamma, -10.0, 10.0))
            self.trees_.append(tree)
            score += self.learning_rate * tree.predict(X)
            self.train_losses_.append(self._loss(y, score))
        self.n_features_ = X.shape[1]
        return self

    def decision_function(self, X):
        X = np.asarray(X, dtype=np.float64)
        score = np.full(len(X), self.base_score_)
        for tree in self.trees_:
            score += self.learning_rate * tree.predict(X)
        return score

    def predict(self, X):
        score = self.decision_function(X)
        if self.task == "classification":
            return _sigmoid(score)
        return score

    def feature_importances(self) -> np.ndarray:
        total = np.zeros(self.n_features_)
        for tree in self.trees_:
            total += tree.importances_
        s = total.sum()
        return total / s if s > 0 else np.full(self.n_features_, 1.0 / self.n_features_)


class AdaBoost:
    """SAMME with depth-1 stumps; classification only.

    The prediction is the alpha-weighted vote fraction for the positive
    class, which lies in [0, 1] and acts as the include probability.
    """

    def __init__(self, n_stumps: int = 50, learning_rate: float = 1.0,
                 seed: int = 0):
        self.n_stumps = int(n_stumps)
        self.learning_rate = float(learning_rate)
        self.seed = int(seed)

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        _check_classification_target(y)
        n = len(y)
        w = np.full(n, 1.0 / n)
        self.stumps_ = []
        self.alphas_ = []
        for t in range(self.n_stumps):
            rng = _tree_rng(self.seed, t)
            stump = DecisionTree(criterion="gini", max_depth=1, rng=rng)
            stump.fit(X, y, sample_weight=w)
            pred = (stump.predict(X) >= 0.5).astype(float)
            err = float(w[pred != y].sum())
            if err <= 1e-12:
                self.stumps_.append(stump)
                self.alphas_.append(10.0)  # perfect stump dominates the vote
                break
            if err >= 0.5:
                break
            alpha = self.learning_rate * np.log((1.0 - err) / err)
            self.stumps_.append(stump)
            self.alphas_.append(float(alpha))
            w *= np.exp(alpha * (pred != y))
            w /= w.sum()
        if not self.stumps_:
            raise DegenerateLabels("no stump beats chance on this target")
        self.n_features_ = X.shape[1]
        return self

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        votes = np.zeros(len(X))
        total = sum(self.alphas_)
        for stump, alpha in zip(self.stumps_, self.alphas_):
            votes += alpha * (stump.predict(X) >= 0.5)
        return votes / total

    def feature_importances(self) -> np.ndarray:
        total = np.zeros(self.n_features_)
        for stump, alpha in zip(self.stumps_, self.alphas_):
            total += alpha * stump.importances_
        s = total.sum()
        return total / s if s > 0 else np.full(self.n_features_, 1.0 / self.n_features_)
