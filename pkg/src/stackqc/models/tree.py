"""CART decision tree with vectorized split search.

Shared core for the random forest, gradient boosting, AdaBoost stumps and
the extremely-randomized trees used during feature selection. Splits are
evaluated for all candidate features at once with cumulative sums, which
keeps fitting fast without compiled code.

Determinism: candidate features are visited in ascending index order and
ties between equal-scoring splits resolve to the lowest feature index, then
the lowest threshold.
"""

from __future__ import annotations

import numpy as np


def resolve_max_features(max_features, p: int) -> int:
    if max_features is None:
        return p
    if max_features == "sqrt":
        return max(1, int(np.sqrt(p)))
    if max_features == "third":
        return max(1, p // 3)
    return max(1, min(p, int(max_features)))


class DecisionTree:
    """Binary CART tree for regression (variance) or classification (gini).

    ``splitter='best'`` scans every threshold between consecutive distinct
    feature values; ``splitter='random'`` draws one uniform threshold per
    candidate feature (extremely-randomized mode).
    """

    def __init__(self, criterion: str = "variance", max_depth=None,
                 min_samples_split: int = 2, min_samples_leaf: int = 1,
                 max_features=None, splitter: str = "best", rng=None):
        if criterion not in ("variance", "gini"):
            raise ValueError(f"unknown criterion {criterion!r}")
        if splitter not in ("best", "random"):
            raise ValueError(f"unknown splitter {splitter!r}")
        self.criterion = criterion
        self.max_depth = np.inf if max_depth is None else int(max_depth)
        self.min_samples_split = int(min_samples_split)
        self.min_samples_leaf = int(min_samples_leaf)
        self.max_features = max_features
        self.splitter = splitter
        self.rng = rng if rng is not None else np.random.default_rng(0)

    # -- fitting ------------------------------------------------------------

    def fit(self, X, y, sample_weight=None):
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        w = np.ones(len(y)) if sample_weight is None else \
            np.asarray(sample_weight, dtype=np.float64)
        n, p = X.shape
        self.n_features_ = p
        self.importances_ = np.zeros(p)
        k = resolve_max_features(self.max_features, p)

        feature, threshold, left, right, value = [], [], [], [], []

        def new_node():
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            return len(feature) - 1

        def leaf_value(idx):
            wi = w[idx]
            tot = wi.sum()
            if tot <= 0:
                return float(y[idx].mean())
            return float(np.dot(wi, y[idx]) / tot)

        root = new_node()
        stack = [(np.arange(n), 0, root)]
        while stack:
            idx, depth, slot = stack.pop()
            value[slot] = leaf_value(idx)
            if depth >= self.max_depth or len(idx) < self.min_samples_split:
                continue
            parent_imp = self._node_impurity(y[idx], w[idx])
            if parent_imp <= 1e-12:
                continue

            if k < p:
                feats = np.sort(self.rng.permutation(p)[:k])
            else:
                feats = np.arange(p)
            found = self._find_split(X, y, w, idx, feats)
            if found is None:
                continue
            feat, thr, score = found
            go_left = X[idx, feat] <= thr
            if not go_left.any() or go_left.all():
                continue
            self.importances_[feat] += parent_imp - score

            feature[slot] = feat
            threshold[slot] = thr
            left_slot, right_slot = new_node(), new_node()
            left[slot], right[slot] = left_slot, right_slot
            stack.append((idx[~go_left], depth + 1, right_slot))
            stack.append((idx[go_left], depth + 1, left_slot))

        self.feature_ = np.array(feature, dtype=np.int64)
        self.threshold_ = np.array(threshold)
        self.left_ = np.array(left, dtype=np.int64)
        self.right_ = np.array(right, dtype=np.int64)
        self.value_ = np.array(value)
        return self

    def _node_impurity(self, y, w):
        """Weighted SSE (variance criterion) or weighted gini sum."""
        tot = w.sum()
        if tot <= 0:
            return 0.0
        if self.criterion == "variance":
            mean = np.dot(w, y) / tot
            return float(np.dot(w, (y - mean) ** 2))
        pos = np.dot(w, y)
        return float(tot - (pos * pos + (tot - pos) ** 2) / tot)

    def _find_split(self, X, y, w, idx, feats):
        if self.splitter == "best":
            return self._split_best(X, y, w, idx, feats)
        return self._split_random(X, y, w, idx, feats)

    def _split_best(self, X, y, w, idx, feats):
        n = len(idx)
        msl = self.min_samples_leaf
        sub = X[np.ix_(idx, feats)]
        order = np.argsort(sub, axis=0, kind="stable")
        ss = np.take_along_axis(sub, order, axis=0)
        ys = y[idx][order]
        ws = w[idx][order]

        cw_full = np.cumsum(ws, axis=0)
        cw, tot_w = cw_full[:-1], cw_full[-1]
        rw = tot_w - cw

        with np.errstate(divide="ignore", invalid="ignore"):
            if self.criterion == "variance":
                cwy = np.cumsum(ws * ys, axis=0)
                cwyy = np.cumsum(ws * ys * ys, axis=0)
                tot_y, tot_yy = cwy[-1], cwyy[-1]
                ly, lyy = cwy[:-1], cwyy[:-1]
                ry, ryy = tot_y - ly, tot_yy - lyy
                score = (lyy - ly * ly / cw) + (ryy - ry * ry / rw)
            else:
                cwp = np.cumsum(ws * ys, axis=0)
                tot_p = cwp[-1]
                lp = cwp[:-1]
                rp = tot_p - lp
                g_l = cw - (lp * lp + (cw - lp) ** 2) / cw
                g_r = rw - (rp * rp + (rw - rp) ** 2) / rw
                score = g_l + g_r

        counts = np.arange(1, n)
        valid = (ss[1:] > ss[:-1]) & (cw > 0) & (rw > 0)
        valid &= (counts >= msl)[:, None] & (counts <= n - msl)[:, None]
        score = np.where(valid & np.isfinite(score), score, np.inf)

        # feature-major argmin realizes the tie rule (feature, then threshold)
        flat = np.argmin(score.T)
        f_pos, t_pos = divmod(flat, n - 1)
        if not np.isfinite(score[t_pos, f_pos]):
            return None
        thr = 0.5 * (ss[t_pos, f_pos] + ss[t_pos + 1, f_pos])
        if thr >= ss[t_pos + 1, f_pos]:  # midpoint rounded up to the next value
            thr = ss[t_pos, f_pos]
        return int(feats[f_pos]), float(thr), float(score[t_pos, f_pos])

    def _split_random(self, X, y, w, idx, feats):
        msl = self.min_samples_leaf
        sub = X[np.ix_(idx, feats)]
        lo, hi = sub.min(axis=0), sub.max(axis=0)
        thr = self.rng.uniform(lo, hi)
        L = sub <= thr
        wi = w[idx]
        lw = wi @ L
        tot_w = wi.sum()
        rw = tot_w - lw
        ln = L.sum(axis=0)
        n = len(idx)

        with np.errstate(divide="ignore", invalid="ignore"):
            if self.criterion == "variance":
                yw = wi * y[idx]
                lwy = yw @ L
                lwyy = (yw * y[idx]) @ L
                tot_y, tot_yy = yw.sum(), (yw * y[idx]).sum()
                ry, ryy = tot_y - lwy, tot_yy - lwyy
                score = (lwyy - lwy * lwy / lw) + (ryy - ry * ry / rw)
            else:
                pw = wi * y[idx]
                lp = pw @ L
                tot_p = pw.sum()
                rp = tot_p - lp
                g_l = lw - (lp * lp + (lw - lp) ** 2) / lw
                g_r = rw - (rp * rp + (rw - rp) ** 2) / rw
                score = g_l + g_r

        valid = (hi > lo) & (ln >= msl) & (n - ln >= msl) & (lw > 0) & (rw > 0)
        score = np.where(valid & np.isfinite(score), score, np.inf)
        f_pos = int(np.argmin(score))
        if not np.isfinite(score[f_pos]):
            return None
        return int(feats[f_pos]), float(thr[f_pos]), float(score[f_pos])

    # -- inference ----------------------------------------------------------

    def apply(self, X) -> np.ndarray:
        """Leaf node index for every row."""
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            feat = self.feature_[node]
            active = feat >= 0
            if not active.any():
                return node
            rows = np.nonzero(active)[0]
            f = feat[rows]
            go_left = X[rows, f] <= self.threshold_[node[rows]]
            node[rows] = np.where(go_left, self.left_[node[rows]],
                                  self.right_[node[rows]])

    def predict(self, X) -> np.ndarray:
        return self.value_[self.apply(X)]

    def set_leaf_values(self, leaf_ids: np.ndarray, values: np.ndarray):
        """Overwrite leaf predictions (gradient boosting Newton steps)."""
        self.value_[leaf_ids] = values

    @property
    def n_nodes(self) -> int:
        return len(self.feature_)
