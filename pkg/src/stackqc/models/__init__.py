"""Model families behind a uniform fit/predict interface.

Regression: linear, gradient_boosting, random_forest.
Classification: logistic, random_forest, gradient_boosting, adaboost.
``constant`` is a baseline predictor available for both tasks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import Unsupported
from .ensembles import AdaBoost, ExtraTrees, GradientBoosting, RandomForest  # noqa: F401
from .linear import ConstantModel, LinearRegression, LogisticRegression
from .tree import DecisionTree  # noqa: F401

REGRESSION_FAMILIES = ("linear", "gradient_boosting", "random_forest", "constant")
CLASSIFICATION_FAMILIES = ("logistic", "random_forest", "gradient_boosting",
                           "adaboost", "constant")


@dataclass
class ModelSpec:
    task: str
    family: str
    hyperparameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.task not in ("regression", "classification"):
            raise Unsupported(f"unknown task {self.task!r}")
        allowed = REGRESSION_FAMILIES if self.task == "regression" \
            else CLASSIFICATION_FAMILIES
        if self.family not in allowed:
            raise Unsupported(f"family {self.family!r} is not valid for {self.task}")

    def describe(self) -> str:
        hp = ",".join(f"{k}={v}" for k, v in sorted(self.hyperparameters.items()))
        return f"{self.family}({hp})" if hp else self.family

    def to_dict(self) -> dict:
        return {"task": self.task, "family": self.family,
                "hyperparameters": dict(self.hyperparameters)}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(d["task"], d["family"], dict(d.get("hyperparameters", {})))


def build_model(spec: ModelSpec):
    hp = dict(spec.hyperparameters)
    seed = int(hp.pop("seed", 0))
    family = spec.family
    if family == "constant":
        return ConstantModel(value=float(hp.pop("value", 0.0)))
    if family == "linear":
        return LinearRegression(l2=float(hp.pop("l2", 0.0)))
    if family == "logistic":
        return LogisticRegression(l2=float(hp.pop("l2", 1.0)))
    if family == "random_forest":
        return RandomForest(
            task=spec.task,
            n_trees=int(hp.pop("n_trees", 100)),
            max_depth=hp.pop("max_depth", None),
            max_features=hp.pop("max_features", "auto"),
            min_samples_leaf=int(hp.pop("min_samples_leaf", 1)),
            seed=seed,
            oob=bool(hp.pop("oob", False)),
        )
    if family == "gradient_boosting":
        return GradientBoosting(
            task=spec.task,
            n_rounds=int(hp.pop("n_trees", hp.pop("n_rounds", 100))),
            max_depth=int(hp.pop("max_depth", 3) or 3),
            learning_rate=float(hp.pop("learning_rate", 0.1)),
            subsample=float(hp.pop("subsample", 1.0)),
            seed=seed,
        )
    if family == "adaboost":
        return AdaBoost(
            n_stumps=int(hp.pop("n_trees", 50)),
            learning_rate=float(hp.pop("learning_rate", 1.0)),
            seed=seed,
        )
    raise Unsupported(f"unknown family {family!r}")


def predict_scores(model, X) -> np.ndarray:
    """Raw scores: real value (regression) or include probability."""
    return np.asarray(model.predict(X), dtype=np.float64)


def predict_labels(scores: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    return (np.asarray(scores) >= threshold).astype(int)


def feature_importance(model) -> np.ndarray:
    """Normalized importances summing to 1 (tree impurity decrease or
    standardized |coefficient|)."""
    if hasattr(model, "feature_importances"):
        return model.feature_importances()
    raise Unsupported(f"{type(model).__name__} does not expose importances")
