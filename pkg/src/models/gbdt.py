"""
Second-order gradient-boosted decision trees for multi-class classification.

One regression tree per class per boosting round is fitted to the gradients
and Hessians of the softmax cross-entropy. Splits are found by exact greedy
search over presorted feature columns and scored with the regularized gain
``0.5 * (GL^2/(HL+lambda) + GR^2/(HR+lambda) - G^2/(H+lambda)) - gamma``.
"""
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.special import logsumexp, softmax

from src.core.errors import DataError, ModelFormatError

logger = logging.getLogger(__name__)

MODEL_FORMAT = "faultkit-gbdt"
MODEL_FORMAT_VERSION = 1

_MIN_HESSIAN = 1e-16


class BoosterParams(BaseModel):
    """Classifier hyperparameters and their admissible ranges."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    n_estimators: int = Field(default=100, ge=1, le=1000)
    # union of the documented classifier range [0.001, 0.9] and the tuning range [0.01, 1]
    learning_rate: float = Field(default=0.1, ge=0.001, le=1.0)
    max_depth: int = Field(default=6, ge=1, le=15)
    min_child_weight: float = Field(default=1.0, ge=1.0, le=100.0)
    colsample_bytree: float = Field(default=1.0, gt=0.0, le=1.0)
    reg_lambda: float = Field(default=1.0, ge=0.0)
    reg_gamma: float = Field(default=0.0, ge=0.0)
    seed: int = 0


@dataclass(frozen=True, eq=False)
class RegressionTree:
    """
    Array-encoded binary tree.

    Node 0 is the root. ``feature[i] == -1`` marks a leaf whose output is
    ``value[i]``; internal nodes send a row left when ``x[feature] < threshold``.
    """
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def node_count(self) -> int:
        return int(self.feature.size)

    def depth(self) -> int:
        depths = np.zeros(self.node_count, dtype=np.int64)
        for node in range(self.node_count):
            if self.feature[node] >= 0:
                depths[self.left[node]] = depths[node] + 1
                depths[self.right[node]] = depths[node] + 1
        return int(depths.max())

    def apply(self, features: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row."""
        node = np.zeros(features.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.feature[node] >= 0)
        while active.size:
            current = node[active]
            go_left = features[active, self.feature[current]] < self.threshold[current]
            node[active] = np.where(go_left, self.left[current], self.right[current])
            active = active[self.feature[node[active]] >= 0]
        return node

    def predict(self, features: np.ndarray) -> np.ndarray:
        return self.value[self.apply(features)]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RegressionTree":
        return cls(
            feature=np.asarray(data["feature"], dtype=np.int64),
            threshold=np.asarray(data["threshold"], dtype=np.float64),
            left=np.asarray(data["left"], dtype=np.int64),
            right=np.asarray(data["right"], dtype=np.int64),
            value=np.asarray(data["value"], dtype=np.float64),
        )


@dataclass(frozen=True, eq=False)
class BoostedModel:
    """Trained ensemble; ``trees[c][r]`` is the tree of class c in round r."""
    trees: Tuple[Tuple[RegressionTree, ...], ...]
    class_count: int
    n_features: int
    params: BoosterParams
    loss_history: Tuple[float, ...] = field(default_factory=tuple)

    def _check_features(self, features) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[1] != self.n_features:
            raise ValueError(
                f"expected a feature matrix with {self.n_features} columns, "
                f"got shape {features.shape}"
            )
        return features

    def decision_function(self, features) -> np.ndarray:
        """Per-class margin sums [n x C]."""
        features = self._check_features(features)
        margins = np.zeros((features.shape[0], self.class_count))
        for c, class_trees in enumerate(self.trees):
            for tree in class_trees:
                margins[:, c] += tree.predict(features)
        return margins

    def predict_proba(self, features) -> np.ndarray:
        return softmax(self.decision_function(features), axis=1)

    def predict(self, features) -> np.ndarray:
        return np.argmax(self.decision_function(features), axis=1)


def softmax_cross_entropy(margins: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Per-row softmax cross-entropy."""
    rows = np.arange(margins.shape[0])
    return logsumexp(margins, axis=1) - margins[rows, labels]


def softmax_derivatives(margins: np.ndarray, labels: np.ndarray,
                        class_count: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Exact gradient and Hessian diagonal of the softmax cross-entropy.

    Returns:
        (probabilities, g = p - y, h = p * (1 - p)), each [n x C]
    """
    probabilities = softmax(margins, axis=1)
    onehot = np.eye(class_count)[labels]
    return probabilities, probabilities - onehot, probabilities * (1.0 - probabilities)


def _validate_training_data(features, labels, class_count: Optional[int]):
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if features.ndim != 2:
        raise ValueError(f"features must be a 2-D matrix, got shape {features.shape}")
    if features.shape[0] != labels.size:
        raise ValueError("features and labels must have the same number of rows")
    if features.shape[0] < 2:
        raise ValueError("training needs at least two records")
    if not np.all(np.isfinite(features)):
        raise DataError("features contain non-finite values")
    if not np.issubdtype(labels.dtype, np.integer):
        if not np.all(np.equal(np.mod(labels, 1), 0)):
            raise ValueError("labels must be integers")
    labels = labels.astype(np.int64)
    if labels.min() < 0:
        raise ValueError("labels must be non-negative")
    class_count = int(labels.max()) + 1 if class_count is None else int(class_count)
    if labels.max() >= class_count:
        raise ValueError(f"label {labels.max()} is out of range for {class_count} classes")
    if np.unique(labels).size < 2:
        raise ValueError("training needs at least two distinct classes")
    return features, labels, class_count


class _TreeBuilder:
    """Exact greedy growth of one tree over presorted row orders."""

    def __init__(self, features: np.ndarray, order: np.ndarray, params: BoosterParams):
        self.features = features
        self.order = order
        self.params = params
        self.nodes: List[list] = []

    def build(self, columns: np.ndarray, grad: np.ndarray, hess: np.ndarray) -> Tuple[RegressionTree, np.ndarray]:
        self.grad, self.hess = grad, hess
        self.columns = columns
        self.nodes = []
        self.leaf_of_row = np.zeros(self.features.shape[0], dtype=np.int64)
        root_order = self.order[columns] if columns.size else np.arange(0)
        rows = np.arange(self.features.shape[0])
        self._grow(rows, root_order, depth=0)

        feature, threshold, left, right, value = (np.asarray(column) for column in zip(*self.nodes))
        tree = RegressionTree(
            feature=feature.astype(np.int64),
            threshold=threshold.astype(np.float64),
            left=left.astype(np.int64),
            right=right.astype(np.int64),
            value=value.astype(np.float64),
        )
        return tree, tree.value[self.leaf_of_row]

    def _grow(self, rows: np.ndarray, order: np.ndarray, depth: int) -> int:
        node = len(self.nodes)
        self.nodes.append([-1, 0.0, -1, -1, 0.0])
        grad_sum = float(self.grad[rows].sum())
        hess_sum = float(self.hess[rows].sum())

        split = None
        if depth < self.params.max_depth and rows.size >= 2 and order.size:
            split = self._best_split(order, grad_sum, hess_sum)
        if split is None:
            weight = -grad_sum / (hess_sum + self.params.reg_lambda)
            self.nodes[node][4] = weight * self.params.learning_rate
            self.leaf_of_row[rows] = node
            return node

        column_position, position, threshold = split
        go_left = np.zeros(self.features.shape[0], dtype=bool)
        go_left[order[column_position, :position + 1]] = True
        width = order.shape[1]
        left_order = order[go_left[order]].reshape(order.shape[0], position + 1)
        right_order = order[~go_left[order]].reshape(order.shape[0], width - position - 1)

        left = self._grow(left_order[0], left_order, depth + 1)
        right = self._grow(right_order[0], right_order, depth + 1)
        self.nodes[node][:4] = [int(self.columns[column_position]), threshold, left, right]
        return node

    def _best_split(self, order: np.ndarray, grad_sum: float, hess_sum: float):
        params = self.params
        values = self.features[order, self.columns[:, None]]
        grad_left = np.cumsum(self.grad[order], axis=1)[:, :-1]
        hess_left = np.cumsum(self.hess[order], axis=1)[:, :-1]
        grad_right = grad_sum - grad_left
        hess_right = hess_sum - hess_left

        gain = 0.5 * (
            grad_left ** 2 / (hess_left + params.reg_lambda)
            + grad_right ** 2 / (hess_right + params.reg_lambda)
            - grad_sum ** 2 / (hess_sum + params.reg_lambda)
        ) - params.reg_gamma
        valid = (
            (values[:, :-1] < values[:, 1:])
            & (hess_left >= params.min_child_weight)
            & (hess_right >= params.min_child_weight)
        )
        if not valid.any():
            return None
        gain = np.where(valid, gain, -np.inf)
        # row-major argmax: lowest column index first, then lowest threshold
        flat = int(np.argmax(gain))
        column_position, position = divmod(flat, gain.shape[1])
        if not gain[column_position, position] > 0:
            return None

        below, above = values[column_position, position], values[column_position, position + 1]
        threshold = 0.5 * (below + above)
        if not below < threshold:
            threshold = above
        return column_position, position, float(threshold)


def train(features, labels, params: Optional[BoosterParams] = None,
          class_count: Optional[int] = None) -> BoostedModel:
    """
    Fit a boosted ensemble.

    Args:
        features: Feature matrix [n x d]
        labels: Class ids in [0, C-1]
        params: BoosterParams (defaults when omitted)
        class_count: Number of classes C (default: max label + 1)

    Returns:
        BoostedModel with one tree per class per round
    """
    params = params or BoosterParams()
    features, labels, class_count = _validate_training_data(features, labels, class_count)
    n, d = features.shape
    rng = np.random.default_rng(params.seed)

    order = np.argsort(features, axis=0, kind="stable").T
    constant = np.ptp(features, axis=0) == 0
    sample_size = max(1, math.ceil(params.colsample_bytree * d))
    builder = _TreeBuilder(features, order, params)

    margins = np.zeros((n, class_count))
    trees: List[List[RegressionTree]] = [[] for _ in range(class_count)]
    loss_history = [float(softmax_cross_entropy(margins, labels).mean())]
    logger.info(
        f"Training {params.n_estimators} rounds x {class_count} classes on "
        f"{n} records with {d} features"
    )

    for round_index in range(params.n_estimators):
        _, grad, hess = softmax_derivatives(margins, labels, class_count)
        hess = np.maximum(hess, _MIN_HESSIAN)
        for c in range(class_count):
            columns = np.sort(rng.choice(d, size=sample_size, replace=False))
            columns = columns[~constant[columns]]
            tree, fitted = builder.build(columns, grad[:, c], hess[:, c])
            trees[c].append(tree)
            margins[:, c] += fitted
        loss_history.append(float(softmax_cross_entropy(margins, labels).mean()))
        logger.debug(f"Round {round_index + 1}: training loss {loss_history[-1]:.6f}")

    logger.info(f"Training finished with loss {loss_history[-1]:.6f}")
    return BoostedModel(
        trees=tuple(tuple(class_trees) for class_trees in trees),
        class_count=class_count,
        n_features=d,
        params=params,
        loss_history=tuple(loss_history),
    )


def predict_proba(model: BoostedModel, features) -> np.ndarray:
    """Softmax probabilities [n x C]; rows sum to 1."""
    return model.predict_proba(features)


def gradient_check(params: BoosterParams, features, labels,
                   class_count: Optional[int] = None) -> float:
    """
    Compare analytic softmax derivatives with central finite differences.

    The check runs at the margins of a model trained with ``params``.

    Returns:
        Maximum relative error over g and the Hessian diagonal
    """
    model = train(features, labels, params, class_count)
    labels = np.asarray(labels, dtype=np.int64)
    margins = model.decision_function(features)
    _, grad, hess = softmax_derivatives(margins, labels, model.class_count)

    def loss(shifted: np.ndarray) -> np.ndarray:
        return softmax_cross_entropy(shifted, labels)

    worst = 0.0
    base = loss(margins)
    for c in range(model.class_count):
        for eps, analytic, order in ((1e-5, grad, 1), (1e-3, hess, 2)):
            up, down = margins.copy(), margins.copy()
            up[:, c] += eps
            down[:, c] -= eps
            if order == 1:
                numeric = (loss(up) - loss(down)) / (2.0 * eps)
            else:
                numeric = (loss(up) - 2.0 * base + loss(down)) / eps ** 2
            scale = np.maximum(np.maximum(np.abs(numeric), np.abs(analytic[:, c])), 1e-3)
            worst = max(worst, float(np.max(np.abs(numeric - analytic[:, c]) / scale)))
    return worst


def save_model(model: BoostedModel, path: Union[str, Path]) -> Path:
    """Write the versioned JSON model document."""
    document = {
        "format": MODEL_FORMAT,
        "format_version": MODEL_FORMAT_VERSION,
        "class_count": model.class_count,
        "n_features": model.n_features,
        "params": model.params.model_dump(),
        "loss_history": list(model.loss_history),
        "trees": [[tree.to_dict() for tree in class_trees] for class_trees in model.trees],
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(document, indent=2), encoding="utf-8")
    logger.info(f"Saved model to {path}")
    return path


def load_model(path: Union[str, Path]) -> BoostedModel:
    """Read a model document written by :func:`save_model`."""
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path} is not valid JSON: {exc}") from exc

    if document.get("format") != MODEL_FORMAT:
        raise ModelFormatError(f"{path} is not a {MODEL_FORMAT} document")
    version = document.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ModelFormatError(f"Unsupported model format version: {version}")

    try:
        return BoostedModel(
            trees=tuple(
                tuple(RegressionTree.from_dict(tree) for tree in class_trees)
                for class_trees in document["trees"]
            ),
            class_count=int(document["class_count"]),
            n_features=int(document["n_features"]),
            params=BoosterParams(**document["params"]),
            loss_history=tuple(float(v) for v in document.get("loss_history", [])),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"Malformed model document {path}: {exc}") from exc
