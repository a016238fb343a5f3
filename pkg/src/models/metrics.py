"""
Evaluation metrics: confusion matrix, one-vs-rest ROC/AUC and fit timing.
"""
import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Tuple, Union

import numpy as np
import pandas as pd
from sklearn.metrics import auc, confusion_matrix as sk_confusion_matrix, roc_curve

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Counts with rows = true class and columns = predicted class."""
    counts: np.ndarray

    @property
    def class_count(self) -> int:
        return int(self.counts.shape[0])

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def accuracy(self) -> float:
        return float(np.trace(self.counts) / self.total) if self.total else 0.0

    def to_frame(self) -> pd.DataFrame:
        labels = range(self.class_count)
        return pd.DataFrame(
            self.counts,
            index=pd.Index([f"true_{c}" for c in labels], name="class"),
            columns=[f"pred_{c}" for c in labels],
        )


@dataclass(frozen=True, eq=False)
class RocCurve:
    """One-vs-rest ROC of a single class."""
    class_id: int
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"threshold": self.thresholds, "fpr": self.fpr, "tpr": self.tpr})


def _labels(values, name: str) -> np.ndarray:
    values = np.asarray(values).reshape(-1)
    if values.size and not np.all(np.equal(np.mod(values, 1), 0)):
        raise ValueError(f"{name} must be integer class ids")
    return values.astype(np.int64)


def confusion(true_labels, predicted_labels, class_count: int) -> ConfusionMatrix:
    """Tally (true, predicted) pairs into a C x C matrix."""
    true_labels = _labels(true_labels, "true labels")
    predicted_labels = _labels(predicted_labels, "predicted labels")
    if true_labels.size != predicted_labels.size:
        raise ValueError("true and predicted labels must have equal length")
    for name, values in (("true", true_labels), ("predicted", predicted_labels)):
        if values.size and (values.min() < 0 or values.max() >= class_count):
            raise ValueError(f"{name} label out of range for {class_count} classes")
    counts = sk_confusion_matrix(true_labels, predicted_labels, labels=np.arange(class_count))
    return ConfusionMatrix(counts=counts.astype(np.int64))


def accuracy(cm: ConfusionMatrix) -> float:
    return cm.accuracy()


def roc_auc(true_labels, probabilities) -> List[RocCurve]:
    """
    One-vs-rest ROC per class from a probability matrix.

    Tied scores share one threshold. A class with no positive or no negative
    records has no defined curve; its AUC is NaN.

    Args:
        true_labels: Class ids [n]
        probabilities: Matrix [n x C]

    Returns:
        One RocCurve per class
    """
    true_labels = _labels(true_labels, "true labels")
    probabilities = np.asarray(probabilities, dtype=np.float64)
    if probabilities.ndim != 2 or probabilities.shape[0] != true_labels.size:
        raise ValueError(
            f"probability matrix of shape {probabilities.shape} does not match {true_labels.size} labels"
        )
    class_count = probabilities.shape[1]
    if true_labels.size and (true_labels.min() < 0 or true_labels.max() >= class_count):
        raise ValueError(f"label out of range for {class_count} classes")

    curves = []
    for c in range(class_count):
        positive = true_labels == c
        if positive.all() or not positive.any():
            logger.warning(f"Class {c} has no {'negatives' if positive.all() else 'positives'}; AUC undefined")
            curves.append(RocCurve(c, np.array([0.0, 1.0]), np.array([0.0, 1.0]),
                                   np.array([np.inf, -np.inf]), float("nan")))
            continue
        fpr, tpr, thresholds = roc_curve(positive, probabilities[:, c], drop_intermediate=False)
        if fpr[-1] != 1.0 or tpr[-1] != 1.0:
            fpr, tpr = np.append(fpr, 1.0), np.append(tpr, 1.0)
            thresholds = np.append(thresholds, -np.inf)
        curves.append(RocCurve(c, fpr, tpr, thresholds, float(auc(fpr, tpr))))
    return curves


def macro_auc(curves: List[RocCurve]) -> float:
    """Mean AUC over classes with a defined curve."""
    values = np.array([curve.auc for curve in curves], dtype=np.float64)
    if not np.any(np.isfinite(values)):
        return float("nan")
    return float(np.nanmean(values))


def timed(op: Callable, *args, **kwargs) -> Tuple[Any, float]:
    """Run ``op`` and return (result, wall-clock seconds) from a monotonic clock."""
    start = time.perf_counter()
    result = op(*args, **kwargs)
    return result, time.perf_counter() - start


def write_reports(out_dir: Union[str, Path], cm: ConfusionMatrix, curves: List[RocCurve],
                  fit_seconds: float, extra: Dict[str, Any] = None) -> Dict[str, Path]:
    """
    Write confusion_matrix.csv, roc_class_<c>.csv and summary.json.

    Returns:
        Mapping of report name to written path
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}

    written["confusion_matrix"] = out_dir / "confusion_matrix.csv"
    cm.to_frame().to_csv(written["confusion_matrix"])
    for curve in curves:
        path = out_dir / f"roc_class_{curve.class_id}.csv"
        curve.to_frame().to_csv(path, index=False, float_format="%.17g")
        written[f"roc_class_{curve.class_id}"] = path

    mean_auc = macro_auc(curves)
    summary = {
        "accuracy": cm.accuracy(),
        "macro_auc": None if np.isnan(mean_auc) else mean_auc,
        "fit_seconds": float(fit_seconds),
        "class_auc": {str(c.class_id): (None if np.isnan(c.auc) else c.auc) for c in curves},
        "records": cm.total,
    }
    summary.update(extra or {})
    written["summary"] = out_dir / "summary.json"
    written["summary"].write_text(json.dumps(summary, indent=2), encoding="utf-8")
    logger.info(f"Wrote evaluation reports to {out_dir} (accuracy {summary['accuracy']:.4f})")
    return written
