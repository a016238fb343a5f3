"""
One-dimensional ternary patterns (1D-TP).

Every center point is compared against its k left and k right neighbors with a
dead zone of half-width beta. The +1 and -1 comparisons form two binary
patterns, each read as a decimal with weight 2**j for neighbor j, where the
neighbors are ordered [left_k .. left_1, right_1 .. right_k]. The first and
last k points are never centers.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Tuple, Union

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view
from pydantic import BaseModel, ConfigDict, Field, field_validator

logger = logging.getLogger(__name__)


class TernaryConfig(BaseModel):
    """Neighbors per side and the dead-zone half-width."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    k: int = Field(default=4, ge=1, le=8)
    beta: float = Field(default=0.0, ge=0.0)

    @field_validator("beta")
    @classmethod
    def _finite_beta(cls, value: float) -> float:
        if not np.isfinite(value):
            raise ValueError("beta must be finite")
        return value

    @property
    def bins(self) -> int:
        return 1 << (2 * self.k)


@dataclass(frozen=True, eq=False)
class TernaryFeatureVector:
    hist_pos: np.ndarray
    hist_neg: np.ndarray
    total_centers: int

    def as_vector(self) -> np.ndarray:
        """hist_pos followed by hist_neg, normalized by the number of centers."""
        return np.concatenate([self.hist_pos, self.hist_neg]) / float(self.total_centers)


def code_point(center: float, neighbor: float, beta: float) -> int:
    """Ternary code of one (center, neighbor) comparison."""
    if beta < 0:
        raise ValueError(f"beta must be non-negative, got {beta}")
    if center > neighbor + beta:
        return 1
    if center < neighbor - beta:
        return -1
    return 0


def _neighbor_codes(sequence, config: TernaryConfig) -> np.ndarray:
    """Code matrix of shape (centers, 2k), columns in neighbor order."""
    values = np.asarray(sequence, dtype=np.float64).reshape(-1)
    k = config.k
    if values.size < 2 * k + 1:
        raise ValueError(
            f"sequence of length {values.size} is too short for k={k} "
            f"(needs at least {2 * k + 1})"
        )
    windows = sliding_window_view(values, 2 * k + 1)
    centers = windows[:, k:k + 1]
    neighbors = np.concatenate([windows[:, :k], windows[:, k + 1:]], axis=1)
    codes = np.zeros(neighbors.shape, dtype=np.int8)
    codes[centers > neighbors + config.beta] = 1
    codes[centers < neighbors - config.beta] = -1
    return codes


def encode(sequence, config: TernaryConfig) -> Tuple[np.ndarray, np.ndarray]:
    """
    Encode ``sequence`` into positive and negative pattern decimals.

    Args:
        sequence: Real-valued samples, at least 2k+1 long
        config: TernaryConfig

    Returns:
        (codes_pos, codes_neg), each of length n - 2k
    """
    codes = _neighbor_codes(sequence, config)
    weights = np.left_shift(1, np.arange(codes.shape[1], dtype=np.int64))
    codes_pos = (codes == 1).astype(np.int64) @ weights
    codes_neg = (codes == -1).astype(np.int64) @ weights
    return codes_pos, codes_neg


def featurize(sequence, config: TernaryConfig) -> TernaryFeatureVector:
    """Histograms of both code streams over [0, 2**(2k) - 1]."""
    codes_pos, codes_neg = encode(sequence, config)
    return TernaryFeatureVector(
        hist_pos=np.bincount(codes_pos, minlength=config.bins),
        hist_neg=np.bincount(codes_neg, minlength=config.bins),
        total_centers=int(codes_pos.size),
    )


def feature_columns(k: int) -> list:
    bins = 1 << (2 * k)
    return [f"pos_{i}" for i in range(bins)] + [f"neg_{i}" for i in range(bins)]


def export_feature_csv(matrix: np.ndarray, labels: Sequence[int],
                       path: Union[str, Path], k: int) -> Path:
    """
    Write one row per record: normalized pos/neg histograms then the label.

    Args:
        matrix: Feature matrix [n x 2 * 2**(2k)]
        labels: Class id per row
        path: Destination CSV
        k: Neighbors per side, fixes the column names

    Returns:
        The written path
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    columns = feature_columns(k)
    if matrix.ndim != 2 or matrix.shape[1] != len(columns):
        raise ValueError(f"expected {len(columns)} feature columns for k={k}, got shape {matrix.shape}")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size != matrix.shape[0]:
        raise ValueError("one label per feature row is required")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(matrix, columns=columns)
    frame["label"] = labels
    frame.to_csv(path, index=False, float_format="%.17g")
    logger.info(f"Wrote {len(frame)} feature rows to {path}")
    return path


def load_feature_csv(path: Union[str, Path]) -> Tuple[np.ndarray, np.ndarray]:
    """Read a feature CSV back into (matrix, labels)."""
    frame = pd.read_csv(path, float_precision="round_trip")
    if "label" not in frame.columns:
        raise ValueError(f"{path} has no label column")
    labels = frame.pop("label").to_numpy(dtype=np.int64)
    return frame.to_numpy(dtype=np.float64), labels
