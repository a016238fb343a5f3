"""
Feature extraction pipelines feeding the classifier.

- shapelet transform followed by 1D-TP histograms (the main pipeline)
- 1D-TP histograms of the raw record
- time-domain statistics (baseline)
"""
import logging
from typing import List, Optional, Sequence

import numpy as np
from scipy import stats

from src.data.shapelet import ShapeletSet, transform_many
from src.data.signal import VibrationRecord
from src.data.ternary import TernaryConfig, featurize

logger = logging.getLogger(__name__)

TIME_DOMAIN_FEATURES = [
    "mean", "std", "rms", "peak", "peak_to_peak", "crest_factor",
    "impulse_factor", "shape_factor", "clearance_factor", "skewness", "kurtosis",
]


def extract_features(records: Sequence[VibrationRecord], shapelets: ShapeletSet, k: int = 4) -> np.ndarray:
    """
    Shapelet-transform every record and encode it with 1D-TP.

    Args:
        records: Records to featurize
        shapelets: Discovered shapelets; their beta is the ternary threshold
        k: Neighbors per side

    Returns:
        Matrix [n x 2 * 2**(2k)] of normalized pos/neg histograms
    """
    config = TernaryConfig(k=k, beta=shapelets.beta)
    rows = [featurize(series, config).as_vector() for series in transform_many(records, shapelets)]
    logger.info(f"Extracted shapelet 1D-TP features for {len(rows)} records (k={k}, beta={shapelets.beta:.4f})")
    return np.vstack(rows) if rows else np.zeros((0, 2 * config.bins))


def extract_raw_ternary_features(records: Sequence[VibrationRecord], k: int = 4,
                                 beta: Optional[float] = None) -> np.ndarray:
    """1D-TP histograms of whole records; beta defaults to each record's sample std."""
    rows = []
    for record in records:
        threshold = float(np.std(record.samples, ddof=1)) if beta is None else beta
        rows.append(featurize(record.samples, TernaryConfig(k=k, beta=threshold)).as_vector())
    return np.vstack(rows) if rows else np.zeros((0, 2 * (1 << (2 * k))))


def _time_domain_row(samples: np.ndarray) -> List[float]:
    absolute = np.abs(samples)
    rms = np.sqrt(np.mean(samples ** 2))
    peak = absolute.max()
    mean_abs = absolute.mean()
    sqrt_mean = np.mean(np.sqrt(absolute)) ** 2

    def ratio(numerator, denominator):
        return float(numerator / denominator) if denominator > 0 else 0.0

    return [
        float(samples.mean()),
        float(samples.std(ddof=1)) if samples.size > 1 else 0.0,
        float(rms),
        float(peak),
        float(np.ptp(samples)),
        ratio(peak, rms),
        ratio(peak, mean_abs),
        ratio(rms, mean_abs),
        ratio(peak, sqrt_mean),
        float(np.nan_to_num(stats.skew(samples))),
        float(np.nan_to_num(stats.kurtosis(samples))),
    ]


def time_domain_features(records: Sequence[VibrationRecord]) -> np.ndarray:
    """Matrix [n x 11] of the statistics named in ``TIME_DOMAIN_FEATURES``."""
    rows = [_time_domain_row(record.samples) for record in records]
    return np.array(rows, dtype=np.float64).reshape(len(rows), len(TIME_DOMAIN_FEATURES))
