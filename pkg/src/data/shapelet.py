"""
Shapelet discovery and the shapelet transform.

Candidates are windows of the training records, scored by the information
gain of the best distance threshold under a one-vs-rest labelling of their
source class. The selected set also fixes the ternary threshold beta as the
sample standard deviation of all selected shapelet values.
"""
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import entr

from src.core.config import settings
from src.core.errors import ModelFormatError, ShapeletDiscoveryError
from src.data.signal import Dataset, VibrationRecord

logger = logging.getLogger(__name__)

SeriesLike = Union[VibrationRecord, Sequence[float], np.ndarray]

# Upper bound on the entries of one (windows x candidates) distance block
_SCORING_BLOCK = 4_000_000
# Candidates of one length scored together
_CHUNK_ROWS = 64
# Longest shapelet considered when no max_len is given
DEFAULT_MAX_LEN = 64


def _as_series(obj) -> np.ndarray:
    if isinstance(obj, VibrationRecord):
        return obj.samples
    if isinstance(obj, Shapelet):
        return obj.values
    return np.asarray(obj, dtype=np.float64).reshape(-1)


@dataclass(frozen=True, eq=False)
class Shapelet:
    """A selected subsequence with its information-gain score."""
    values: np.ndarray
    source_record: int
    start: int
    ig: float
    label: int = -1

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        if values.size == 0 or not np.all(np.isfinite(values)):
            raise ValueError("shapelet values must be non-empty and finite")
        if self.ig < 0:
            raise ValueError(f"information gain must be non-negative, got {self.ig}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def length(self) -> int:
        return int(self.values.size)

    def to_dict(self) -> dict:
        return {
            "values": self.values.tolist(),
            "source_record": int(self.source_record),
            "start": int(self.start),
            "ig": float(self.ig),
            "label": int(self.label),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Shapelet":
        return cls(
            values=np.asarray(data["values"], dtype=np.float64),
            source_record=int(data["source_record"]),
            start=int(data["start"]),
            ig=float(data["ig"]),
            label=int(data.get("label", -1)),
        )


@dataclass
class ShapeletSet:
    """Shapelets sorted by information gain (descending) plus the ternary threshold."""
    shapelets: List[Shapelet]
    beta: float = 0.0

    def __post_init__(self):
        gains = [shapelet.ig for shapelet in self.shapelets]
        if any(later > earlier for earlier, later in zip(gains, gains[1:])):
            raise ValueError("shapelets must be sorted by information gain, descending")

    def __len__(self) -> int:
        return len(self.shapelets)

    @property
    def max_length(self) -> int:
        return max((shapelet.length for shapelet in self.shapelets), default=0)

    @property
    def total_length(self) -> int:
        return sum(shapelet.length for shapelet in self.shapelets)

    def to_json(self) -> str:
        return json.dumps(
            {"beta": float(self.beta), "shapelets": [s.to_dict() for s in self.shapelets]},
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "ShapeletSet":
        try:
            data = json.loads(text)
            shapelets = [Shapelet.from_dict(item) for item in data["shapelets"]]
            return cls(shapelets=shapelets, beta=float(data["beta"]))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ModelFormatError(f"Invalid shapelet document: {exc}") from exc

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json(), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ShapeletSet":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


@dataclass
class DistanceProfile:
    """Minimal subsequence distances of one candidate to every record, sorted ascending."""
    distances: np.ndarray
    labels: np.ndarray = field(default_factory=lambda: np.arange(0))

    def __post_init__(self):
        distances = np.asarray(self.distances, dtype=np.float64).reshape(-1)
        labels = np.asarray(self.labels).reshape(-1)
        if distances.size != labels.size:
            raise ValueError("distances and labels must have equal length")
        if np.any(distances < 0):
            raise ValueError("distances must be non-negative")
        order = np.argsort(distances, kind="stable")
        self.distances = distances[order]
        self.labels = labels[order]

    @classmethod
    def from_pairs(cls, pairs: Sequence[Tuple[float, object]]) -> "DistanceProfile":
        distances = [distance for distance, _ in pairs]
        labels = [label for _, label in pairs]
        return cls(np.asarray(distances, dtype=np.float64), np.asarray(labels))

    def __len__(self) -> int:
        return int(self.distances.size)


def subsequence_distance(w, t) -> float:
    """
    Minimal squared Euclidean distance between ``w`` and any equal-length window of ``t``.

    No square root is taken.
    """
    return _best_window(_as_series(w), _as_series(t))[1]


def _best_window(values: np.ndarray, series: np.ndarray) -> Tuple[int, float]:
    length = values.size
    if series.size < length:
        raise ValueError(f"series of length {series.size} is shorter than shapelet of length {length}")
    windows = sliding_window_view(series, length)
    distances = np.sum((windows - values) ** 2, axis=1)
    start = int(np.argmin(distances))
    return start, float(distances[start])


def _binary_entropy(p: np.ndarray) -> np.ndarray:
    return (entr(p) + entr(1.0 - p)) / math.log(2.0)


def entropy(labels) -> float:
    """Binary Shannon entropy (bits) of a multiset holding at most two groups."""
    labels = np.asarray(labels).reshape(-1)
    if labels.size == 0:
        raise ValueError("entropy of an empty multiset is undefined")
    groups, counts = np.unique(labels, return_counts=True)
    if groups.size > 2:
        raise ValueError(f"expected at most two groups, got {groups.size}")
    return float(_binary_entropy(np.asarray(counts[0] / labels.size)))


def _positive_mask(labels: np.ndarray) -> np.ndarray:
    groups = np.unique(labels)
    if groups.size > 2:
        raise ValueError(f"expected at most two groups, got {groups.size}")
    return labels == groups[-1]


def information_gain(profile: DistanceProfile, split_threshold: Optional[float] = None) -> float:
    """
    Information gain of splitting ``profile`` at a distance threshold.

    With ``split_threshold`` given, entries with distance <= threshold form the
    left side. Without it, the maximum over midpoint thresholds is returned.
    """
    if len(profile) < 2:
        raise ValueError("information gain needs at least two profile entries")
    if split_threshold is None:
        return best_split(profile)[0]

    positive = _positive_mask(profile.labels)
    left = profile.distances <= split_threshold
    total = positive.size
    gain = _binary_entropy(np.asarray(positive.mean()))
    for side in (left, ~left):
        if side.any():
            gain -= side.sum() / total * _binary_entropy(np.asarray(positive[side].mean()))
    return max(float(gain), 0.0)


def best_split(profile: DistanceProfile) -> Tuple[float, float]:
    """
    Maximum information gain over midpoints between consecutive distinct distances.

    Returns:
        (gain, threshold); threshold is NaN when all distances coincide
    """
    if len(profile) < 2:
        raise ValueError("information gain needs at least two profile entries")
    distances = profile.distances
    positive = _positive_mask(profile.labels).astype(np.float64)
    n = positive.size

    left_count = np.arange(1, n, dtype=np.float64)
    left_positive = np.cumsum(positive)[:-1]
    right_count = n - left_count
    right_positive = positive.sum() - left_positive

    gains = (
        _binary_entropy(np.asarray(positive.sum() / n))
        - left_count / n * _binary_entropy(left_positive / left_count)
        - right_count / n * _binary_entropy(right_positive / right_count)
    )
    valid = distances[:-1] < distances[1:]
    if not valid.any():
        return 0.0, math.nan
    gains = np.where(valid, gains, -np.inf)
    position = int(np.argmax(gains))
    threshold = 0.5 * (distances[position] + distances[position + 1])
    return max(float(gains[position]), 0.0), float(threshold)


def compute_beta(shapelet_set: ShapeletSet) -> float:
    """Sample standard deviation (n-1) of all selected shapelet values; stored in ``beta``."""
    values = np.concatenate([s.values for s in shapelet_set.shapelets]) if shapelet_set.shapelets else np.arange(0.0)
    if values.size < 2:
        raise ValueError("beta needs at least two shapelet values")
    beta = float(np.std(values, ddof=1))
    shapelet_set.beta = beta
    return beta


def transform(record: SeriesLike, shapelet_set: ShapeletSet) -> np.ndarray:
    """
    Concatenate the best-aligned window of ``record`` for every shapelet, in set order.

    Ties between windows resolve to the smallest start offset.
    """
    return transform_many([record], shapelet_set)[0]


def transform_many(records: Sequence[SeriesLike], shapelet_set: ShapeletSet) -> List[np.ndarray]:
    """Apply :func:`transform` to every record; shapelets of one length are aligned together."""
    groups = {}
    for position, shapelet in enumerate(shapelet_set.shapelets):
        groups.setdefault(shapelet.length, []).append(position)
    stacked = [
        (length, members, np.stack([shapelet_set.shapelets[i].values for i in members]))
        for length, members in groups.items()
    ]

    outputs = []
    for record in records:
        series = _as_series(record)
        if series.size == 0 or series.size < shapelet_set.max_length:
            raise ValueError(
                f"record of length {series.size} is shorter than the longest shapelet "
                f"({shapelet_set.max_length})"
            )
        pieces = [None] * len(shapelet_set)
        for length, members, values in stacked:
            starts, _ = _nearest_windows(values, series[None, :])
            for position, start in zip(members, starts[0]):
                pieces[position] = series[start:start + length]
        outputs.append(np.concatenate(pieces) if pieces else np.arange(0.0))
    return outputs


def enumerate_candidates(lengths: Sequence[int], min_len: int, max_len: int,
                         budget: int, rng: np.random.Generator) -> np.ndarray:
    """
    Candidate windows as rows of (record position, start, length).

    All windows are enumerated (record, then length, then start) when their
    count fits the budget; otherwise a uniform sample of ``budget`` windows is
    drawn without replacement and kept in enumeration order.
    """
    lengths = np.asarray(lengths, dtype=np.int64)
    shapelet_lengths = np.arange(min_len, max_len + 1, dtype=np.int64)
    counts = (lengths[:, None] - shapelet_lengths[None, :] + 1).clip(min=0).ravel()
    total = int(counts.sum())

    if total <= budget:
        chosen = np.arange(total, dtype=np.int64)
    else:
        chosen = np.sort(rng.choice(total, size=budget, replace=False))

    ends = np.cumsum(counts)
    block = np.searchsorted(ends, chosen, side="right")
    start = chosen - (ends[block] - counts[block])
    record = block // shapelet_lengths.size
    length = shapelet_lengths[block % shapelet_lengths.size]
    return np.column_stack([record, start, length])


def _centered(rows: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rows minus their means, the means, and the centered squared norms."""
    means = rows.mean(axis=1)
    centered = rows - means[:, None]
    return centered, means, np.einsum("ij,ij->i", centered, centered)


def _squared_distances(candidates: np.ndarray, windows: np.ndarray) -> np.ndarray:
    """
    Squared distances [windows x candidates] between equal-length rows.

    Both sides are mean-centered before the dot-product expansion; rounding
    error then scales with the window variance, not with the signal offset.
    """
    length = candidates.shape[1]
    c_centered, c_means, c_norms = _centered(candidates)
    w_centered, w_means, w_norms = _centered(windows)
    squared = w_centered @ c_centered.T
    squared *= -2.0
    squared += w_norms[:, None]
    squared += c_norms[None, :]
    squared += length * (w_means[:, None] - c_means[None, :]) ** 2
    return np.maximum(squared, 0.0, out=squared)


def _nearest_windows(values: np.ndarray, stack: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Best window start and its exact squared distance for every (record, candidate) pair.

    Args:
        values: Candidates of one length [c x L]
        stack: Equal-length records [g x n]

    Returns:
        (starts, distances), each [g x c]
    """
    count, length = values.shape
    windows = sliding_window_view(stack, length, axis=1)
    records, width = windows.shape[0], windows.shape[1]
    rows = max(1, _SCORING_BLOCK // (width * max(count, length)))

    starts = np.empty((records, count), dtype=np.int64)
    distances = np.empty((records, count))
    for first in range(0, records, rows):
        block = windows[first:first + rows]
        fast = _squared_distances(values, block.reshape(-1, length))
        block_starts = fast.reshape(block.shape[0], width, count).argmin(axis=1)
        best = block[np.arange(block.shape[0])[:, None], block_starts]
        starts[first:first + rows] = block_starts
        distances[first:first + rows] = np.sum((best - values) ** 2, axis=2)
    return starts, distances


def _length_groups(series: Sequence[np.ndarray]) -> List[Tuple[np.ndarray, np.ndarray]]:
    """(positions, stacked samples) for every distinct record length."""
    lengths = np.array([s.size for s in series])
    groups = []
    for size in np.unique(lengths):
        positions = np.flatnonzero(lengths == size)
        groups.append((positions, np.stack([series[i] for i in positions])))
    return groups


def _score_chunk(series: List[np.ndarray], groups: List[Tuple[np.ndarray, np.ndarray]],
                 labels: np.ndarray, chunk: np.ndarray) -> np.ndarray:
    """Information gain of every candidate row in ``chunk`` (all of one length)."""
    length = int(chunk[0, 2])
    values = np.stack([series[r][s:s + length] for r, s, _ in chunk])
    distances = np.empty((chunk.shape[0], len(series)))
    for positions, stack in groups:
        distances[:, positions] = _nearest_windows(values, stack)[1].T

    gains = np.empty(chunk.shape[0])
    for row, (record, _, _) in enumerate(chunk):
        in_class = labels == labels[record]
        gains[row] = best_split(DistanceProfile(distances[row], in_class))[0]
    return gains


def _chunks(candidates: np.ndarray) -> List[np.ndarray]:
    chunks = []
    for length in np.unique(candidates[:, 2]):
        same_length = candidates[candidates[:, 2] == length]
        chunks.extend(same_length[i:i + _CHUNK_ROWS] for i in range(0, same_length.shape[0], _CHUNK_ROWS))
    return chunks


def affordable_candidates(lengths: Sequence[int], min_len: int, max_len: int, work_budget: float) -> int:
    """Candidates whose scoring fits ``work_budget`` multiply-adds (at least one)."""
    per_candidate = float(np.sum(lengths)) * 0.5 * (min_len + max_len)
    return max(1, int(work_budget // per_candidate))


def discover(dataset: Dataset, min_len: int = 3, max_len: Optional[int] = None,
             r: Optional[float] = None, quality: float = 0.05, seed: int = 0,
             budget: Optional[int] = None, n_jobs: Optional[int] = None,
             work_budget: Optional[float] = None) -> ShapeletSet:
    """
    Discover the top shapelets of the training split.

    Args:
        dataset: Dataset; its training split (or all records) supplies candidates
        min_len: Minimum shapelet length
        max_len: Maximum shapelet length (default: the shortest training record,
                 capped at ``DEFAULT_MAX_LEN``)
        r: Maximum number of shapelets kept (default: 10 x training records;
           ``math.inf`` keeps every passing candidate)
        quality: Information-gain floor; weaker candidates are discarded
        seed: Seed of the candidate sampling
        budget: Candidate budget (default: ``settings.candidate_budget``)
        n_jobs: joblib workers for scoring (default: ``settings.n_jobs``)
        work_budget: Multiply-adds allowed for scoring; the candidate budget shrinks
                     to fit it (default: ``settings.scoring_work_budget``)

    Returns:
        ShapeletSet sorted by information gain with beta computed
    """
    indices = dataset.train_index_array()
    records = [dataset.records[i] for i in indices]
    labels = np.array([record.label for record in records], dtype=np.int64)
    if np.unique(labels).size < 2:
        raise ValueError("shapelet discovery needs at least two classes in the training split")
    if min_len < 2:
        raise ValueError(f"min_len must be at least 2, got {min_len}")

    shortest = min(len(record) for record in records)
    max_len = min(shortest, max(min_len, DEFAULT_MAX_LEN)) if max_len is None else max_len
    if max_len < min_len:
        raise ValueError(f"max_len ({max_len}) is smaller than min_len ({min_len})")
    if max_len > shortest:
        raise ValueError(f"max_len ({max_len}) exceeds the shortest training record ({shortest})")
    r = 10 * len(records) if r is None else r
    if r < 1:
        raise ValueError("r must be at least 1")
    budget = settings.candidate_budget if budget is None else budget
    n_jobs = settings.n_jobs if n_jobs is None else n_jobs
    work_budget = settings.scoring_work_budget if work_budget is None else work_budget

    rng = np.random.default_rng(seed)
    series = [record.samples for record in records]
    affordable = affordable_candidates([s.size for s in series], min_len, max_len, work_budget)
    if affordable < budget:
        logger.info(f"Candidate budget {budget} exceeds the scoring work budget; using {affordable}")
        budget = affordable
    candidates = enumerate_candidates([s.size for s in series], min_len, max_len, budget, rng)
    logger.info(
        f"Scoring {candidates.shape[0]} shapelet candidates (lengths {min_len}-{max_len}) "
        f"over {len(records)} training records"
    )

    chunks = _chunks(candidates)
    groups = _length_groups(series)
    scored = Parallel(n_jobs=n_jobs)(
        delayed(_score_chunk)(series, groups, labels, chunk) for chunk in chunks
    )
    ordered = np.concatenate(chunks)
    gains = np.concatenate(scored)
    # restore enumeration order so ties resolve by candidate index
    order = np.lexsort((ordered[:, 1], ordered[:, 2], ordered[:, 0]))
    ordered, gains = ordered[order], gains[order]

    passing = np.flatnonzero(gains >= quality)
    if passing.size == 0:
        raise ShapeletDiscoveryError(
            f"no shapelets found: no candidate reached information gain {quality}"
        )
    ranked = passing[np.argsort(-gains[passing], kind="stable")]
    if math.isfinite(r):
        ranked = ranked[:int(r)]

    shapelets = []
    for position in ranked:
        record, start, length = (int(v) for v in ordered[position])
        shapelets.append(Shapelet(
            values=series[record][start:start + length],
            source_record=int(indices[record]),
            start=start,
            ig=float(gains[position]),
            label=int(labels[record]),
        ))
    shapelet_set = ShapeletSet(shapelets=shapelets)
    compute_beta(shapelet_set)
    logger.info(
        f"Discovered {len(shapelet_set)} shapelets (best IG {shapelets[0].ig:.4f}, "
        f"beta {shapelet_set.beta:.4f})"
    )
    return shapelet_set
