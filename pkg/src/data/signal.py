"""
Vibration signal ingestion for bearing fault classification.
Handles wide-format CSV records, the JSON sidecar, the synthetic
impulse-train generator and the stratified train/test protocol
(10 classes, 450 train / 150 test per class).
"""
import json
import logging
import math
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.core.errors import DataError, ParseError

logger = logging.getLogger(__name__)

DEFAULT_SAMPLE_RATE_HZ = 12000.0
SIDECAR_SUFFIX = ".meta.json"
PADDING_TAIL = re.compile(r",+$", re.MULTILINE)

PathLike = Union[str, Path]


@dataclass(frozen=True, eq=False)
class VibrationRecord:
    """One labeled vibration time series."""
    samples: np.ndarray
    label: int
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ
    source_id: str = ""

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise DataError(f"Record {self.source_id!r}: samples must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(samples)):
            raise DataError(f"Record {self.source_id!r}: samples contain non-finite values")
        if int(self.label) != self.label or self.label < 0:
            raise DataError(f"Record {self.source_id!r}: label must be a non-negative integer, got {self.label}")
        if not (math.isfinite(self.sample_rate_hz) and self.sample_rate_hz > 0):
            raise DataError(f"Record {self.source_id!r}: sample_rate_hz must be positive")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "label", int(self.label))
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))

    def __len__(self) -> int:
        return int(self.samples.size)


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Immutable collection of records with an optional train/test partition.

    When no split has been assigned, ``train_records`` returns every record.
    """
    records: Tuple[VibrationRecord, ...]
    class_count: int
    train_indices: Optional[np.ndarray] = None
    test_indices: Optional[np.ndarray] = None

    def __post_init__(self):
        records = tuple(self.records)
        if self.class_count < 1:
            raise DataError("class_count must be positive")
        for index, record in enumerate(records):
            if record.label >= self.class_count:
                raise DataError(
                    f"Record {index} has label {record.label} outside [0, {self.class_count - 1}]"
                )
        object.__setattr__(self, "records", records)

        train = self._checked_indices(self.train_indices, "train")
        test = self._checked_indices(self.test_indices, "test")
        if (train is None) != (test is None):
            raise DataError("train and test indices must be given together")
        if train is not None and np.intersect1d(train, test).size:
            raise DataError("train and test index sets overlap")
        object.__setattr__(self, "train_indices", train)
        object.__setattr__(self, "test_indices", test)

    def _checked_indices(self, indices, name: str) -> Optional[np.ndarray]:
        if indices is None:
            return None
        array = np.asarray(indices, dtype=np.int64).reshape(-1)
        if array.size and (array.min() < 0 or array.max() >= len(self.records)):
            raise DataError(f"{name} indices out of range for {len(self.records)} records")
        if np.unique(array).size != array.size:
            raise DataError(f"{name} indices contain duplicates")
        array = np.sort(array)
        array.setflags(write=False)
        return array

    def __len__(self) -> int:
        return len(self.records)

    @property
    def has_split(self) -> bool:
        return self.train_indices is not None

    def labels(self) -> np.ndarray:
        """Labels of all records in file order."""
        return np.array([record.label for record in self.records], dtype=np.int64)

    def train_index_array(self) -> np.ndarray:
        if self.train_indices is None:
            return np.arange(len(self.records))
        return self.train_indices

    def test_index_array(self) -> np.ndarray:
        if self.test_indices is None:
            return np.arange(0)
        return self.test_indices

    def train_records(self) -> List[VibrationRecord]:
        return [self.records[i] for i in self.train_index_array()]

    def test_records(self) -> List[VibrationRecord]:
        return [self.records[i] for i in self.test_index_array()]

    def class_counts(self, indices: Optional[Iterable[int]] = None) -> np.ndarray:
        """Per-class record counts, optionally restricted to ``indices``."""
        labels = self.labels()
        if indices is not None:
            labels = labels[np.asarray(list(indices), dtype=np.int64)]
        return np.bincount(labels, minlength=self.class_count)


@dataclass(frozen=True)
class SyntheticFaultSpec:
    """Generator preset for one fault class."""
    class_id: int
    impulse_period_samples: int
    impulse_amplitude: float
    decay_rate: float
    noise_sigma: float
    base_frequency_hz: float
    sine_amplitude: float = 1.0
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ

    def __post_init__(self):
        if self.impulse_period_samples < 2:
            raise ValueError("impulse_period_samples must be at least 2")
        reals = (self.impulse_amplitude, self.decay_rate, self.noise_sigma,
                 self.base_frequency_hz, self.sine_amplitude, self.sample_rate_hz)
        if not all(math.isfinite(value) for value in reals):
            raise ValueError("generator parameters must be finite")
        if self.impulse_amplitude < 0 or self.decay_rate <= 0 or self.noise_sigma < 0:
            raise ValueError("impulse_amplitude and noise_sigma must be >= 0, decay_rate > 0")
        if self.base_frequency_hz <= 0 or self.sample_rate_hz <= 0:
            raise ValueError("frequencies must be positive")


def load_csv(path: PathLike, label_column: int = -1,
             sample_rate_hz: Optional[float] = None) -> Dataset:
    """
    Load a wide-format CSV: one record per row, amplitudes plus an integer label.

    Args:
        path: CSV file; a ``<name>.meta.json`` sidecar next to it is read if present
        label_column: Column index of the label within each row (default: last)
        sample_rate_hz: Overrides the sidecar / default sampling rate

    Returns:
        Dataset with records in file order
    """
    path = Path(path)
    frame = _read_wide_frame(path)
    values = frame.to_numpy(dtype=np.float64)
    present = frame.notna().to_numpy()
    # Rows are NaN-padded on the right up to the widest record.
    widths = np.where(present.any(axis=1), present.shape[1] - np.argmax(present[:, ::-1], axis=1), 0)

    meta = read_sidecar(path)
    rate = sample_rate_hz or meta.get("sample_rate_hz", DEFAULT_SAMPLE_RATE_HZ)
    source_ids = meta.get("source_ids")

    records = []
    for row_index in np.flatnonzero(widths):
        line_number = int(row_index) + 1
        width = int(widths[row_index])
        row = values[row_index, :width]
        if width < 2:
            raise ParseError("row needs at least one amplitude and a label", line_number)
        if not present[row_index, :width].all() or not np.all(np.isfinite(row)):
            raise DataError(f"line {line_number}: non-finite value in {path.name}")
        label = row[label_column]
        if label != int(label) or label < 0:
            raise ParseError(f"label {label} is not a non-negative integer", line_number)
        samples = np.delete(row, label_column if label_column >= 0 else width + label_column)
        source_id = source_ids[len(records)] if source_ids else f"{path.stem}:{line_number}"
        records.append(VibrationRecord(samples, int(label), rate, source_id))
    if not records:
        raise DataError(f"{path} contains no records")

    class_count = 1 + max(record.label for record in records)
    class_count = max(class_count, int(meta.get("class_count", 0)))
    dataset = Dataset(
        records=tuple(records),
        class_count=class_count,
        train_indices=meta.get("train_indices"),
        test_indices=meta.get("test_indices"),
    )
    logger.info(f"Loaded {len(records)} records ({class_count} classes) from {path}")
    return dataset


def _read_wide_frame(path: Path) -> pd.DataFrame:
    """Read a ragged wide CSV into a frame indexed by line number - 1."""
    with path.open(encoding="utf-8") as handle:
        width = max((line.count(",") + 1 for line in handle if line.strip()), default=0)
    if width == 0:
        raise DataError(f"{path} contains no records")
    options = dict(header=None, names=range(width), skip_blank_lines=False)
    try:
        return pd.read_csv(path, dtype=np.float64, float_precision="round_trip", **options)
    except ValueError as exc:
        text = pd.read_csv(path, dtype=str, **options)
        malformed = text.notna() & text.apply(pd.to_numeric, errors="coerce").isna()
        rows = np.flatnonzero(malformed.to_numpy().any(axis=1))
        line_number = int(rows[0]) + 1 if rows.size else None
        raise ParseError(f"malformed row in {path.name}: {exc}", line_number) from exc


def save_csv(dataset: Dataset, path: PathLike) -> Path:
    """Write ``dataset`` as wide-format CSV plus its JSON sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = [[*record.samples.tolist(), record.label] for record in dataset.records]
    text = pd.DataFrame(rows, dtype=object).to_csv(header=False, index=False, lineterminator="\n")
    path.write_text(PADDING_TAIL.sub("", text), encoding="utf-8")

    meta = {
        "class_count": dataset.class_count,
        "sample_rate_hz": dataset.records[0].sample_rate_hz if dataset.records else DEFAULT_SAMPLE_RATE_HZ,
        "source_ids": [record.source_id for record in dataset.records],
    }
    if dataset.has_split:
        meta["train_indices"] = dataset.train_indices.tolist()
        meta["test_indices"] = dataset.test_indices.tolist()
    sidecar_path(path).write_text(json.dumps(meta, indent=2), encoding="utf-8")
    logger.info(f"Saved {len(dataset)} records to {path}")
    return path


def sidecar_path(path: PathLike) -> Path:
    path = Path(path)
    return path.with_name(path.stem + SIDECAR_SUFFIX)


def read_sidecar(path: PathLike) -> dict:
    meta_path = sidecar_path(path)
    if not meta_path.exists():
        return {}
    try:
        return json.loads(meta_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid sidecar {meta_path.name}: {exc.msg}", exc.lineno) from exc


def synthesize(spec: SyntheticFaultSpec, length: int, seed: int) -> VibrationRecord:
    """
    Generate one record: sinusoid + periodic decaying impulses + Gaussian noise.

    The impulse train starts at a seed-dependent offset within the first period,
    as if the record were cut from a longer recording.
    """
    if length < spec.impulse_period_samples:
        raise ValueError(
            f"length {length} is shorter than the impulse period {spec.impulse_period_samples}"
        )
    rng = np.random.default_rng(seed)
    n = np.arange(length)
    samples = spec.sine_amplitude * np.sin(2.0 * np.pi * spec.base_frequency_hz * n / spec.sample_rate_hz)

    offset = int(rng.integers(spec.impulse_period_samples))
    if spec.impulse_amplitude > 0:
        tau = (n - offset) % spec.impulse_period_samples
        samples = samples + spec.impulse_amplitude * np.exp(-spec.decay_rate * tau)
    if spec.noise_sigma > 0:
        samples = samples + rng.normal(0.0, spec.noise_sigma, size=length)

    return VibrationRecord(
        samples=samples,
        label=spec.class_id,
        sample_rate_hz=spec.sample_rate_hz,
        source_id=f"synthetic:{spec.class_id}:{seed}",
    )


def fault_presets(sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ) -> List[SyntheticFaultSpec]:
    """
    Ten generator presets standing in for the bearing conditions:
    normal (0), inner race (1-3), ball (4-6) and outer race (7-9) faults.

    Within a fault family the impulse train is shared and the carrier
    frequency changes with defect size, so amplitude statistics overlap.
    """
    carriers = (300.0, 500.0, 800.0)
    families = (
        (96, 3.0, 0.25),   # inner race
        (150, 3.0, 0.25),  # ball
        (60, 3.0, 0.25),   # outer race
    )
    presets = [SyntheticFaultSpec(0, 120, 0.0, 1.0, 0.2, 300.0, sample_rate_hz=sample_rate_hz)]
    for family_index, (period, amplitude, decay) in enumerate(families):
        for size_index, carrier in enumerate(carriers):
            presets.append(SyntheticFaultSpec(
                class_id=1 + 3 * family_index + size_index,
                impulse_period_samples=period,
                impulse_amplitude=amplitude,
                decay_rate=decay,
                noise_sigma=0.2,
                base_frequency_hz=carrier,
                sample_rate_hz=sample_rate_hz,
            ))
    return presets


def record_seed(seed: int, class_id: int, index: int) -> int:
    """Derive an independent per-record seed from the dataset seed."""
    return int(np.random.SeedSequence([seed, class_id, index]).generate_state(1)[0])


def synthesize_dataset(specs: Sequence[SyntheticFaultSpec], per_class: int,
                       length: int, seed: int) -> Dataset:
    """
    Generate ``per_class`` records for every preset.

    Records are ordered by preset, then index; the dataset carries no split.
    """
    if per_class < 1:
        raise ValueError("per_class must be positive")
    records = [
        synthesize(spec, length, record_seed(seed, spec.class_id, index))
        for spec in specs
        for index in range(per_class)
    ]
    class_count = 1 + max(spec.class_id for spec in specs)
    logger.info(f"Synthesized {len(records)} records for {len(specs)} classes (seed={seed})")
    return Dataset(records=tuple(records), class_count=class_count)


def split(dataset: Dataset, per_class_train: int, per_class_test: int, seed: int) -> Dataset:
    """
    Stratified split with exact per-class counts.

    Args:
        dataset: Source dataset (any existing split is replaced)
        per_class_train: Training records drawn from every class
        per_class_test: Test records drawn from every class
        seed: Seed of the per-class permutations

    Returns:
        A new Dataset sharing the records, with train/test indices assigned
    """
    if per_class_train < 0 or per_class_test < 0:
        raise ValueError("per-class counts must be non-negative")
    rng = np.random.default_rng(seed)
    labels = dataset.labels()
    needed = per_class_train + per_class_test
    train, test = [], []
    for class_id in range(dataset.class_count):
        members = np.flatnonzero(labels == class_id)
        if members.size < needed:
            raise ValueError(
                f"class {class_id} has {members.size} records, {needed} required"
            )
        permuted = rng.permutation(members)
        train.append(permuted[:per_class_train])
        test.append(permuted[per_class_train:needed])

    result = replace(
        dataset,
        train_indices=np.concatenate(train) if train else np.arange(0),
        test_indices=np.concatenate(test) if test else np.arange(0),
    )
    logger.info(
        f"Split {len(dataset)} records: {per_class_train}/{per_class_test} per class "
        f"across {dataset.class_count} classes"
    )
    return result
