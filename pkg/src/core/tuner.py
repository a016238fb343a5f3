"""
Hyperparameter tuning of the boosted classifier with the bee colony optimizers.

The colony searches a continuous box; integer parameters are rounded to the
nearest integer (clamped to their bounds) when a position is evaluated, and
every distinct rounded parameter set is trained at most once.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from sklearn.model_selection import StratifiedKFold

from src.core.config import settings
from src.core.errors import TuningError
from src.core.optimizer import FoodSource, RunConfig, RunTrace, SearchSpace, Sense, run
from src.models.gbdt import BoosterParams, train

logger = logging.getLogger(__name__)

DEFAULT_TUNER_CONFIG = RunConfig(colony_size=20, max_iterations=15)


@dataclass(frozen=True)
class ParamSpec:
    """One tunable classifier parameter."""
    name: str
    kind: Literal["int", "real"]
    low: float
    high: float

    def __post_init__(self):
        if self.name not in BoosterParams.model_fields:
            raise ValueError(f"{self.name!r} is not a classifier parameter")
        if self.low > self.high:
            raise ValueError(f"{self.name}: low ({self.low}) exceeds high ({self.high})")

    @property
    def fixed(self) -> bool:
        return self.low == self.high

    def decode(self, coordinate: float):
        value = float(np.clip(coordinate, self.low, self.high))
        if self.kind == "int":
            return int(np.clip(np.rint(value), self.low, self.high))
        return value


@dataclass
class TuneSpace:
    """Parameter box searched by the tuner; other parameters come from ``base``."""
    specs: List[ParamSpec]
    base: BoosterParams = field(default_factory=BoosterParams)

    @classmethod
    def table7(cls, base: Optional[BoosterParams] = None) -> "TuneSpace":
        """n_estimators and learning_rate only."""
        return cls(
            specs=[
                ParamSpec("n_estimators", "int", 1, 1000),
                ParamSpec("learning_rate", "real", 0.01, 1.0),
            ],
            base=base or BoosterParams(),
        )

    @classmethod
    def full(cls, base: Optional[BoosterParams] = None) -> "TuneSpace":
        """All five classifier parameters."""
        return cls(
            specs=cls.table7().specs + [
                ParamSpec("max_depth", "int", 1, 15),
                ParamSpec("min_child_weight", "real", 1.0, 100.0),
                ParamSpec("colsample_bytree", "real", 0.05, 1.0),
            ],
            base=base or BoosterParams(),
        )

    @classmethod
    def point(cls, params: BoosterParams, names: Sequence[str] = ("n_estimators", "learning_rate")) -> "TuneSpace":
        """A collapsed box at ``params``."""
        kinds = {"n_estimators": "int", "max_depth": "int"}
        specs = [
            ParamSpec(name, kinds.get(name, "real"), getattr(params, name), getattr(params, name))
            for name in names
        ]
        return cls(specs=specs, base=params)

    @property
    def free(self) -> List[ParamSpec]:
        return [spec for spec in self.specs if not spec.fixed]

    def decode(self, position: Sequence[float]) -> BoosterParams:
        """Classifier params for a position over the free parameters."""
        values = {spec.name: spec.decode(spec.low) for spec in self.specs if spec.fixed}
        for spec, coordinate in zip(self.free, position):
            values[spec.name] = spec.decode(coordinate)
        return self.base.model_copy(update=values)

    def contains(self, params: BoosterParams) -> bool:
        return all(spec.low <= getattr(params, spec.name) <= spec.high for spec in self.specs)


@dataclass
class TuneResult:
    best_params: BoosterParams
    best_accuracy: float
    trace: RunTrace
    trainings: int

    def to_dict(self) -> Dict:
        return {
            "best_params": self.best_params.model_dump(),
            "best_accuracy": float(self.best_accuracy),
            "algorithm": self.trace.algorithm,
            "iterations": int(self.trace.best_values.size),
            "iterations_to_convergence": int(self.trace.convergence_iteration),
            "evaluations": int(self.trace.evaluations),
            "trainings": int(self.trainings),
        }


def _check_stratification(labels: np.ndarray, folds: int):
    if folds < 2:
        raise ValueError(f"folds must be at least 2, got {folds}")
    classes, counts = np.unique(labels, return_counts=True)
    for label, count in zip(classes, counts):
        if count < folds:
            raise ValueError(f"class {label} has {count} records, fewer than {folds} folds")


def objective(features, labels, params: BoosterParams, folds: int = 3, seed: int = 0) -> float:
    """
    Mean stratified k-fold accuracy of a classifier trained with ``params``.

    Args:
        features: Feature matrix [n x d]
        labels: Class ids
        params: Classifier hyperparameters
        folds: Number of folds (every class needs at least this many records)
        seed: Seed of the fold shuffling

    Returns:
        Accuracy in [0, 1]
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    _check_stratification(labels, folds)
    class_count = int(labels.max()) + 1

    splitter = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
    scores = []
    for train_index, test_index in splitter.split(features, labels):
        model = train(features[train_index], labels[train_index], params, class_count)
        scores.append(float(np.mean(model.predict(features[test_index]) == labels[test_index])))
    return float(np.mean(scores))


def holdout_objective(features, labels, eval_features, eval_labels, params: BoosterParams) -> float:
    """Accuracy on a fixed evaluation split of a classifier trained on ``features``."""
    labels = np.asarray(labels, dtype=np.int64)
    eval_labels = np.asarray(eval_labels, dtype=np.int64)
    class_count = int(max(labels.max(), eval_labels.max())) + 1
    model = train(features, labels, params, class_count)
    return float(np.mean(model.predict(eval_features) == eval_labels))


def _safe_score(score_fn, params: BoosterParams) -> Tuple[Optional[float], Optional[str]]:
    try:
        return score_fn(params), None
    except Exception as exc:  # reported with the failing params
        return None, f"{type(exc).__name__}: {exc}"


class _CachedObjective:
    """Batch objective over colony positions with a cache keyed by decoded params."""

    def __init__(self, space: TuneSpace, score_fn, n_jobs: int):
        self.space = space
        self.score_fn = score_fn
        self.n_jobs = n_jobs
        self.cache: Dict[tuple, float] = {}

    @staticmethod
    def key(params: BoosterParams) -> tuple:
        return tuple(sorted(params.model_dump().items()))

    def __call__(self, positions: np.ndarray) -> np.ndarray:
        params = [self.space.decode(position) for position in np.atleast_2d(positions)]
        pending = {}
        for p in params:
            key = self.key(p)
            if key not in self.cache:
                pending.setdefault(key, p)

        if pending:
            todo = list(pending.values())
            if self.n_jobs > 1 and len(todo) > 1:
                outcomes = Parallel(n_jobs=self.n_jobs)(delayed(_safe_score)(self.score_fn, p) for p in todo)
            else:
                outcomes = [_safe_score(self.score_fn, p) for p in todo]
            for p, (accuracy, error) in zip(todo, outcomes):
                if error is not None:
                    raise TuningError(f"objective failed: {error}", params=p.model_dump())
                self.cache[self.key(p)] = accuracy
            logger.debug(f"Trained {len(todo)} new parameter sets ({len(self.cache)} cached)")

        return np.array([self.cache[self.key(p)] for p in params])


def tune(features, labels, space: Optional[TuneSpace] = None, config: Optional[RunConfig] = None,
         algorithm: str = "iabc", folds: int = 3, eval_features=None, eval_labels=None,
         n_jobs: Optional[int] = None, cv_seed: Optional[int] = None) -> TuneResult:
    """
    Maximize classifier accuracy over ``space`` with a bee colony.

    Args:
        features: Training feature matrix
        labels: Training labels
        space: TuneSpace (default: n_estimators and learning_rate)
        config: Optimizer RunConfig (default: 20 bees, 15 iterations)
        algorithm: "abc" or "iabc"
        folds: Cross-validation folds when no evaluation split is given
        eval_features: Optional evaluation split (holdout mode)
        eval_labels: Labels of the evaluation split
        n_jobs: joblib workers for colony evaluations (default: ``settings.n_jobs``)
        cv_seed: Fold shuffling seed (default: the optimizer seed)

    Returns:
        TuneResult with the best params, their accuracy and the search trace
    """
    space = space or TuneSpace.table7()
    config = config or DEFAULT_TUNER_CONFIG
    n_jobs = settings.n_jobs if n_jobs is None else n_jobs
    cv_seed = config.seed if cv_seed is None else cv_seed
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)

    if eval_features is not None:
        if eval_labels is None:
            raise ValueError("eval_labels are required with eval_features")

        def score_fn(params):
            return holdout_objective(features, labels, eval_features, eval_labels, params)
        mode = "holdout"
    else:
        _check_stratification(labels, folds)

        def score_fn(params):
            return objective(features, labels, params, folds=folds, seed=cv_seed)
        mode = f"{folds}-fold CV"

    evaluate = _CachedObjective(space, score_fn, n_jobs)
    free = space.free
    logger.info(
        f"Tuning {[spec.name for spec in free] or 'nothing (collapsed box)'} with "
        f"{algorithm.upper()} ({config.colony_size} bees, {config.max_iterations} iterations, {mode})"
    )

    if not free:
        accuracy = float(evaluate(np.zeros((1, 0)))[0])
        trace = RunTrace(
            best_values=np.array([accuracy]),
            convergence_iteration=1,
            best=FoodSource(position=np.zeros(0), value=accuracy),
            algorithm=algorithm,
            evaluations=1,
            initial_best=accuracy,
        )
    else:
        search = SearchSpace(
            lower=[spec.low for spec in free],
            upper=[spec.high for spec in free],
            objective=evaluate,
            sense=Sense.MAXIMIZE,
            vectorized=True,
            name="classifier accuracy",
        )
        trace = run(search, config, algorithm)

    best_params = space.decode(trace.best.position)
    logger.info(f"Best accuracy {trace.best.value:.4f} at {best_params.model_dump()}")
    return TuneResult(
        best_params=best_params,
        best_accuracy=float(trace.best.value),
        trace=trace,
        trainings=len(evaluate.cache),
    )
