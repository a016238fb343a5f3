"""
Artificial bee colony optimizers.

``run_abc`` is the canonical three-phase colony (employed, onlooker, scout).
``run_iabc`` partitions the search box into sub-regions with adaptive
importance weights: employed bees stay inside their own region, the weight of
a region grows when its best source improved during the iteration and shrinks
otherwise, and onlookers pick a region by weight and then exploit its best
source.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

logger = logging.getLogger(__name__)


class Sense(Enum):
    """Optimization direction."""
    MINIMIZE = "minimize"
    MAXIMIZE = "maximize"


@dataclass(frozen=True, eq=False)
class SearchSpace:
    """
    Box-constrained objective.

    ``objective`` takes one position (D,) or, when ``vectorized``, a batch (m, D)
    and returns one value per position.
    """
    lower: np.ndarray
    upper: np.ndarray
    objective: Callable
    sense: Sense = Sense.MINIMIZE
    vectorized: bool = False
    name: str = ""

    def __post_init__(self):
        lower = np.array(self.lower, dtype=np.float64).reshape(-1)
        upper = np.array(self.upper, dtype=np.float64).reshape(-1)
        if lower.size == 0 or lower.shape != upper.shape:
            raise ValueError("lower and upper bounds must be non-empty and of equal dimension")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise ValueError("bounds must be finite")
        if np.any(lower >= upper):
            raise ValueError("every lower bound must be strictly below its upper bound")
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "sense", Sense(self.sense))

    @property
    def dimension(self) -> int:
        return int(self.lower.size)

    def evaluate(self, positions: np.ndarray) -> np.ndarray:
        positions = np.atleast_2d(np.asarray(positions, dtype=np.float64))
        if self.vectorized:
            values = self.objective(positions)
        else:
            values = [self.objective(position) for position in positions]
        return np.asarray(values, dtype=np.float64).reshape(positions.shape[0])

    def score(self, values) -> np.ndarray:
        """Values mapped so that lower is always better."""
        values = np.asarray(values, dtype=np.float64)
        return values if self.sense is Sense.MINIMIZE else -values

    def better(self, a: float, b: float) -> bool:
        """True when ``a`` strictly improves on ``b``."""
        return bool(self.score(a) < self.score(b))


@dataclass
class FoodSource:
    position: np.ndarray
    value: float
    fitness: float = 1.0
    trials: int = 0


class RunConfig(BaseModel):
    """Colony size, budget and sub-region settings of one optimizer run."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    colony_size: int = Field(default=200, ge=2)
    max_iterations: int = Field(default=1000, ge=1)
    limit: Optional[int] = Field(default=None, ge=1)
    v: int = Field(default=4, ge=1)
    weight_step: float = Field(default=0.1, gt=0.0, lt=1.0)
    seed: int = 0
    theta_min: float = Field(default=1e-3, gt=0.0)
    theta_max: float = Field(default=1e3, gt=0.0)
    layout: Literal["slices", "grid"] = "slices"
    convergence_tolerance: float = Field(default=1e-12, ge=0.0)

    @model_validator(mode="after")
    def _weight_bounds(self) -> "RunConfig":
        if self.theta_min >= self.theta_max:
            raise ValueError("theta_min must be below theta_max")
        return self

    @property
    def source_count(self) -> int:
        return max(2, self.colony_size // 2)

    def scout_limit(self, dimension: int) -> int:
        return self.limit if self.limit is not None else self.colony_size * dimension


@dataclass
class RunTrace:
    """Best-so-far value after every iteration plus the final best source."""
    best_values: np.ndarray
    convergence_iteration: int
    best: FoodSource
    algorithm: str
    evaluations: int
    initial_best: float
    region_weights: List[np.ndarray] = field(default_factory=list)

    @property
    def best_value(self) -> float:
        return float(self.best.value)

    def iterations_to(self, target: float, tolerance: float = 1e-6) -> Optional[int]:
        """First 1-based iteration whose best value is within ``tolerance`` of ``target``."""
        hits = np.flatnonzero(np.abs(self.best_values - target) <= tolerance)
        return int(hits[0]) + 1 if hits.size else None

    def to_summary(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "best_f": float(self.best.value),
            "best_x": self.best.position.tolist(),
            "iterations_to_convergence": int(self.convergence_iteration),
            "iterations": int(self.best_values.size),
            "evaluations": int(self.evaluations),
        }


@dataclass(frozen=True, eq=False)
class SubRegion:
    """Axis-aligned box of the search space; weights live with the run."""
    lower: np.ndarray
    upper: np.ndarray
    closed_upper: np.ndarray

    def contains(self, points) -> np.ndarray:
        """Half-open membership; the space's own upper faces are closed."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        below_upper = np.where(self.closed_upper, points <= self.upper, points < self.upper)
        return np.all((points >= self.lower) & below_upper, axis=1)


def neighborhood_move(x_i, x_j, k: int, rng: np.random.Generator,
                      lower=None, upper=None, phi: Optional[float] = None) -> np.ndarray:
    """
    Perturb coordinate ``k`` of ``x_i`` relative to ``x_j``.

    Args:
        x_i: Current position
        x_j: Partner position
        k: Coordinate to change
        rng: Random generator, used only when ``phi`` is not given
        lower: Lower bounds for clamping (optional)
        upper: Upper bounds for clamping (optional)
        phi: Step factor; drawn from Uniform(-1, 1) when omitted

    Returns:
        New position, clamped to the bounds when given
    """
    moved = np.array(x_i, dtype=np.float64)
    x_j = np.asarray(x_j, dtype=np.float64)
    if not 0 <= k < moved.size:
        raise ValueError(f"dimension index {k} out of range for D={moved.size}")
    phi = rng.uniform(-1.0, 1.0) if phi is None else phi
    moved[k] = moved[k] + phi * (moved[k] - x_j[k])
    if lower is not None or upper is not None:
        moved = np.clip(moved, lower, upper)
    return moved


def _normalize(weights, what: str) -> np.ndarray:
    weights = np.asarray(weights, dtype=np.float64).reshape(-1)
    if weights.size == 0:
        raise ValueError(f"{what} must not be empty")
    if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
        raise ValueError(f"{what} must be finite and strictly positive")
    return weights / weights.sum()


def selection_probs(fits) -> np.ndarray:
    """Onlooker probabilities proportional to source fitness."""
    return _normalize(fits, "fitness values")


def region_probs(weights) -> np.ndarray:
    """Region probabilities proportional to importance weights."""
    return _normalize(weights, "region weights")


def fitness_map(values, sense: Sense) -> np.ndarray:
    """
    Strictly positive fitness from objective values.

    The floor is the population minimum: ``1/(1 + f - floor)`` when minimizing,
    ``1 + (f - floor)`` when maximizing.
    """
    values = np.asarray(values, dtype=np.float64)
    floor = values.min()
    if Sense(sense) is Sense.MINIMIZE:
        return 1.0 / (1.0 + (values - floor))
    return 1.0 + (values - floor)


def partition(space: SearchSpace, v: int, layout: str = "slices") -> List[SubRegion]:
    """
    Split the search box into ``v`` disjoint covering sub-regions.

    ``slices`` cuts the first dimension into v equal widths; ``grid`` needs
    v = m**D with D <= 3 and cuts every dimension into m.
    """
    if v < 1:
        raise ValueError("v must be at least 1")
    dimension = space.dimension
    if layout == "slices":
        cuts = [np.linspace(space.lower[0], space.upper[0], v + 1)]
        cuts += [np.array([space.lower[d], space.upper[d]]) for d in range(1, dimension)]
    elif layout == "grid":
        if dimension > 3:
            raise ValueError("grid layout supports at most 3 dimensions")
        per_axis = int(round(v ** (1.0 / dimension)))
        if per_axis ** dimension != v:
            raise ValueError(f"grid layout needs v = m**{dimension}, got v={v}")
        cuts = [np.linspace(space.lower[d], space.upper[d], per_axis + 1) for d in range(dimension)]
    else:
        raise ValueError(f"unknown partition layout {layout!r}")

    regions = []
    for cell in np.ndindex(*(len(edges) - 1 for edges in cuts)):
        lower = np.array([cuts[d][i] for d, i in enumerate(cell)])
        upper = np.array([cuts[d][i + 1] for d, i in enumerate(cell)])
        last = np.array([len(edges) - 2 for edges in cuts])
        regions.append(SubRegion(lower=lower, upper=upper, closed_upper=np.array(cell) == last))
    return regions


class _Colony:
    """Food sources, their per-source boxes and the best-so-far bookkeeping."""

    def __init__(self, space: SearchSpace, config: RunConfig,
                 lower: np.ndarray, upper: np.ndarray, rng: np.random.Generator):
        self.space = space
        self.config = config
        self.rng = rng
        self.lower = lower
        self.upper = upper
        self.size = lower.shape[0]
        self.limit = config.scout_limit(space.dimension)
        self.evaluations = 0

        self.positions = self._random_positions(np.arange(self.size))
        self.values = self._evaluate(self.positions)
        self.trials = np.zeros(self.size, dtype=np.int64)
        self.best_position = None
        self.best_value = np.nan
        self.track()

    def _random_positions(self, sources: np.ndarray) -> np.ndarray:
        lower, upper = self.lower[sources], self.upper[sources]
        return lower + self.rng.random(lower.shape) * (upper - lower)

    def _evaluate(self, positions: np.ndarray) -> np.ndarray:
        self.evaluations += positions.shape[0]
        return self.space.evaluate(positions)

    def track(self):
        scores = self.space.score(self.values)
        i = int(np.argmin(scores))
        if self.best_position is None or scores[i] < self.space.score(self.best_value):
            self.best_position = self.positions[i].copy()
            self.best_value = float(self.values[i])

    def _candidates(self, sources: np.ndarray) -> np.ndarray:
        """One neighborhood move per entry of ``sources`` against the current snapshot."""
        count = sources.size
        partners = self.rng.integers(self.size - 1, size=count)
        partners += partners >= sources
        dims = self.rng.integers(self.space.dimension, size=count)
        phi = self.rng.uniform(-1.0, 1.0, size=count)

        candidates = self.positions[sources].copy()
        rows = np.arange(count)
        current = candidates[rows, dims]
        candidates[rows, dims] = current + phi * (current - self.positions[partners, dims])
        return np.clip(candidates, self.lower[sources], self.upper[sources])

    def employed_phase(self):
        sources = np.arange(self.size)
        candidates = self._candidates(sources)
        values = self._evaluate(candidates)
        improved = self.space.score(values) < self.space.score(self.values)
        self.positions[improved] = candidates[improved]
        self.values[improved] = values[improved]
        self.trials[improved] = 0
        self.trials[~improved] += 1
        self.track()

    def onlooker_phase(self, sources: np.ndarray):
        candidates = self._candidates(sources)
        values = self._evaluate(candidates)
        for candidate, value, i in zip(candidates, values, sources):
            if self.space.better(value, self.values[i]):
                self.positions[i] = candidate
                self.values[i] = value
                self.trials[i] = 0
            else:
                self.trials[i] += 1
        self.track()

    def scout_phase(self) -> int:
        exhausted = np.flatnonzero(self.trials > self.limit)
        if exhausted.size:
            self.positions[exhausted] = self._random_positions(exhausted)
            self.values[exhausted] = self._evaluate(self.positions[exhausted])
            self.trials[exhausted] = 0
            self.track()
        return int(exhausted.size)

    @property
    def onlooker_count(self) -> int:
        return max(1, self.config.colony_size - self.size)

    def fitness(self) -> np.ndarray:
        return fitness_map(self.values, self.space.sense)


def _finish(colony: _Colony, best_values: List[float], algorithm: str,
            initial_best: float, weights_history=None) -> RunTrace:
    best_values = np.asarray(best_values, dtype=np.float64)
    final = best_values[-1]
    converged = np.flatnonzero(np.abs(best_values - final) <= colony.config.convergence_tolerance)
    best = FoodSource(
        position=colony.best_position.copy(),
        value=colony.best_value,
        fitness=float(fitness_map(np.array([colony.best_value]), colony.space.sense)[0]),
    )
    logger.info(
        f"{algorithm.upper()} on {colony.space.name or 'objective'}: best {colony.best_value:.6g} "
        f"after {best_values.size} iterations ({colony.evaluations} evaluations)"
    )
    return RunTrace(
        best_values=best_values,
        convergence_iteration=int(converged[0]) + 1,
        best=best,
        algorithm=algorithm,
        evaluations=colony.evaluations,
        initial_best=initial_best,
        region_weights=weights_history or [],
    )


def run_abc(space: SearchSpace, config: Optional[RunConfig] = None) -> RunTrace:
    """
    Canonical artificial bee colony.

    Args:
        space: Objective and search box
        config: RunConfig (defaults: 200 bees, 1000 iterations)

    Returns:
        RunTrace of the run
    """
    config = config or RunConfig()
    rng = np.random.default_rng(config.seed)
    count = config.source_count
    lower = np.tile(space.lower, (count, 1))
    upper = np.tile(space.upper, (count, 1))
    colony = _Colony(space, config, lower, upper, rng)
    initial_best = colony.best_value

    best_values = []
    for iteration in range(config.max_iterations):
        colony.employed_phase()
        chosen = rng.choice(colony.size, size=colony.onlooker_count, p=selection_probs(colony.fitness()))
        colony.onlooker_phase(chosen)
        scouts = colony.scout_phase()
        best_values.append(colony.best_value)
        logger.debug(f"ABC iteration {iteration + 1}: best {colony.best_value:.6g}, {scouts} scouts")
    return _finish(colony, best_values, "abc", initial_best)


def run_iabc(space: SearchSpace, config: Optional[RunConfig] = None) -> RunTrace:
    """
    Bee colony with sub-region importance weights.

    Sources are assigned round-robin to the v sub-regions and never leave
    them. Region weights start uniformly random in (0, 1].
    """
    config = config or RunConfig()
    rng = np.random.default_rng(config.seed)
    regions = partition(space, config.v, config.layout)
    count = config.source_count
    owner = np.arange(count) % len(regions)
    lower = np.stack([regions[j].lower for j in owner])
    upper = np.stack([regions[j].upper for j in owner])

    weights = 1.0 - rng.random(len(regions))
    colony = _Colony(space, config, lower, upper, rng)
    initial_best = colony.best_value
    populated = np.unique(owner)
    region_best = np.full(len(regions), np.inf)
    for j in populated:
        region_best[j] = colony.space.score(colony.values[owner == j]).min()

    best_values, weights_history = [], []
    for iteration in range(config.max_iterations):
        colony.employed_phase()

        scores = colony.space.score(colony.values)
        for j in populated:
            current = scores[owner == j].min()
            factor = 1.0 + config.weight_step if current < region_best[j] else 1.0 - config.weight_step
            weights[j] = np.clip(weights[j] * factor, config.theta_min, config.theta_max)
            region_best[j] = min(region_best[j], current)
        weights_history.append(weights.copy())

        leaders = {j: int(np.flatnonzero(owner == j)[np.argmin(scores[owner == j])]) for j in populated}
        picked = rng.choice(populated, size=colony.onlooker_count, p=region_probs(weights[populated]))
        colony.onlooker_phase(np.array([leaders[j] for j in picked], dtype=np.int64))

        scouts = colony.scout_phase()
        best_values.append(colony.best_value)
        logger.debug(
            f"IABC iteration {iteration + 1}: best {colony.best_value:.6g}, {scouts} scouts, "
            f"weights {np.round(weights, 3).tolist()}"
        )

    return _finish(colony, best_values, "iabc", initial_best, weights_history)


def run(space: SearchSpace, config: Optional[RunConfig] = None, algorithm: str = "iabc") -> RunTrace:
    """Dispatch to ``run_abc`` or ``run_iabc`` by name."""
    runners = {"abc": run_abc, "iabc": run_iabc}
    if algorithm not in runners:
        raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {sorted(runners)}")
    return runners[algorithm](space, config)
