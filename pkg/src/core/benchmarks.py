"""
Registry of the two-dimensional benchmark objectives used to compare the
bee colony optimizers.

f1 and f5 share one expression and differ only in direction; f1 keeps its
nominal maximum of 118 even though the expression peaks near 57 on its box.
f4 is registered exactly as printed and its nominal target -1.5 is not
attained by the expression.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from src.core.optimizer import SearchSpace, Sense

logger = logging.getLogger(__name__)


def _split(positions) -> Tuple[np.ndarray, np.ndarray]:
    positions = np.asarray(positions, dtype=np.float64)
    return positions[..., 0], positions[..., 1]


def rastrigin_form(positions) -> np.ndarray:
    """(20 + (x^2 - 10 cos 2 pi x) + (y^2 - 10 cos 2 pi y)) / sqrt(2)."""
    x, y = _split(positions)
    total = 20.0 + (x ** 2 - 10.0 * np.cos(2 * np.pi * x)) + (y ** 2 - 10.0 * np.cos(2 * np.pi * y))
    return total / np.sqrt(2.0)


def sinc_product(positions) -> np.ndarray:
    """sin(x)/x * sin(y)/y with the removable singularity at 0 set to 1."""
    x, y = _split(positions)
    return np.sinc(x / np.pi) * np.sinc(y / np.pi)


def sphere(positions) -> np.ndarray:
    x, y = _split(positions)
    return x ** 2 + y ** 2


def shifted_sine(positions) -> np.ndarray:
    """(x sin(4 pi x) - y sin(4 pi y + pi + 1)) / 2."""
    x, y = _split(positions)
    return (x * np.sin(4 * np.pi * x) - y * np.sin(4 * np.pi * y + np.pi + 1)) / 2.0


@dataclass(frozen=True)
class BenchmarkFunction:
    """A named objective with its search box, direction and nominal optimum."""
    name: str
    function: Callable
    lower: float
    upper: float
    sense: Sense
    target: float
    description: str = ""
    target_attainable: bool = True
    dimension: int = 2

    def __call__(self, positions) -> np.ndarray:
        return self.function(positions)

    def search_space(self) -> SearchSpace:
        return SearchSpace(
            lower=np.full(self.dimension, self.lower),
            upper=np.full(self.dimension, self.upper),
            objective=self.function,
            sense=self.sense,
            vectorized=True,
            name=self.name,
        )


class BenchmarkRegistry:
    """Registry for managing the benchmark objectives."""

    def __init__(self):
        self.functions: Dict[str, BenchmarkFunction] = {}

    def register(self, function: BenchmarkFunction) -> None:
        if function.name in self.functions:
            raise ValueError(f"benchmark {function.name!r} is already registered")
        self.functions[function.name] = function

    def get(self, name: str) -> Optional[BenchmarkFunction]:
        """Get a benchmark by name."""
        return self.functions.get(name)

    def require(self, name: str) -> BenchmarkFunction:
        function = self.get(name)
        if function is None:
            raise ValueError(f"unknown benchmark function {name!r}; choose from {sorted(self.functions)}")
        return function

    def list_available(self) -> Dict[str, BenchmarkFunction]:
        """List all registered benchmarks."""
        return self.functions.copy()

    def is_available(self, name: str) -> bool:
        return name in self.functions


def benchmark_suite() -> BenchmarkRegistry:
    """A fresh registry holding f1 to f5."""
    registry = BenchmarkRegistry()
    registry.register(BenchmarkFunction(
        name="f1", function=rastrigin_form, lower=-5.12, upper=5.12,
        sense=Sense.MAXIMIZE, target=118.0, target_attainable=False,
        description="Rastrigin form, maximized",
    ))
    registry.register(BenchmarkFunction(
        name="f2", function=sinc_product, lower=-10.0, upper=10.0,
        sense=Sense.MAXIMIZE, target=1.0,
        description="Product of sinc functions",
    ))
    registry.register(BenchmarkFunction(
        name="f3", function=sphere, lower=-10.0, upper=10.0,
        sense=Sense.MINIMIZE, target=0.0,
        description="Sphere",
    ))
    registry.register(BenchmarkFunction(
        name="f4", function=shifted_sine, lower=-1.0, upper=2.0,
        sense=Sense.MINIMIZE, target=-1.5, target_attainable=False,
        description="Shifted sine product",
    ))
    registry.register(BenchmarkFunction(
        name="f5", function=rastrigin_form, lower=-5.12, upper=5.12,
        sense=Sense.MINIMIZE, target=0.0,
        description="Rastrigin form, minimized",
    ))
    logger.debug(f"Registered benchmarks: {sorted(registry.functions)}")
    return registry


# Global benchmark registry instance
benchmark_registry = benchmark_suite()
