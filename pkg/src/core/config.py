"""
Configuration management for the Bearing Fault Toolkit.

``Settings`` holds process-level knobs read from the environment;
``PipelineConfig`` is the reproducible JSON document that drives the CLI.
"""
import copy
import json
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from src.core.optimizer import RunConfig
from src.models.gbdt import BoosterParams


class Settings(BaseSettings):
    """Application settings with environment variable support."""

    model_config = SettingsConfigDict(
        env_prefix="FAULTKIT_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )

    # Logging; debug forces DEBUG regardless of log_level
    debug: bool = Field(default=False)
    log_level: str = Field(default="INFO")

    # Data Paths
    output_directory: str = Field(default="./data/output")

    # Compute
    n_jobs: int = Field(default=1)
    candidate_budget: int = Field(default=50000, ge=1)
    # multiply-adds spent scoring shapelet candidates
    scoring_work_budget: float = Field(default=2e11, gt=0)


# Global settings instance
settings = Settings()


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PathsSection(_Section):
    """Input dataset (CSV + optional sidecar); synthesized when absent."""
    dataset: Optional[str] = None
    out: str = Field(default_factory=lambda: settings.output_directory)


class DatasetSection(_Section):
    """Synthetic generator knobs and the per-class split counts."""
    class_count: int = Field(default=10, ge=2, le=10)
    record_length: int = Field(default=1024, ge=16)
    sample_rate_hz: float = Field(default=12000.0, gt=0)
    per_class_train: int = Field(default=450, ge=1)
    per_class_test: int = Field(default=150, ge=1)


class ShapeletSection(_Section):
    min_len: int = Field(default=3, ge=2)
    max_len: Optional[int] = Field(default=None, ge=2)
    r: Optional[int] = Field(default=None, ge=1)
    quality: float = Field(default=0.05, ge=0.0)
    budget: Optional[int] = Field(default=None, ge=1)
    work_budget: Optional[float] = Field(default=None, gt=0)


class TernarySection(_Section):
    k: int = Field(default=4, ge=1, le=8)


class TunerSection(_Section):
    """IABC-over-GBDT search. Budgets are reduced from 200 x 1000 to desk scale."""
    algorithm: Literal["abc", "iabc"] = "iabc"
    space: Literal["table7", "full"] = "table7"
    folds: int = Field(default=3, ge=2)
    holdout: bool = False
    colony_size: int = Field(default=20, ge=2)
    max_iterations: int = Field(default=15, ge=1)
    v: int = Field(default=4, ge=1)
    weight_step: float = Field(default=0.1, gt=0.0, lt=1.0)

    def run_config(self, seed: int) -> RunConfig:
        return RunConfig(
            colony_size=self.colony_size,
            max_iterations=self.max_iterations,
            v=self.v,
            weight_step=self.weight_step,
            seed=seed,
        )


class OptimizerSection(_Section):
    """Benchmark runs of the bee colony optimizers."""
    function: str = "f3"
    algorithm: Literal["abc", "iabc"] = "iabc"
    colony_size: int = Field(default=200, ge=2)
    max_iterations: int = Field(default=1000, ge=1)
    limit: Optional[int] = Field(default=None, ge=1)
    v: int = Field(default=4, ge=1)
    weight_step: float = Field(default=0.1, gt=0.0, lt=1.0)
    layout: Literal["slices", "grid"] = "slices"
    repetitions: int = Field(default=1, ge=1)

    @field_validator("function")
    @classmethod
    def _known_function(cls, value: str) -> str:
        from src.core.benchmarks import benchmark_registry

        if not benchmark_registry.is_available(value):
            raise ValueError(
                f"unknown benchmark function {value!r}; "
                f"choose from {sorted(benchmark_registry.list_available())}"
            )
        return value

    def run_config(self, seed: int) -> RunConfig:
        return RunConfig(
            colony_size=self.colony_size,
            max_iterations=self.max_iterations,
            limit=self.limit,
            v=self.v,
            weight_step=self.weight_step,
            layout=self.layout,
            seed=seed,
        )


class PipelineConfig(_Section):
    """The single document behind every CLI subcommand. Unknown keys are rejected."""
    paths: PathsSection = Field(default_factory=PathsSection)
    dataset: DatasetSection = Field(default_factory=DatasetSection)
    shapelet: ShapeletSection = Field(default_factory=ShapeletSection)
    ternary: TernarySection = Field(default_factory=TernarySection)
    booster: BoosterParams = Field(default_factory=BoosterParams)
    tuner: TunerSection = Field(default_factory=TunerSection)
    optimizer: OptimizerSection = Field(default_factory=OptimizerSection)
    seed: int = 0

    @classmethod
    def load(cls, path: Union[str, Path]) -> "PipelineConfig":
        """Load and validate a JSON config file."""
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))

    def with_overrides(self, overrides: Dict[str, Any]) -> "PipelineConfig":
        """
        Return a re-validated copy with dotted-key overrides applied.

        Args:
            overrides: e.g. ``{"seed": 3, "tuner.max_iterations": 5}``; ``None`` values are skipped
        """
        data = self.model_dump()
        for dotted, value in overrides.items():
            if value is None:
                continue
            target = data
            *parents, leaf = dotted.split(".")
            for key in parents:
                target = target.setdefault(key, {})
            target[leaf] = copy.deepcopy(value)
        return type(self).model_validate(data)

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.model_dump_json(indent=2), encoding="utf-8")
        return path

    @classmethod
    def published_schema(cls) -> str:
        """The published JSON schema of the config document."""
        return json.dumps(cls.model_json_schema(), indent=2)
