"""
Tests for settings and the pipeline config document.
"""
import json
import shutil
import tempfile
from pathlib import Path

import pytest
from pydantic import ValidationError

from src.core.config import PipelineConfig, Settings


class TestSettings:
    """Test cases for environment-backed settings."""

    def test_defaults(self):
        settings = Settings(_env_file=None)
        assert settings.n_jobs == 1
        assert settings.log_level == "INFO"
        assert settings.debug is False
        assert settings.scoring_work_budget == 2e11

    def test_environment_prefix(self, monkeypatch):
        monkeypatch.setenv("FAULTKIT_N_JOBS", "3")
        monkeypatch.setenv("FAULTKIT_CANDIDATE_BUDGET", "1200")
        settings = Settings(_env_file=None)
        assert settings.n_jobs == 3
        assert settings.candidate_budget == 1200

    def test_debug_and_work_budget_from_environment(self, monkeypatch):
        monkeypatch.setenv("FAULTKIT_DEBUG", "true")
        monkeypatch.setenv("FAULTKIT_SCORING_WORK_BUDGET", "5e9")
        settings = Settings(_env_file=None)
        assert settings.debug is True
        assert settings.scoring_work_budget == 5e9

    def test_only_read_fields_declared(self):
        assert set(Settings.model_fields) == {
            "debug", "log_level", "output_directory", "n_jobs", "candidate_budget", "scoring_work_budget",
        }


class TestPipelineConfig:
    """Test cases for PipelineConfig."""

    @pytest.fixture
    def temp_dir(self):
        """Create a temporary directory for testing."""
        temp_dir = tempfile.mkdtemp()
        yield Path(temp_dir)
        shutil.rmtree(temp_dir)

    def test_defaults(self):
        config = PipelineConfig()
        assert config.shapelet.min_len == 3
        assert config.shapelet.quality == 0.05
        assert config.ternary.k == 4
        assert config.booster.n_estimators == 100
        assert config.booster.learning_rate == 0.1
        assert config.tuner.algorithm == "iabc"

    def test_unknown_keys_rejected(self):
        with pytest.raises(ValidationError):
            PipelineConfig.model_validate({"bogus": 1})
        with pytest.raises(ValidationError):
            PipelineConfig.model_validate({"shapelet": {"min_length": 4}})

    def test_bounds_enforced(self):
        with pytest.raises(ValidationError):
            PipelineConfig.model_validate({"tuner": {"max_iterations": 0}})
        with pytest.raises(ValidationError):
            PipelineConfig.model_validate({"ternary": {"k": 9}})
        with pytest.raises(ValidationError):
            PipelineConfig.model_validate({"optimizer": {"function": "f9"}})

    def test_overrides(self):
        config = PipelineConfig().with_overrides({
            "seed": 5,
            "tuner.max_iterations": 4,
            "shapelet.max_len": None,
            "booster.max_depth": 2,
        })
        assert config.seed == 5
        assert config.tuner.max_iterations == 4
        assert config.shapelet.max_len is None
        assert config.booster.max_depth == 2

    def test_invalid_override(self):
        with pytest.raises(ValidationError):
            PipelineConfig().with_overrides({"tuner.folds": 1})

    def test_save_and_load(self, temp_dir):
        config = PipelineConfig().with_overrides({"seed": 9, "optimizer.function": "f5"})
        path = config.save(temp_dir / "config.json")
        assert PipelineConfig.load(path) == config

    def test_run_configs(self):
        config = PipelineConfig().with_overrides({"optimizer.limit": 50, "optimizer.layout": "grid"})
        run_config = config.optimizer.run_config(seed=4)
        assert (run_config.limit, run_config.layout, run_config.seed) == (50, "grid", 4)
        assert config.tuner.run_config(seed=1).colony_size == 20

    def test_published_schema(self):
        schema = json.loads(PipelineConfig.published_schema())
        assert {"paths", "shapelet", "ternary", "booster", "tuner", "optimizer", "seed"} <= set(schema["properties"])
        assert schema["additionalProperties"] is False
