"""
Tests for scenario configuration loading and validation.
"""
import pytest
import yaml
import tempfile
import os
from pathlib import Path

from src.core.config_loader import OUTPUT_DIR_ENV, ScenarioConfig, ScenarioLoader
from src.crypto.specs import Algorithm
from src.qkd.trace import KeyGenTrace, write_trace

SCENARIO_DIR = Path(__file__).resolve().parents[1] / "configs" / "scenarios"


@pytest.fixture
def sample_config():
    """Sample configuration for testing."""
    return {
        "scenario": {
            "name": "Test Scenario",
            "description": "A test scenario"
        },
        "use_case": {
            "n_signals": 2000,
            "sampling_rate_hz": 1,
            "reporting_rate_hz": 1,
            "algorithm": "OTP"
        },
        "sweep": {
            "distances_km": [50, 82, 90],
            "n_signals": [68, 2000],
            "sampling_rates_hz": [1, 10],
            "algorithms": ["OTP", "AES256"]
        },
        "failure": {
            "fail_offsets_s": [3600],
            "switch_target": "AES256"
        },
        "run": {
            "cycles": 10,
            "seed": 3
        }
    }


@pytest.fixture
def config_file(sample_config):
    """Create a temporary config file."""
    with tempfile.NamedTemporaryFile(mode='w', suffix='.yml', delete=False) as f:
        yaml.dump(sample_config, f)
        return f.name


class TestScenarioLoader:
    """Test cases for ScenarioLoader."""

    def test_load_valid_config(self, config_file, sample_config):
        """Test loading a valid configuration."""
        loader = ScenarioLoader()
        config = loader.load_config(config_file)

        assert isinstance(config, ScenarioConfig)
        assert config.scenario.name == sample_config["scenario"]["name"]
        assert config.use_case.n_signals == 2000
        assert config.sweep.distances_km == [50.0, 82.0, 90.0]
        assert config.sweep.algorithms == [Algorithm.OTP, Algorithm.AES256]
        assert config.failure.switch_target is Algorithm.AES256
        assert config.run.seed == 3
        assert loader.get_config() is config

        os.unlink(config_file)

    def test_defaults(self):
        """An empty document gives the calibrated defaults."""
        with tempfile.NamedTemporaryFile(mode='w', suffix='.yml', delete=False) as f:
            f.write("")
        config = ScenarioLoader().load_config(f.name)
        assert config.use_case.n_signals == 68
        assert config.sweep.horizon_s == 36_000.0
        assert config.channel.cadence.growth_per_km == pytest.approx(0.0385)
        os.unlink(f.name)

    def test_load_nonexistent_file(self):
        """Test loading a non-existent configuration file."""
        loader = ScenarioLoader()

        with pytest.raises(FileNotFoundError):
            loader.load_config("nonexistent.yml")

    def test_invalid_yaml(self):
        """Test loading invalid YAML."""
        with tempfile.NamedTemporaryFile(mode='w', suffix='.yml', delete=False) as f:
            f.write("invalid: yaml: content: [")
            f.flush()

            loader = ScenarioLoader()
            with pytest.raises(ValueError, match="Invalid YAML"):
                loader.load_config(f.name)

            os.unlink(f.name)

    def test_schema_violation(self, sample_config):
        """Unknown sections and out-of-range values fail the schema check."""
        loader = ScenarioLoader()
        sample_config["telemetry"] = {"bogus": True}
        sample_config["sweep"]["distances_km"] = [-5, 50]

        problems = loader.validate_schema(sample_config)
        assert any("telemetry" in problem for problem in problems)
        assert any(problem.startswith("sweep/distances_km/0") for problem in problems)

        with tempfile.NamedTemporaryFile(mode='w', suffix='.yml', delete=False) as f:
            yaml.dump(sample_config, f)
        with pytest.raises(ValueError, match="Configuration validation error"):
            loader.load_config(f.name)
        os.unlink(f.name)

    def test_unsorted_grid(self, sample_config):
        """Sweep grids must be sorted and free of repeats."""
        loader = ScenarioLoader()
        sample_config["sweep"]["distances_km"] = [90, 50]
        assert loader.validate_config(sample_config) is False
        sample_config["sweep"]["distances_km"] = [50, 50]
        assert loader.validate_config(sample_config) is False

    def test_invalid_use_case(self, sample_config):
        """Sampling must be a whole multiple of reporting."""
        sample_config["use_case"]["sampling_rate_hz"] = 1.5
        assert ScenarioLoader().validate_config(sample_config) is False

    def test_validate_config(self, sample_config):
        """Test configuration validation."""
        loader = ScenarioLoader()
        assert loader.validate_config(sample_config) is True

        invalid_config = sample_config.copy()
        invalid_config["run"] = {"policy": "retry"}
        assert loader.validate_config(invalid_config) is False

    def test_run_endpoints_paired(self, sample_config):
        """Both server URLs or neither."""
        sample_config["run"]["kms_url_a"] = "http://localhost:8100"
        assert ScenarioLoader().validate_config(sample_config) is False
        sample_config["run"]["kms_url_b"] = "http://localhost:8101"
        assert ScenarioLoader().validate_config(sample_config) is True

    def test_trace_files(self, tmp_path, sample_config):
        """Trace files resolve relative to the configuration and must exist."""
        trace = KeyGenTrace.from_completions([100.0, 200.0], [1_000.0, 2_000.0])
        write_trace(trace, tmp_path / "campaign.csv")
        sample_config["channel"] = {"trace_files": {82: "campaign.csv"}}
        path = tmp_path / "scenario.yml"
        path.write_text(yaml.dump(sample_config))

        config = ScenarioLoader().load_config(str(path))
        loaded = config.channel.trace_for(82, 1_000.0, seed=0)
        assert loaded.equals(trace)

        sample_config["channel"] = {"trace_files": {82: "missing.csv"}}
        path.write_text(yaml.dump(sample_config))
        with pytest.raises(ValueError, match="not found"):
            ScenarioLoader().load_config(str(path))

    def test_channel_overrides(self, sample_config):
        """Overrides change the model; the fiber length stays with the grid."""
        sample_config["channel"] = {"overrides": {"atten_coeff_db_per_km": 0.25}}
        config = ScenarioConfig(**sample_config)
        model = config.channel.model_at(82)
        assert model.atten_coeff_db_per_km == 0.25
        assert model.length_km == 82.0

        sample_config["channel"] = {"overrides": {"length_km": 10}}
        assert ScenarioLoader().validate_config(sample_config) is False

    def test_output_dir_precedence(self, monkeypatch):
        """Command line, then environment, then the run section."""
        config = ScenarioConfig(run={"output_dir": "from_config"})
        monkeypatch.delenv(OUTPUT_DIR_ENV, raising=False)
        assert config.output_dir() == Path("from_config")
        monkeypatch.setenv(OUTPUT_DIR_ENV, "from_env")
        assert config.output_dir() == Path("from_env")
        assert config.output_dir("from_cli") == Path("from_cli")

    @pytest.mark.parametrize("name", sorted(p.name for p in SCENARIO_DIR.glob("*.yml")))
    def test_bundled_scenarios(self, name):
        """Every bundled scenario loads."""
        config = ScenarioLoader().load_config(str(SCENARIO_DIR / name))
        assert config.scenario.name == Path(name).stem
