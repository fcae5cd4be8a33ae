"""
Scenario configuration loader and validator.
"""
import yaml
import os
from typing import Dict, Any, Optional, List
from dotenv import load_dotenv
from jsonschema import Draft7Validator
from pydantic import BaseModel, Field, field_validator, model_validator
from pathlib import Path

from ..comm.use_case import UseCaseConfig
from ..crypto.specs import Algorithm
from ..qkd.channel import CadenceModel, ChannelModel, calibrated_channel
from ..qkd.trace import KeyGenTrace, campaign_trace, load_trace

# Load environment variables from .env file
load_dotenv()

SCHEMA_PATH = Path(__file__).resolve().parents[2] / "configs" / "schema" / "scenario_schema.yml"
OUTPUT_DIR_ENV = "QKDSIM_OUTPUT_DIR"


def _sorted_unique(values: List[float], name: str) -> List[float]:
    if not values:
        raise ValueError(f"{name} must not be empty")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError(f"{name} must be sorted in increasing order without repeats")
    return values


class ScenarioInfo(BaseModel):
    name: str = "scenario"
    description: str = ""


class ChannelSection(BaseModel):
    """Channel coefficients on top of the calibrated model, plus measured traces."""
    overrides: Dict[str, Any] = Field(default_factory=dict)
    cadence: CadenceModel = CadenceModel()
    noise: bool = True
    # measured traces by fiber length; other lengths get a synthetic campaign
    trace_files: Dict[float, str] = Field(default_factory=dict)

    @field_validator('overrides')
    @classmethod
    def validate_overrides(cls, v):
        unknown = set(v) - set(ChannelModel.model_fields) - {"length_km"}
        if unknown:
            raise ValueError(f"Unknown channel parameters: {sorted(unknown)}")
        if "length_km" in v:
            raise ValueError("length_km comes from the sweep grid, not the channel section")
        return v

    @field_validator('trace_files')
    @classmethod
    def validate_trace_files(cls, v):
        for length, path in v.items():
            if not Path(path).exists():
                raise ValueError(f"Trace file for {length} km not found: {path}")
        return v

    def model_at(self, length_km: float) -> ChannelModel:
        base = calibrated_channel(length_km)
        if not self.overrides:
            return base
        return ChannelModel(**{**base.model_dump(), **self.overrides, "length_km": float(length_km)})

    def trace_for(self, length_km: float, duration_s: float, seed: int) -> KeyGenTrace:
        path = self.trace_files.get(float(length_km))
        if path is not None:
            return load_trace(path)
        return campaign_trace(
            length_km, duration_s, seed=seed, model=self.model_at(length_km), cadence=self.cadence, noise=self.noise
        )


class SweepSection(BaseModel):
    distances_km: List[float] = Field(default_factory=lambda: [50.0, 54.0, 82.0, 90.0, 135.0, 140.0])
    n_signals: List[int] = Field(default_factory=lambda: [68, 2000])
    sampling_rates_hz: List[float] = Field(default_factory=lambda: [1.0, 10.0, 20.0])
    algorithms: List[Algorithm] = Field(default_factory=lambda: [Algorithm.OTP])
    horizon_s: float = Field(36_000.0, gt=0.0)
    cap_s: float = Field(18_000.0, ge=0.0)
    granularity_s: float = Field(60.0, gt=0.0)

    @field_validator('distances_km')
    @classmethod
    def validate_distances(cls, v):
        return _sorted_unique(v, "distances_km")

    @field_validator('n_signals')
    @classmethod
    def validate_signals(cls, v):
        return _sorted_unique(v, "n_signals")

    @field_validator('sampling_rates_hz')
    @classmethod
    def validate_rates(cls, v):
        return _sorted_unique(v, "sampling_rates_hz")

    @field_validator('algorithms')
    @classmethod
    def validate_algorithms(cls, v):
        if not v:
            raise ValueError("algorithms must not be empty")
        if len(set(v)) != len(v):
            raise ValueError("algorithms must not repeat")
        return v


class FailureSection(BaseModel):
    fail_offsets_s: List[float] = Field(default_factory=lambda: [3_600.0])
    switch_target: Optional[Algorithm] = Algorithm.AES256
    autonomy_target_s: float = Field(0.0, ge=0.0)
    # uptimes beyond this many seconds after the failure report as outlasting it
    horizon_s: Optional[float] = Field(None, gt=0.0)

    @field_validator('fail_offsets_s')
    @classmethod
    def validate_offsets(cls, v):
        if any(offset < 0 for offset in v):
            raise ValueError("failure offsets must be non-negative")
        return _sorted_unique(v, "fail_offsets_s")


class PoolSection(BaseModel):
    """One pool timeline; the lead time defaults to the minimum viable one."""
    length_km: float = Field(54.0, ge=0.0)
    lead_s: Optional[float] = Field(None, ge=0.0)
    fail_after_lead_s: Optional[float] = Field(3_600.0, ge=0.0)
    horizon_s: float = Field(36_000.0, gt=0.0)
    initial_bits: int = Field(0, ge=0)


class RunSection(BaseModel):
    cycles: int = Field(100, ge=0)
    seed: int = 0
    output_dir: str = "outputs"
    policy: str = "halt"
    # "both" runs the two terminals here; "sender" and "receiver" split them across hosts
    role: str = "both"
    link_host: str = "127.0.0.1"
    link_port: int = Field(0, ge=0, le=65535)
    # None runs against an in-process pair
    kms_url_a: Optional[str] = None
    kms_url_b: Optional[str] = None
    length_km: Optional[float] = Field(None, ge=0.0)
    initial_bits: int = Field(0, ge=0)
    failure_at_cycle: Optional[int] = Field(None, ge=0)
    restore_at_cycle: Optional[int] = Field(None, ge=0)

    @field_validator('policy')
    @classmethod
    def validate_policy(cls, v):
        if v not in ("halt", "skip"):
            raise ValueError("policy must be 'halt' or 'skip'")
        return v

    @field_validator('role')
    @classmethod
    def validate_role(cls, v):
        if v not in ("both", "sender", "receiver"):
            raise ValueError("role must be 'both', 'sender' or 'receiver'")
        return v

    @model_validator(mode='after')
    def validate_endpoints(self):
        if self.role == "sender" and self.kms_url_a is None:
            raise ValueError("a sender terminal needs kms_url_a")
        if self.role == "receiver" and self.kms_url_b is None:
            raise ValueError("a receiver terminal needs kms_url_b")
        if self.role != "both" and self.link_port == 0:
            raise ValueError(f"a {self.role} terminal needs link_port")
        if self.role == "both" and (self.kms_url_a is None) != (self.kms_url_b is None):
            raise ValueError("kms_url_a and kms_url_b must be given together")
        if self.failure_at_cycle is not None and (self.kms_url_a is not None or self.kms_url_b is not None):
            raise ValueError("failure injection needs the in-process pair")
        return self


class ScenarioConfig(BaseModel):
    scenario: ScenarioInfo = ScenarioInfo()
    channel: ChannelSection = ChannelSection()
    use_case: UseCaseConfig = UseCaseConfig()
    sweep: SweepSection = SweepSection()
    failure: FailureSection = FailureSection()
    pool: PoolSection = PoolSection()
    run: RunSection = RunSection()

    def output_dir(self, override: Optional[str] = None) -> Path:
        """Command-line override, then the environment, then the run section."""
        return Path(override or os.getenv(OUTPUT_DIR_ENV) or self.run.output_dir)


class ScenarioLoader:
    """Loads and validates scenario configurations from YAML files."""

    def __init__(self, schema_path: Optional[str] = None):
        self.schema_path = Path(schema_path) if schema_path else SCHEMA_PATH
        self._schema: Optional[Dict[str, Any]] = None
        self._config: Optional[ScenarioConfig] = None

    @property
    def schema(self) -> Dict[str, Any]:
        if self._schema is None:
            with open(self.schema_path, 'r', encoding='utf-8') as f:
                self._schema = yaml.safe_load(f)
        return self._schema

    def validate_schema(self, config_data: Dict[str, Any]) -> List[str]:
        """Structural problems in a raw document, one message per problem."""
        validator = Draft7Validator(self.schema)
        return [
            f"{'/'.join(str(p) for p in error.absolute_path) or '<root>'}: {error.message}"
            for error in sorted(validator.iter_errors(config_data), key=lambda e: [str(p) for p in e.absolute_path])
        ]

    def load_config(self, config_file: str) -> ScenarioConfig:
        """Load configuration from YAML file."""
        config_path = Path(config_file)

        if not config_path.exists():
            raise FileNotFoundError(f"Configuration file not found: {config_file}")

        try:
            with open(config_path, 'r', encoding='utf-8') as f:
                config_data = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ValueError(f"Invalid YAML in configuration file: {e}")

        try:
            problems = self.validate_schema(config_data)
            if problems:
                raise ValueError("; ".join(problems))
            self._config = ScenarioConfig(**self._resolve_paths(config_data, config_path.parent))
            return self._config
        except Exception as e:
            raise ValueError(f"Configuration validation error: {e}")

    @staticmethod
    def _resolve_paths(config_data: Dict[str, Any], base: Path) -> Dict[str, Any]:
        """Trace files are relative to the configuration file."""
        channel = config_data.get("channel") or {}
        files = channel.get("trace_files")
        if not files:
            return config_data
        resolved = {length: str(base / path) for length, path in files.items()}
        return {**config_data, "channel": {**channel, "trace_files": resolved}}

    def get_config(self) -> Optional[ScenarioConfig]:
        """Get the loaded configuration."""
        return self._config

    def validate_config(self, config_data: Dict[str, Any]) -> bool:
        """Validate configuration data without loading."""
        if self.validate_schema(config_data):
            return False
        try:
            ScenarioConfig(**config_data)
            return True
        except Exception:
            return False
