"""
Communication-parameter algebra for the secure telemetry loop.

Covers the use-case parameters, the effective period, per-period key demand,
the key reusability factor and the tight key-availability condition.
"""
import logging
from fractions import Fraction
from typing import Callable, Iterable, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from ..crypto.specs import CIPHER_SPECS, Algorithm
from ..qkd.channel import ChannelModel, secret_key_rate

logger = logging.getLogger(__name__)


class UseCaseConfig(BaseModel):
    """Eight communication parameters of a telemetry use case."""

    n_signals: int = Field(68, ge=0)
    sampling_rate_hz: float = Field(1.0, gt=0.0)
    reporting_rate_hz: float = Field(1.0, gt=0.0)
    precision_bits: int = 32
    # Defaults to 1 for OTP and to the derived value otherwise.
    key_reuse_factor: Optional[float] = Field(None, gt=0.0, le=1.0)
    autonomy_target_s: float = Field(0.0, ge=0.0)
    algorithm: Algorithm = Algorithm.OTP

    @field_validator("precision_bits")
    @classmethod
    def validate_precision(cls, v):
        if v not in (32, 64):
            raise ValueError("precision_bits must be 32 or 64")
        return v

    @model_validator(mode="after")
    def validate_batching(self):
        ratio = Fraction(self.sampling_rate_hz).limit_denominator(10**6) / Fraction(
            self.reporting_rate_hz
        ).limit_denominator(10**6)
        if ratio.denominator != 1 or ratio < 1:
            raise ValueError(
                f"sampling_rate_hz / reporting_rate_hz must be a positive integer, got {float(ratio)}"
            )
        if self.key_reuse_factor is not None:
            if self.algorithm is Algorithm.OTP and self.key_reuse_factor != 1.0:
                raise ValueError("key_reuse_factor must be 1 for OTP")
            if self.algorithm is not Algorithm.OTP and self.key_reuse_factor == 1.0:
                raise ValueError(f"key_reuse_factor of 1 is reserved for OTP, not {self.algorithm.value}")
        return self

    @property
    def kappa(self) -> int:
        """Samples per reporting batch."""
        return int(round(self.sampling_rate_hz / self.reporting_rate_hz))

    def with_algorithm(self, algorithm: Algorithm) -> "UseCaseConfig":
        return self.model_copy(update={"algorithm": algorithm, "key_reuse_factor": None})


def effective_period(cfg: UseCaseConfig) -> float:
    """Loop deadline: the longer of the sampling and reporting periods."""
    return max(1.0 / cfg.sampling_rate_hz, 1.0 / cfg.reporting_rate_hz)


def data_bits_per_period(cfg: UseCaseConfig) -> int:
    return cfg.n_signals * cfg.precision_bits * cfg.kappa


def key_demand_per_period(cfg: UseCaseConfig) -> int:
    """Key bits drawn per reporting period."""
    spec = CIPHER_SPECS[cfg.algorithm]
    if spec.key_bits is None:
        return data_bits_per_period(cfg)
    # one key + IV/nonce refresh per reporting batch, whatever the payload
    return spec.key_bits + spec.iv_or_nonce_bits


def demand_rate_bps(cfg: UseCaseConfig) -> float:
    return key_demand_per_period(cfg) / effective_period(cfg)


def reusability_factor(cfg: UseCaseConfig) -> float:
    """Key bits consumed per data bit; 1 for OTP."""
    if cfg.algorithm is Algorithm.OTP:
        return 1.0
    data = data_bits_per_period(cfg)
    if data == 0:
        return 0.0
    return key_demand_per_period(cfg) / data


def tight_availability(cfg: UseCaseConfig, avg_skr: float) -> bool:
    """Average generation per effective period covers the per-period demand (inclusive)."""
    if avg_skr < 0:
        raise ValueError("avg_skr must be non-negative")
    demand = key_demand_per_period(cfg)
    if demand == 0:
        return True
    # exact comparison so the equality case is not lost to rounding
    supply = Fraction(avg_skr) * Fraction(effective_period(cfg)).limit_denominator(10**9)
    return demand <= supply


def max_feasible_length(
    cfg: UseCaseConfig,
    lengths: Iterable[float],
    model_factory: Callable[[float], ChannelModel],
) -> Optional[float]:
    """Largest grid length where the tight condition holds, or None."""
    best = None
    for length in sorted(lengths):
        if tight_availability(cfg, secret_key_rate(model_factory(length))):
            best = length
    logger.debug(f"Tight availability for {cfg.algorithm.value} N={cfg.n_signals} holds up to {best} km")
    return best
