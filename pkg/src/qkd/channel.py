"""
Closed-form decoy-state BB84 performance model.

SKR = f_source * eta_d * t_chan * eta_sift * max(0, g(E)) with the secret
fraction g(E) = p1 * (1 - h(e1)) - f_ec * h(E) and t_chan = 10^(-a*l/10).
"""
import logging
import math
from functools import lru_cache
from typing import List, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

logger = logging.getLogger(__name__)

# Calibration constants of the default model.
CALIBRATION_LENGTH_KM = 54.0
CALIBRATION_SKR_BPS = 320_000.0
DEFAULT_ATTENUATION_DB_PER_KM = 0.2
DEFAULT_QBER_PROFILE: Tuple[Tuple[float, float], ...] = (
    (50.0, 0.0415),
    (54.0, 0.038),
    (82.0, 0.0433),
    (90.0, 0.0495),
    (135.0, 0.0585),
    (140.0, 0.0667),
    (145.0, 0.075),
)
SKR_NOISE_FRACTION = 10_300.0 / CALIBRATION_SKR_BPS
QBER_NOISE_STD = 0.0007


def binary_entropy(e: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Binary Shannon entropy h(e), with h(0) = h(1) = 0."""
    x = np.asarray(e, dtype=float)
    if np.any(~np.isfinite(x)) or np.any((x < 0.0) | (x > 1.0)):
        raise ValueError(f"binary entropy is defined on [0, 1], got {e!r}")
    if x.ndim == 0:
        p = float(x)
        if p in (0.0, 1.0):
            return 0.0
        return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)
    inner = (x > 0.0) & (x < 1.0)
    safe = np.where(inner, x, 0.5)
    return np.where(inner, -safe * np.log2(safe) - (1.0 - safe) * np.log2(1.0 - safe), 0.0)


class ChannelModel(BaseModel):
    """Fiber channel plus the coefficients of the SKR model."""

    model_config = ConfigDict(frozen=True)

    length_km: float = Field(CALIBRATION_LENGTH_KM, ge=0.0)
    atten_coeff_db_per_km: float = Field(DEFAULT_ATTENUATION_DB_PER_KM, gt=0.0)
    qber_profile: List[Tuple[float, float]] = Field(default_factory=lambda: list(DEFAULT_QBER_PROFILE))
    # Anchors at or beyond this length must be non-decreasing in QBER.
    qber_monotone_from_km: float = Field(CALIBRATION_LENGTH_KM, ge=0.0)
    source_rate_hz: float = Field(1.0e8, gt=0.0)
    detector_efficiency: float = Field(0.2, ge=0.0, le=1.0)
    sift_ratio: float = Field(0.9, ge=0.0, le=1.0)
    ec_efficiency: float = Field(1.16, ge=1.0)
    p1_lower: float = Field(0.615, ge=0.0, le=1.0)
    e1_upper: float = Field(0.05, ge=0.0, le=1.0)

    @field_validator("qber_profile")
    @classmethod
    def validate_profile(cls, v):
        if not v:
            raise ValueError("qber_profile needs at least one anchor")
        lengths = [point[0] for point in v]
        if any(b <= a for a, b in zip(lengths, lengths[1:])):
            raise ValueError("qber_profile anchor lengths must be strictly increasing")
        for length, qber in v:
            if length < 0 or not 0.0 <= qber <= 1.0:
                raise ValueError(f"invalid qber anchor ({length}, {qber})")
        return [(float(a), float(b)) for a, b in v]

    @model_validator(mode="after")
    def validate_monotone_range(self):
        tail = [q for l, q in self.qber_profile if l >= self.qber_monotone_from_km]
        if any(b < a for a, b in zip(tail, tail[1:])):
            raise ValueError(
                f"qber_profile must be non-decreasing from {self.qber_monotone_from_km} km onward"
            )
        return self

    def at_length(self, length_km: float) -> "ChannelModel":
        """Same channel coefficients at another fiber length."""
        return self.model_copy(update={"length_km": float(length_km)})


class CadenceModel(BaseModel):
    """Distillation cadence: the nominal cycle period grows with fiber length."""

    model_config = ConfigDict(frozen=True)

    base_period_s: float = Field(100.0, gt=0.0)
    reference_km: float = Field(50.0, ge=0.0)
    growth_per_km: float = Field(0.0385, ge=0.0)
    jitter: float = Field(0.2, ge=0.0, lt=1.0)

    def period_at(self, length_km: float) -> float:
        return self.base_period_s * math.exp(self.growth_per_km * (length_km - self.reference_km))


def qber_at(model: ChannelModel) -> float:
    """QBER from the profile; piecewise linear, clamped outside the anchors."""
    lengths, values = zip(*model.qber_profile)
    return float(np.interp(model.length_km, lengths, values))


def transmissivity(model: ChannelModel) -> float:
    return 10.0 ** (-model.atten_coeff_db_per_km * model.length_km / 10.0)


def raw_key_rate(model: ChannelModel) -> float:
    """Detection rate at the receiver."""
    return model.source_rate_hz * model.detector_efficiency * transmissivity(model)


def sifted_key_rate(model: ChannelModel) -> float:
    return raw_key_rate(model) * model.sift_ratio


def secret_fraction(model: ChannelModel) -> float:
    """Unclamped g(E); negative when error correction costs more than it yields."""
    single_photon = model.p1_lower * (1.0 - binary_entropy(model.e1_upper))
    return single_photon - model.ec_efficiency * binary_entropy(qber_at(model))


def secret_key_rate(model: ChannelModel) -> float:
    fraction = secret_fraction(model)
    if fraction <= 0.0:
        return 0.0
    return sifted_key_rate(model) * fraction


@lru_cache(maxsize=1)
def _calibrated_source_rate() -> float:
    reference = ChannelModel(length_km=CALIBRATION_LENGTH_KM, source_rate_hz=1.0)
    rate = CALIBRATION_SKR_BPS / secret_key_rate(reference)
    logger.debug(f"Calibrated source rate: {rate:.1f} Hz")
    return rate


def calibrated_channel(length_km: float = CALIBRATION_LENGTH_KM) -> ChannelModel:
    """Default calibrated model; the source rate is solved so SKR(54 km) hits the target."""
    return ChannelModel(length_km=length_km, source_rate_hz=_calibrated_source_rate())
