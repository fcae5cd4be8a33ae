"""
QKD performance model and key-distillation traces.
"""

from .channel import (
    CALIBRATION_LENGTH_KM,
    CALIBRATION_SKR_BPS,
    CadenceModel,
    ChannelModel,
    binary_entropy,
    calibrated_channel,
    qber_at,
    raw_key_rate,
    secret_fraction,
    secret_key_rate,
    sifted_key_rate,
    transmissivity,
)
from .trace import (
    KeyGenTrace,
    TraceEvent,
    accumulated_key,
    campaign_seed,
    campaign_trace,
    load_trace,
    synthesize_trace,
    write_trace,
)

__all__ = [
    'CALIBRATION_LENGTH_KM',
    'CALIBRATION_SKR_BPS',
    'CadenceModel',
    'ChannelModel',
    'KeyGenTrace',
    'TraceEvent',
    'accumulated_key',
    'campaign_seed',
    'campaign_trace',
    'binary_entropy',
    'calibrated_channel',
    'load_trace',
    'qber_at',
    'raw_key_rate',
    'secret_fraction',
    'secret_key_rate',
    'sifted_key_rate',
    'synthesize_trace',
    'transmissivity',
    'write_trace',
]
