"""
Communication model: use-case parameters, key demand and latency budget.
"""

from .latency import STAGE_FIELDS, LatencyRecord, latency_ok
from .use_case import (
    UseCaseConfig,
    data_bits_per_period,
    demand_rate_bps,
    effective_period,
    key_demand_per_period,
    max_feasible_length,
    reusability_factor,
    tight_availability,
)

__all__ = [
    'STAGE_FIELDS',
    'LatencyRecord',
    'UseCaseConfig',
    'data_bits_per_period',
    'demand_rate_bps',
    'effective_period',
    'key_demand_per_period',
    'latency_ok',
    'max_feasible_length',
    'reusability_factor',
    'tight_availability',
]
