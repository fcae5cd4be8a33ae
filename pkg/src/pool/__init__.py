"""
Key-pool engine: ledger simulation, lead-time search and failure analysis.
"""

from .failure import (
    BUDGET_FORM,
    RESERVE_FORM,
    autonomy_condition,
    post_failure_uptime,
    reserve_at_failure,
    simplified_min_reserve,
    uptime_with_switch,
)
from .lead_time import min_lead_time
from .timeline import (
    ConsumptionSchedule,
    Marker,
    PoolTimeline,
    credit_steps,
    replay_oracle,
    simulate_pool,
    steps_for,
)

__all__ = [
    'BUDGET_FORM',
    'ConsumptionSchedule',
    'Marker',
    'PoolTimeline',
    'RESERVE_FORM',
    'autonomy_condition',
    'credit_steps',
    'min_lead_time',
    'post_failure_uptime',
    'replay_oracle',
    'reserve_at_failure',
    'simplified_min_reserve',
    'simulate_pool',
    'steps_for',
    'uptime_with_switch',
]
