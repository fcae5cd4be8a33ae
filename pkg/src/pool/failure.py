"""
Key-distribution failure analysis: post-failure uptime, cipher switching,
communication autonomy and the closed-form reserve condition.
"""
import logging
import math
from fractions import Fraction
from typing import Optional, Union

from ..comm.use_case import UseCaseConfig, key_demand_per_period
from ..core.exceptions import ScheduleError
from ..crypto.specs import Algorithm
from ..qkd.trace import KeyGenTrace, accumulated_key
from .timeline import ConsumptionSchedule, Marker, require_coverage, generated_until

logger = logging.getLogger(__name__)

RESERVE_FORM = "reserve"
BUDGET_FORM = "budget"


def _require_failure(schedule: ConsumptionSchedule) -> int:
    if schedule.fail_step is None:
        raise ScheduleError("schedule has no failure step")
    if schedule.fail_step < schedule.lead_steps:
        raise ScheduleError(
            f"failure at step {schedule.fail_step} precedes lead completion at step {schedule.lead_steps}"
        )
    return schedule.fail_step


def reserve_at_failure(trace: KeyGenTrace, schedule: ConsumptionSchedule) -> int:
    """d[k_fail]: the pool left when generation stops."""
    k_fail = _require_failure(schedule)
    require_coverage(trace, k_fail * schedule.step_s)
    generated = int(generated_until(trace, schedule.step_s, k_fail)[-1])
    return schedule.initial_bits + generated - schedule.consumed_until(k_fail)


def post_failure_uptime(
    trace: KeyGenTrace, schedule: ConsumptionSchedule, horizon_s: Optional[float] = None
) -> float:
    """Seconds from the failure until the pool first reaches d <= 0.

    ``math.inf`` when the pool never empties, or when it outlasts
    ``horizon_s`` seconds counted from the failure.
    """
    reserve = reserve_at_failure(trace, schedule)
    if reserve <= 0:
        return 0.0
    n_pf = schedule.post_failure_bits_per_period
    if n_pf == 0:
        return math.inf
    steps = -(-reserve // n_pf)
    uptime = steps * schedule.step_s
    if horizon_s is not None and uptime > horizon_s:
        return math.inf
    return uptime


def uptime_with_switch(
    trace: KeyGenTrace,
    schedule_pre: ConsumptionSchedule,
    post_algorithm: Algorithm,
    cfg: UseCaseConfig,
    horizon_s: Optional[float] = None,
) -> float:
    """Uptime when the link switches to ``post_algorithm`` at the failure step."""
    n_pf = key_demand_per_period(cfg.with_algorithm(post_algorithm))
    switched = schedule_pre.model_copy(update={"post_failure_bits_per_period": n_pf})
    uptime = post_failure_uptime(trace, switched, horizon_s)
    logger.debug(
        f"Switch to {post_algorithm.value} after failure: n_pf={n_pf} bits, uptime {uptime:.0f} s"
    )
    return uptime


def autonomy_condition(
    trace: KeyGenTrace, schedule: ConsumptionSchedule, t_auto: float, form: str = RESERVE_FORM
) -> bool:
    """Whether the post-failure uptime reaches ``t_auto``.

    ``reserve``: d[k_fail] >= n_pf * t_auto / dtau, with d[k_fail] taken from
    the pool ledger. ``budget``: key generated before the failure covers the
    normal consumption since lead completion plus the autonomy demand,
    summed directly from the trace. Both compare exact rationals.
    """
    k_fail = _require_failure(schedule)
    dtau = Fraction(schedule.step_s)
    autonomy = schedule.post_failure_bits_per_period * Fraction(t_auto)
    if form == RESERVE_FORM:
        return reserve_at_failure(trace, schedule) * dtau >= autonomy
    if form == BUDGET_FORM:
        require_coverage(trace, k_fail * schedule.step_s)
        supply = schedule.initial_bits + accumulated_key(trace, k_fail * schedule.step_s)
        normal = schedule.normal_bits_per_period * (k_fail - schedule.lead_steps)
        return supply * dtau >= normal * dtau + autonomy
    raise ValueError(f"unknown autonomy form {form!r}")


def simplified_min_reserve(
    avg_skr: float, n_bar: float, n_pf_bar: float, dtau: float, t_lead: float, t_auto: float
) -> Union[float, Marker]:
    """Smallest failure time meeting the averaged autonomy condition.

    Solves t_fail * (SKR - n/dtau) + n*t_lead/dtau >= n_pf*t_auto/dtau for
    t_fail >= t_lead.
    """
    for name, value in (("avg_skr", avg_skr), ("n_bar", n_bar), ("n_pf_bar", n_pf_bar),
                        ("t_lead", t_lead), ("t_auto", t_auto)):
        if value < 0:
            raise ValueError(f"{name} must be non-negative")
    if dtau <= 0:
        raise ValueError("dtau must be positive")
    surplus = avg_skr - n_bar / dtau
    deficit = (n_pf_bar * t_auto - n_bar * t_lead) / dtau
    if surplus > 0:
        return max(t_lead, deficit / surplus)
    if surplus == 0:
        return t_lead if deficit <= 0 else Marker.NONVIABLE
    return t_lead if t_lead * surplus >= deficit else Marker.NONVIABLE
