"""
Minimum QKD lead time search.
"""
import logging
from typing import Union

import numpy as np

from ..comm.use_case import UseCaseConfig, effective_period, key_demand_per_period
from ..core.exceptions import TraceCoverageError
from ..qkd.trace import KeyGenTrace
from .timeline import Marker, credit_steps, steps_for

logger = logging.getLogger(__name__)

DEFAULT_HORIZON_S = 36_000.0
DEFAULT_CAP_S = 18_000.0
DEFAULT_GRANULARITY_S = 60.0


def min_lead_time(
    trace: KeyGenTrace,
    cfg: UseCaseConfig,
    horizon_s: float = DEFAULT_HORIZON_S,
    cap_s: float = DEFAULT_CAP_S,
    granularity_s: float = DEFAULT_GRANULARITY_S,
) -> Union[float, Marker]:
    """Smallest grid lead time keeping the pool positive over the horizon.

    With lead L and demand n per step, d[k] = G(k) - n*(k - L) for k > L, so
    the pool stays positive iff n*k - G(k) < n*L on (L, L + H]. Between
    credits the left side grows, so it is enough to check the step just
    before each credit and the last step of the horizon.
    """
    n = key_demand_per_period(cfg)
    if n == 0:
        return 0.0
    step_s = effective_period(cfg)
    horizon = steps_for(horizon_s, step_s)
    cap = steps_for(cap_s, step_s)
    needed_s = (cap + horizon) * step_s
    if trace.end_time < needed_s:
        raise TraceCoverageError(
            f"lead-time search needs {needed_s:.0f} s of trace, have {trace.end_time:.0f} s"
        )

    if horizon == 0:
        return 0.0
    if not len(trace):
        return Marker.NONVIABLE

    credit = credit_steps(trace, step_s)
    cum = np.cumsum(trace.key_bits)
    # f(k) = n*k - G(k) evaluated just before each distinct credit step
    steps, first = np.unique(credit, return_index=True)
    before = np.concatenate(([0], cum))[first]
    f_before = n * (steps - 1) - before

    candidates = int(np.floor(cap_s / granularity_s + 1e-9))
    for idx in range(candidates + 1):
        lead_s = idx * granularity_s
        lead = steps_for(lead_s, step_s)
        end = lead + horizon
        generated_end = int(cum[np.searchsorted(credit, end, side="right") - 1]) if credit[0] <= end else 0
        worst = n * end - generated_end
        lo = np.searchsorted(steps, lead + 1, side="right")
        hi = np.searchsorted(steps, end + 1, side="right")
        if hi > lo:
            worst = max(worst, int(f_before[lo:hi].max()))
        if worst < n * lead:
            logger.debug(f"Lead time {lead_s:.0f} s viable for N={cfg.n_signals} {cfg.algorithm.value}")
            return lead_s
    logger.warning(
        f"No viable lead time up to {cap_s:.0f} s for N={cfg.n_signals} {cfg.algorithm.value} "
        f"(mean SKR {trace.average_skr():.1f} bps)"
    )
    return Marker.NONVIABLE
