"""
Dynamic key-pool ledger.

Step k covers ((k-1)*dtau, k*dtau]. A distillation event is credited at the
first step boundary at or after its completion time, and the pool balance is

    d[k] = d0 + G(min(k, k_fail)) - C(k)

where G sums the key bits of credited events and C is the three-phase
consumption: nothing up to k_lead, n per step up to k_fail, n_pf afterwards.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, field_validator

from ..comm.use_case import UseCaseConfig, effective_period, key_demand_per_period
from ..core.exceptions import ScheduleError, TraceCoverageError
from ..qkd.trace import KeyGenTrace

logger = logging.getLogger(__name__)

TIMELINE_COLUMNS = ["k", "t_s", "d_bits", "gen_cum", "cons_cum"]


class Marker(Enum):
    """Non-numeric sweep results."""
    NONVIABLE = "-"

    def __str__(self) -> str:
        return self.value


def steps_for(seconds: float, step_s: float) -> int:
    """Whole steps needed to cover ``seconds``."""
    if seconds <= 0:
        return 0
    return int(math.ceil(seconds / step_s - 1e-9))


class ConsumptionSchedule(BaseModel):
    """Three-phase consumption: idle during lead, n per step, n_pf after failure."""

    step_s: float = Field(1.0, gt=0.0)
    lead_steps: int = Field(0, ge=0)
    normal_bits_per_period: int = Field(0, ge=0)
    post_failure_bits_per_period: int = Field(0, ge=0)
    fail_step: Optional[int] = Field(None, ge=0)
    initial_bits: int = 0

    @field_validator("normal_bits_per_period", "post_failure_bits_per_period", mode="before")
    @classmethod
    def round_up_bits(cls, v):
        # whole-bit accounting: fractional demand is rounded up
        if isinstance(v, float):
            return int(math.ceil(v))
        return v

    @classmethod
    def from_use_case(
        cls,
        cfg: UseCaseConfig,
        lead_s: float,
        fail_s: Optional[float] = None,
        post_failure_cfg: Optional[UseCaseConfig] = None,
    ) -> "ConsumptionSchedule":
        step_s = effective_period(cfg)
        demand = key_demand_per_period(cfg)
        return cls(
            step_s=step_s,
            lead_steps=steps_for(lead_s, step_s),
            normal_bits_per_period=demand,
            post_failure_bits_per_period=key_demand_per_period(post_failure_cfg or cfg),
            fail_step=None if fail_s is None else steps_for(fail_s, step_s),
        )

    @property
    def lead_s(self) -> float:
        return self.lead_steps * self.step_s

    @property
    def fail_s(self) -> Optional[float]:
        return None if self.fail_step is None else self.fail_step * self.step_s

    def consumption_at(self, k: int) -> int:
        """Bits drawn during step k."""
        if k <= self.lead_steps:
            return 0
        if self.fail_step is None or k <= self.fail_step:
            return self.normal_bits_per_period
        return self.post_failure_bits_per_period

    def consumed_until(self, k: Union[int, np.ndarray]) -> Union[int, np.ndarray]:
        """Cumulative consumption after step k (vectorized)."""
        k = np.asarray(k, dtype=np.int64)
        if self.fail_step is None:
            normal = np.maximum(k - self.lead_steps, 0)
            post = np.zeros_like(k)
        else:
            normal = np.maximum(np.minimum(k, self.fail_step) - self.lead_steps, 0)
            post = np.maximum(k - max(self.fail_step, self.lead_steps), 0)
        total = normal * self.normal_bits_per_period + post * self.post_failure_bits_per_period
        return int(total) if total.ndim == 0 else total


def credit_steps(trace: KeyGenTrace, step_s: float) -> np.ndarray:
    """First step boundary k with k*step_s >= t_{g+1}, per event."""
    ends = trace.end_s
    k = np.ceil(ends / step_s).astype(np.int64)
    # guard the float division so the comparison used everywhere else holds
    early = (k - 1) * step_s >= ends
    k[early] -= 1
    late = k * step_s < ends
    k[late] += 1
    return np.maximum(k, 0)


def generated_until(trace: KeyGenTrace, step_s: float, steps: int, last_credit_step: Optional[int] = None) -> np.ndarray:
    """G(k) for k = 0..steps, optionally frozen after ``last_credit_step``."""
    credits = np.zeros(steps + 1, dtype=np.int64)
    if len(trace):
        k = credit_steps(trace, step_s)
        limit = steps if last_credit_step is None else min(steps, last_credit_step)
        keep = k <= limit
        np.add.at(credits, k[keep], trace.key_bits[keep])
    return np.cumsum(credits)


@dataclass(frozen=True, eq=False)
class PoolTimeline:
    step_s: float
    d_bits: np.ndarray
    gen_cum: np.ndarray
    cons_cum: np.ndarray
    lead_step: int
    fail_step: Optional[int] = None
    d0_bits: int = 0

    @property
    def horizon_steps(self) -> int:
        return len(self.d_bits) - 1

    @property
    def k(self) -> np.ndarray:
        return np.arange(len(self.d_bits))

    @property
    def available(self) -> np.ndarray:
        """Availability per step: the pool must stay strictly positive."""
        return self.d_bits > 0

    def first_unavailable_step(self) -> Optional[int]:
        """First step after lead completion with d <= 0."""
        mask = ~self.available
        mask[: self.lead_step + 1] = False
        hits = np.flatnonzero(mask)
        return int(hits[0]) if len(hits) else None

    @property
    def exhaust_step(self) -> Optional[int]:
        """First step after the failure with d <= 0."""
        if self.fail_step is None:
            return None
        mask = ~self.available
        mask[: self.fail_step + 1] = False
        hits = np.flatnonzero(mask)
        return int(hits[0]) if len(hits) else None

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "k": self.k,
                "t_s": self.k * self.step_s,
                "d_bits": self.d_bits,
                "gen_cum": self.gen_cum,
                "cons_cum": self.cons_cum,
            },
            columns=TIMELINE_COLUMNS,
        )

    def to_csv(self, path: Union[str, Path]):
        self.to_frame().to_csv(path, index=False)


def require_coverage(trace: KeyGenTrace, until_s: float):
    if until_s > 0 and trace.end_time < until_s:
        raise TraceCoverageError(f"trace ends at {trace.end_time:.1f} s, needs to cover {until_s:.1f} s")


def simulate_pool(trace: KeyGenTrace, schedule: ConsumptionSchedule, horizon_steps: int) -> PoolTimeline:
    """Pool balance for k = 0..horizon_steps."""
    if horizon_steps < 0:
        raise ScheduleError("horizon_steps must be non-negative")
    generation_steps = horizon_steps if schedule.fail_step is None else min(horizon_steps, schedule.fail_step)
    require_coverage(trace, generation_steps * schedule.step_s)

    gen = generated_until(trace, schedule.step_s, horizon_steps, schedule.fail_step)
    cons = schedule.consumed_until(np.arange(horizon_steps + 1))
    d = schedule.initial_bits + gen - cons
    timeline = PoolTimeline(
        step_s=schedule.step_s,
        d_bits=d,
        gen_cum=gen,
        cons_cum=cons,
        lead_step=schedule.lead_steps,
        fail_step=schedule.fail_step,
        d0_bits=schedule.initial_bits,
    )
    logger.debug(
        f"Simulated pool over {horizon_steps} steps: final d={int(d[-1])} bits, "
        f"first unavailable step {timeline.first_unavailable_step()}"
    )
    return timeline


def replay_oracle(trace: KeyGenTrace, schedule: ConsumptionSchedule, horizon_steps: int) -> List[int]:
    """Straightforward per-step replay of the ledger; returns d[0..horizon_steps]."""
    ends = trace.end_s.tolist()
    bits = trace.key_bits.tolist()
    d = schedule.initial_bits
    g = 0
    history = []
    for k in range(horizon_steps + 1):
        frozen = schedule.fail_step is not None and k > schedule.fail_step
        while not frozen and g < len(ends) and ends[g] <= k * schedule.step_s:
            d += bits[g]
            g += 1
        if k > 0:
            d -= schedule.consumption_at(k)
        history.append(d)
    return history
