"""
In-process key-management pair, trace feeding and schedule replay.
"""
import logging
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

from ..core.exceptions import PoolExhaustedError, ScheduleError
from ..pool.timeline import ConsumptionSchedule, require_coverage
from ..qkd.trace import KeyGenTrace
from .client import LocalKmsClient
from .key_store import DEFAULT_SNAPSHOT_INTERVAL, KeyStore, Role
from .ledger import KeyBlock
from .peer import LocalPeerLink

logger = logging.getLogger(__name__)


class KmsPair:
    """Two key stores joined by in-memory peer links."""

    def __init__(self, a: KeyStore, b: KeyStore):
        self.a = a
        self.b = b
        a.peer = LocalPeerLink(b)
        b.peer = LocalPeerLink(a)

    @classmethod
    def in_memory(cls) -> "KmsPair":
        return cls(KeyStore(Role.A), KeyStore(Role.B))

    @classmethod
    def open(cls, data_dir: Union[str, Path], snapshot_interval: int = DEFAULT_SNAPSHOT_INTERVAL) -> "KmsPair":
        """Persistent pair with one subdirectory per server."""
        root = Path(data_dir)
        # B recovers first so A can settle interrupted serves against it
        b = KeyStore(Role.B, data_dir=root / "b", snapshot_interval=snapshot_interval)
        a = KeyStore(Role.A, peer=LocalPeerLink(b), data_dir=root / "a", snapshot_interval=snapshot_interval)
        return cls(a, b)

    @property
    def available_bits(self) -> int:
        return self.a.available_bits

    def credit(self, bits: int) -> bool:
        # B first, so the mirror pool never lags the serving pool
        self.b.credit(bits)
        return self.a.credit(bits)

    def get_key(self, size_bits: int) -> KeyBlock:
        return self.a.enc_keys(size_bits)[0]

    def get_key_by_id(self, key_id: uuid.UUID) -> bytes:
        return self.b.dec_keys([key_id])[0].key_bytes

    def inject_failure(self):
        self.a.inject_failure()
        self.b.inject_failure()

    def restore(self):
        self.a.restore()
        self.b.restore()

    def check_conservation(self) -> bool:
        return self.a.check_conservation() and self.b.check_conservation()

    def clients(self):
        """Sender-side and receiver-side clients."""
        return LocalKmsClient(self.a), LocalKmsClient(self.b)

    def close(self):
        self.a.close()
        self.b.close()


class TraceFeeder:
    """Credits trace events into a pair at their completion times.

    Events completing after ``failure_at_s`` (and up to ``restore_at_s``)
    are lost, like key generation that stopped.
    """

    def __init__(
        self,
        pair: KmsPair,
        trace: KeyGenTrace,
        failure_at_s: Optional[float] = None,
        restore_at_s: Optional[float] = None,
    ):
        if failure_at_s is not None and restore_at_s is not None and restore_at_s < failure_at_s:
            raise ScheduleError("restore cannot precede the failure")
        self.pair = pair
        self.failure_at_s = failure_at_s
        self.restore_at_s = restore_at_s
        self.now_s = 0.0
        self._ends = trace.end_s.tolist()
        self._bits = trace.key_bits.tolist()
        self._next = 0
        self.credited_bits = 0

    def _failed_at(self, t_s: float) -> bool:
        if self.failure_at_s is None or t_s <= self.failure_at_s:
            return False
        return self.restore_at_s is None or t_s <= self.restore_at_s

    def _sync_failure(self, t_s: float):
        if self._failed_at(t_s):
            self.pair.inject_failure()
        else:
            self.pair.restore()

    def advance_to(self, t_s: float) -> int:
        """Credit every event completed by ``t_s``; returns the bits credited now."""
        credited = 0
        while self._next < len(self._ends) and self._ends[self._next] <= t_s:
            end = self._ends[self._next]
            self._sync_failure(end)
            if self.pair.credit(self._bits[self._next]):
                credited += self._bits[self._next]
            self._next += 1
        self._sync_failure(t_s)
        self.now_s = max(self.now_s, t_s)
        self.credited_bits += credited
        return credited


@dataclass
class ReplayResult:
    step_s: float
    available_bits: List[int] = field(default_factory=list)
    first_refusal_step: Optional[int] = None
    first_unavailable_step: Optional[int] = None
    served_keys: int = 0


def replay_schedule(
    pair: KmsPair, trace: KeyGenTrace, schedule: ConsumptionSchedule, horizon_steps: int
) -> ReplayResult:
    """Drive the pair step by step: credits first, then one key request of the step's demand.

    ``available_bits[k]`` mirrors the pool balance d[k] up to the first refusal.
    """
    if schedule.initial_bits < 0:
        raise ScheduleError("a key-management pair cannot start in debt")
    generation_steps = horizon_steps if schedule.fail_step is None else min(horizon_steps, schedule.fail_step)
    require_coverage(trace, generation_steps * schedule.step_s)

    failure_at_s = None if schedule.fail_step is None else schedule.fail_step * schedule.step_s
    feeder = TraceFeeder(pair, trace, failure_at_s=failure_at_s)
    result = ReplayResult(step_s=schedule.step_s)
    if schedule.initial_bits:
        pair.credit(schedule.initial_bits)

    for k in range(horizon_steps + 1):
        feeder.advance_to(k * schedule.step_s)
        demand = schedule.consumption_at(k) if k > 0 else 0
        if demand:
            try:
                block = pair.get_key(demand)
                pair.get_key_by_id(block.key_id)
                result.served_keys += 1
            except PoolExhaustedError:
                if result.first_refusal_step is None:
                    result.first_refusal_step = k
        available = pair.available_bits
        result.available_bits.append(available)
        refused = result.first_refusal_step == k
        if result.first_unavailable_step is None and k > schedule.lead_steps and (available <= 0 or refused):
            result.first_unavailable_step = k
    logger.debug(
        f"Replayed {horizon_steps} steps through the key-management pair: "
        f"{result.served_keys} keys served, first refusal at step {result.first_refusal_step}"
    )
    return result
