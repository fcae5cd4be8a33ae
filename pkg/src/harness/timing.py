"""
Per-stage wall-clock timing for the telemetry loop.

Durations come from time.perf_counter_ns, a monotonic nanosecond clock,
and land in exactly one LatencyRecord field each.
"""
import logging
import time
from contextlib import contextmanager
from typing import Any, Callable, Dict, Generator, NamedTuple

from ..comm.latency import NS_PER_S, STAGE_FIELDS, LatencyRecord

logger = logging.getLogger(__name__)

Clock = Callable[[], int]

STAGES = tuple(name[:-3] for name in STAGE_FIELDS)


def stage_field(stage: str) -> str:
    field = f"{stage}_ns"
    if field not in STAGE_FIELDS:
        raise ValueError(f"unknown stage {stage!r}; expected one of {', '.join(STAGES)}")
    return field


class StageMeasurement(NamedTuple):
    stage: str
    result: Any
    elapsed_ns: int

    @property
    def seconds(self) -> float:
        return self.elapsed_ns / NS_PER_S


def measure_stage(stage: str, thunk: Callable[[], Any], clock: Clock = time.perf_counter_ns) -> StageMeasurement:
    """Run ``thunk`` and time it against ``clock``."""
    stage_field(stage)
    start = clock()
    result = thunk()
    elapsed = max(0, clock() - start)
    return StageMeasurement(stage, result, elapsed)


class StageTimer:
    """Collects the stage durations of one cycle.

    Usage:
        timer = StageTimer()
        with timer.stage("key_a"):
            key = kms.get_key(bits)
        record = timer.record()
    """

    def __init__(self, clock: Clock = time.perf_counter_ns):
        self.clock = clock
        self._durations: Dict[str, int] = {}

    def add(self, stage: str, elapsed_ns: int):
        """Attribute an externally measured duration, e.g. one spanning two threads."""
        field = stage_field(stage)
        if field in self._durations:
            raise ValueError(f"stage {stage!r} already measured in this cycle")
        self._durations[field] = max(0, int(elapsed_ns))

    @contextmanager
    def stage(self, stage: str) -> Generator[None, None, None]:
        stage_field(stage)
        start = self.clock()
        try:
            yield
        finally:
            self.add(stage, self.clock() - start)

    def measure(self, stage: str, thunk: Callable[[], Any]) -> Any:
        measured = measure_stage(stage, thunk, self.clock)
        self.add(stage, measured.elapsed_ns)
        return measured.result

    @property
    def measured(self) -> Dict[str, int]:
        return dict(self._durations)

    def record(self) -> LatencyRecord:
        """Stages never measured count as zero."""
        return LatencyRecord(**self._durations)
