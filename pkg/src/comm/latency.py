"""
Per-cycle latency accounting for the telemetry loop.
"""
from dataclasses import asdict, dataclass, fields
from typing import Dict

from .use_case import UseCaseConfig, effective_period

NS_PER_S = 1_000_000_000

STAGE_FIELDS = ("fetch_a_ns", "key_a_ns", "enc_a_ns", "transmit_ns", "key_b_ns", "dec_b_ns", "action_b_ns")


@dataclass(frozen=True)
class LatencyRecord:
    """Stage durations of one loop cycle, in integer nanoseconds."""

    fetch_a_ns: int = 0
    key_a_ns: int = 0
    enc_a_ns: int = 0
    transmit_ns: int = 0
    key_b_ns: int = 0
    dec_b_ns: int = 0
    action_b_ns: int = 0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, int) or value < 0:
                raise ValueError(f"{f.name} must be a non-negative integer, got {value!r}")

    @property
    def qkd_ns(self) -> int:
        return self.key_a_ns + self.key_b_ns

    @property
    def crypto_ns(self) -> int:
        return self.enc_a_ns + self.dec_b_ns

    @property
    def com_ns(self) -> int:
        return self.fetch_a_ns + self.transmit_ns

    @property
    def total_ns(self) -> int:
        return sum(getattr(self, name) for name in STAGE_FIELDS)

    # seconds views
    @property
    def fetch_a_s(self) -> float:
        return self.fetch_a_ns / NS_PER_S

    @property
    def key_a_s(self) -> float:
        return self.key_a_ns / NS_PER_S

    @property
    def enc_a_s(self) -> float:
        return self.enc_a_ns / NS_PER_S

    @property
    def transmit_s(self) -> float:
        return self.transmit_ns / NS_PER_S

    @property
    def key_b_s(self) -> float:
        return self.key_b_ns / NS_PER_S

    @property
    def dec_b_s(self) -> float:
        return self.dec_b_ns / NS_PER_S

    @property
    def action_b_s(self) -> float:
        return self.action_b_ns / NS_PER_S

    @property
    def qkd_s(self) -> float:
        return self.qkd_ns / NS_PER_S

    @property
    def crypto_s(self) -> float:
        return self.crypto_ns / NS_PER_S

    @property
    def com_s(self) -> float:
        return self.com_ns / NS_PER_S

    @property
    def total_s(self) -> float:
        return self.total_ns / NS_PER_S

    def as_dict(self) -> Dict[str, int]:
        return asdict(self)

    @classmethod
    def from_seconds(cls, **stages: float) -> "LatencyRecord":
        """Build from second-valued stages, e.g. ``from_seconds(transmit_s=0.2)``."""
        values = {}
        for name, seconds in stages.items():
            if not name.endswith("_s"):
                raise ValueError(f"unknown stage {name}")
            values[name[:-2] + "_ns"] = int(round(seconds * NS_PER_S))
        return cls(**values)


def latency_ok(rec: LatencyRecord, cfg: UseCaseConfig) -> bool:
    """The QKD, crypto and comm stages fit within the effective period; action time is not budgeted."""
    return rec.qkd_ns + rec.crypto_ns + rec.com_ns <= int(round(effective_period(cfg) * NS_PER_S))
