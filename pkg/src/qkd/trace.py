"""
Key-distillation traces: timestamped (t_g, dt_g, SKR_g, QBER_g) events.

Event g covers [t_g, t_{g+1}) and its key is credited at t_{g+1}. Key
material per event is floor(SKR_g * dt_g) bits; every module uses that
integer accounting.
"""
import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterator, NamedTuple, Optional, Union

import numpy as np
import pandas as pd

from ..core.exceptions import TraceError
from .channel import (
    QBER_NOISE_STD,
    SKR_NOISE_FRACTION,
    CadenceModel,
    ChannelModel,
    calibrated_channel,
    qber_at,
    secret_key_rate,
)

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["t_s", "skr_bps", "qber"]


class TraceEvent(NamedTuple):
    t_s: float
    delta_t_s: float
    skr_bps: float
    qber: float
    key_bits: int


@dataclass(frozen=True, eq=False)
class KeyGenTrace:
    """Ordered distillation events; ``start_s[g+1] == end_s[g]`` exactly."""

    start_s: np.ndarray
    end_s: np.ndarray
    skr_bps: np.ndarray
    qber: np.ndarray

    def __post_init__(self):
        n = len(self.start_s)
        if not (len(self.end_s) == len(self.skr_bps) == len(self.qber) == n):
            raise TraceError("trace columns have different lengths")
        if n == 0:
            return
        if np.any(self.end_s <= self.start_s):
            raise TraceError("every event needs a positive duration")
        if np.any(self.start_s[1:] != self.end_s[:-1]):
            raise TraceError("events must be contiguous: t_{g+1} = t_g + dt_g")
        if np.any(self.skr_bps < 0):
            raise TraceError("negative key rate in trace")
        if np.any((self.qber < 0) | (self.qber > 1)):
            raise TraceError("qber outside [0, 1] in trace")

    @classmethod
    def from_completions(cls, end_s, skr_bps, qber=None, origin_s: float = 0.0) -> "KeyGenTrace":
        """Build from completion timestamps; the first event starts at ``origin_s``."""
        ends = np.asarray(end_s, dtype=float)
        starts = np.concatenate(([float(origin_s)], ends[:-1])) if len(ends) else np.empty(0)
        rates = np.asarray(skr_bps, dtype=float)
        errors = np.zeros_like(ends) if qber is None else np.asarray(qber, dtype=float)
        return cls(start_s=starts, end_s=ends, skr_bps=rates, qber=errors)

    @classmethod
    def empty(cls) -> "KeyGenTrace":
        return cls.from_completions([], [])

    def __len__(self) -> int:
        return len(self.end_s)

    @property
    def duration_s(self) -> np.ndarray:
        return self.end_s - self.start_s

    @property
    def key_bits(self) -> np.ndarray:
        return np.floor(self.skr_bps * self.duration_s).astype(np.int64)

    @property
    def end_time(self) -> float:
        return float(self.end_s[-1]) if len(self) else 0.0

    def events(self) -> Iterator[TraceEvent]:
        bits = self.key_bits
        for g in range(len(self)):
            yield TraceEvent(
                float(self.start_s[g]),
                float(self.end_s[g] - self.start_s[g]),
                float(self.skr_bps[g]),
                float(self.qber[g]),
                int(bits[g]),
            )

    def average_skr(self) -> float:
        """Time-weighted mean key rate over the trace."""
        if not len(self):
            return 0.0
        return float(np.sum(self.skr_bps * self.duration_s) / (self.end_time - self.start_s[0]))

    def equals(self, other: "KeyGenTrace") -> bool:
        return all(
            np.array_equal(getattr(self, name), getattr(other, name))
            for name in ("start_s", "end_s", "skr_bps", "qber")
        )


def accumulated_key(trace: KeyGenTrace, until_s: float) -> int:
    """Key bits from events completed by ``until_s``."""
    done = trace.end_s <= until_s
    return int(trace.key_bits[done].sum())


def synthesize_trace(
    model: ChannelModel,
    duration: float,
    cycle_period: float = 120.0,
    jitter: float = 0.2,
    seed: int = 0,
    noise: bool = True,
    skr_noise_fraction: float = SKR_NOISE_FRACTION,
    qber_noise_std: float = QBER_NOISE_STD,
) -> KeyGenTrace:
    """Synthetic trace long enough to cover ``duration`` seconds."""
    if duration <= 0:
        raise ValueError("duration must be positive")
    if cycle_period <= 0:
        raise ValueError("cycle_period must be positive")
    if not 0.0 <= jitter < 1.0:
        raise ValueError("jitter must lie in [0, 1)")

    rng = np.random.default_rng(seed)
    count = int(np.ceil(duration / (cycle_period * (1.0 - jitter)))) + 1
    periods = cycle_period * (1.0 + rng.uniform(-jitter, jitter, count))
    skr_noise = rng.standard_normal(count)
    qber_noise = rng.standard_normal(count)

    ends = np.cumsum(periods)
    keep = int(np.searchsorted(ends, duration, side="left")) + 1
    ends = ends[:keep]

    mean_skr = secret_key_rate(model)
    mean_qber = qber_at(model)
    if noise:
        skr = np.clip(mean_skr * (1.0 + skr_noise_fraction * skr_noise[:keep]), 0.0, None)
        qber = np.clip(mean_qber + qber_noise_std * qber_noise[:keep], 0.0, 1.0)
    else:
        skr = np.full(keep, mean_skr)
        qber = np.full(keep, mean_qber)
    logger.debug(
        f"Synthesized {keep} events over {ends[-1]:.0f} s at {model.length_km} km "
        f"(mean SKR {mean_skr:.1f} bps, seed {seed})"
    )
    return KeyGenTrace.from_completions(ends, skr, qber)


def load_trace(source: Union[str, Path, IO], origin_s: float = 0.0) -> KeyGenTrace:
    """Parse a ``t_s,skr_bps,qber`` CSV; row numbers in errors count data rows from 1."""
    try:
        frame = pd.read_csv(source, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        return KeyGenTrace.empty()
    except pd.errors.ParserError as e:
        raise TraceError(f"malformed CSV: {e}")

    missing = [c for c in TRACE_COLUMNS if c not in frame.columns]
    if missing:
        raise TraceError(f"missing columns {missing}; expected header {','.join(TRACE_COLUMNS)}")
    if frame.empty:
        return KeyGenTrace.empty()

    numeric = frame[TRACE_COLUMNS].apply(pd.to_numeric, errors="coerce")
    bad = ~np.isfinite(numeric.to_numpy(dtype=float)).all(axis=1)
    if bad.any():
        row = int(np.argmax(bad)) + 1
        raise TraceError(f"non-numeric or non-finite value in {frame.iloc[row - 1].tolist()}", row=row)

    # exact float parsing; to_numeric only screens the cells
    values = frame[TRACE_COLUMNS].astype(float)
    times = values["t_s"].to_numpy()
    rates = values["skr_bps"].to_numpy()
    errors = values["qber"].to_numpy()
    # a first row stamped at the origin opens the campaign and carries no key
    opens_at_origin = bool(times[0] == origin_s)
    previous = np.concatenate(([-np.inf if opens_at_origin else origin_s], times[:-1]))
    for label, mask in (
        ("timestamps must be strictly increasing", times <= previous),
        ("negative key rate", rates < 0),
        ("qber outside [0, 1]", (errors < 0) | (errors > 1)),
    ):
        if mask.any():
            raise TraceError(label, row=int(np.argmax(mask)) + 1)
    if opens_at_origin:
        times, rates, errors = times[1:], rates[1:], errors[1:]
    return KeyGenTrace.from_completions(times, rates, errors, origin_s=origin_s)


def write_trace(trace: KeyGenTrace, target: Optional[Union[str, Path, IO]] = None) -> Optional[str]:
    """Write the trace in the ``load_trace`` format; returns the text when no target is given."""
    frame = pd.DataFrame({"t_s": trace.end_s, "skr_bps": trace.skr_bps, "qber": trace.qber})
    if target is None:
        buffer = io.StringIO()
        frame.to_csv(buffer, index=False)
        return buffer.getvalue()
    frame.to_csv(target, index=False)
    return None


def campaign_seed(seed: int, length_km: float) -> int:
    """Per-distance seed, so every cell at one length shares one campaign trace."""
    sequence = np.random.SeedSequence([int(seed), int(round(length_km * 1000))])
    return int(sequence.generate_state(1)[0])


def campaign_trace(
    length_km: float,
    duration: float,
    seed: int = 0,
    model: Optional[ChannelModel] = None,
    cadence: Optional[CadenceModel] = None,
    noise: bool = True,
) -> KeyGenTrace:
    """Synthetic measurement campaign at ``length_km`` with the distance-dependent cadence."""
    model = (model or calibrated_channel()).at_length(length_km)
    cadence = cadence or CadenceModel()
    return synthesize_trace(
        model,
        duration,
        cycle_period=cadence.period_at(length_km),
        jitter=cadence.jitter,
        seed=campaign_seed(seed, length_km),
        noise=noise,
    )
