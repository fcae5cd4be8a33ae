"""
Synthetic reactor telemetry: smooth bounded pseudo-sensor traces.

Channel 0 of every frame carries the sample timestamp; the other channels
follow random walks with correlated increments that bounce off the bounds.
"""
import logging
from typing import Iterator, NamedTuple, Tuple

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_BOUNDS = (0.0, 100.0)


class TelemetryFrame(NamedTuple):
    cycle: int
    timestamp: float
    values: np.ndarray


class TelemetrySource:
    """Stateful generator of telemetry frames sampled at ``sampling_rate_hz``."""

    def __init__(
        self,
        n_signals: int,
        sampling_rate_hz: float,
        seed: int = 0,
        bounds: Tuple[float, float] = DEFAULT_BOUNDS,
        step_scale: float = 0.5,
        smoothing: float = 0.9,
        start_s: float = 0.0,
    ):
        if n_signals < 0:
            raise ValueError("n_signals must be non-negative")
        if sampling_rate_hz <= 0:
            raise ValueError("sampling_rate_hz must be positive")
        low, high = bounds
        if not low < high:
            raise ValueError(f"bounds must be increasing, got {bounds}")
        if not 0.0 <= smoothing < 1.0:
            raise ValueError("smoothing must be in [0, 1)")
        self.n_signals = n_signals
        self.sampling_rate_hz = sampling_rate_hz
        self.low, self.high = float(low), float(high)
        self.step_scale = step_scale
        self.smoothing = smoothing
        self.start_s = start_s
        self._rng = np.random.default_rng(seed)
        n_walks = max(0, n_signals - 1)
        self._level = self._rng.uniform(self.low, self.high, n_walks)
        self._velocity = np.zeros(n_walks)
        self._cycle = 0

    def _step(self):
        noise = self._rng.normal(0.0, self.step_scale, self._level.shape)
        self._velocity = self.smoothing * self._velocity + noise
        level = self._level + self._velocity
        below, above = level < self.low, level > self.high
        level[below] = 2 * self.low - level[below]
        level[above] = 2 * self.high - level[above]
        # very large steps can overshoot the opposite bound after reflecting
        np.clip(level, self.low, self.high, out=level)
        self._velocity[below | above] *= -1
        self._level = level

    def next_frame(self) -> TelemetryFrame:
        cycle = self._cycle
        timestamp = self.start_s + cycle / self.sampling_rate_hz
        if cycle:
            self._step()
        if self.n_signals:
            values = np.concatenate(([timestamp], self._level))
        else:
            values = np.empty(0)
        self._cycle += 1
        return TelemetryFrame(cycle, timestamp, values)

    def __iter__(self) -> Iterator[TelemetryFrame]:
        while True:
            yield self.next_frame()


def generate_telemetry(
    n_signals: int, sampling_rate_hz: float, duration_s: float, seed: int = 0, **kwargs
) -> Iterator[TelemetryFrame]:
    """Frames covering ``duration_s`` seconds; deterministic per seed."""
    if duration_s < 0:
        raise ValueError("duration_s must be non-negative")
    source = TelemetrySource(n_signals, sampling_rate_hz, seed=seed, **kwargs)
    count = int(round(duration_s * sampling_rate_hz))
    logger.debug(f"Generating {count} telemetry frames of {n_signals} signals")
    for _ in range(count):
        yield source.next_frame()
