"""
The secure telemetry loop: sender and receiver terminals driven cycle by cycle
against a key-management pair, with per-stage latency accounting.
"""
import hmac
import logging
import queue
import socket
import time
import uuid
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import IO, Callable, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from ..comm.latency import NS_PER_S, LatencyRecord, latency_ok
from ..comm.use_case import UseCaseConfig, effective_period
from ..core.exceptions import IntegrityError, PoolExhaustedError
from ..kms.pair import KmsPair, TraceFeeder
from ..qkd.trace import KeyGenTrace
from .telemetry import TelemetrySource
from .terminals import KeySource, ReceivedFrame, ReceiverTerminal, SenderTerminal, SentFrame, decode_ack, encode_ack
from .timing import StageTimer
from .transport import DEFAULT_AUTH_KEY, FramedConnection, loopback_pair

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["cycle", "fetch_ms", "key_a_ms", "enc_ms", "tx_ms", "key_b_ms", "dec_ms", "total_ms"]
_CSV_STAGES = {
    "fetch_ms": "fetch_a_ns",
    "key_a_ms": "key_a_ns",
    "enc_ms": "enc_a_ns",
    "tx_ms": "transmit_ns",
    "key_b_ms": "key_b_ns",
    "dec_ms": "dec_b_ns",
}
NS_PER_MS = 1_000_000
RECEIVE_TIMEOUT_S = 30.0


class ExhaustionPolicy(str, Enum):
    HALT = "halt"
    SKIP = "skip"


@dataclass
class CycleViolation:
    cycle: int
    reason: str


@dataclass
class RunReport:
    """Latency records and availability violations of one run."""

    cfg: UseCaseConfig
    requested_cycles: int
    cycles: List[int] = field(default_factory=list)
    records: List[LatencyRecord] = field(default_factory=list)
    key_ids: List[uuid.UUID] = field(default_factory=list)
    violations: List[CycleViolation] = field(default_factory=list)
    halted: bool = False

    @property
    def cycles_completed(self) -> int:
        return len(self.records)

    def latency_flags(self) -> List[bool]:
        """Whether each completed cycle fits in the effective period."""
        return [latency_ok(record, self.cfg) for record in self.records]

    @property
    def latency_violations(self) -> int:
        return self.latency_flags().count(False)

    def to_frame(self) -> pd.DataFrame:
        data = {"cycle": self.cycles}
        for column, stage in _CSV_STAGES.items():
            data[column] = [getattr(record, stage) / NS_PER_MS for record in self.records]
        data["total_ms"] = [record.total_ns / NS_PER_MS for record in self.records]
        return pd.DataFrame(data, columns=CSV_COLUMNS)

    def to_csv(self, target: Optional[Union[str, Path, IO]] = None) -> Optional[str]:
        return self.to_frame().to_csv(target, index=False, float_format="%.6f")

    def summary(self) -> pd.DataFrame:
        """Mean and standard deviation in ms of the total and the grouped stages."""
        groups = {
            "Total": [r.total_ns for r in self.records],
            "QKD": [r.qkd_ns for r in self.records],
            "Crypto": [r.crypto_ns for r in self.records],
            "Com": [r.com_ns for r in self.records],
        }
        rows = []
        for name, values in groups.items():
            series = pd.Series(values, dtype="float64") / NS_PER_MS
            rows.append({"metric": name, "mean_ms": series.mean(), "std_ms": series.std(ddof=0)})
        return pd.DataFrame(rows).set_index("metric")


def _await_frame(receiver: ReceiverTerminal) -> ReceivedFrame:
    try:
        outcome = receiver.results.get(timeout=RECEIVE_TIMEOUT_S)
    except queue.Empty:
        raise IntegrityError(f"no frame from the receiver terminal within {RECEIVE_TIMEOUT_S} s")
    if isinstance(outcome, BaseException):
        raise outcome
    return outcome


# returns the receiver's view of a sent frame and the transmit time in ns
Collect = Callable[[SentFrame], Tuple[ReceivedFrame, int]]


def _drive(
    cfg: UseCaseConfig,
    cycles: int,
    sender: SenderTerminal,
    collect: Collect,
    policy: ExhaustionPolicy,
    feeder: Optional[TraceFeeder],
) -> RunReport:
    if cycles < 0:
        raise ValueError("cycles must be non-negative")
    period = effective_period(cfg)
    report = RunReport(cfg=cfg, requested_cycles=cycles)
    seen_ids = set()
    logger.info(
        f"Starting {cycles} cycles: {cfg.algorithm.value}, N={cfg.n_signals}, "
        f"f_s={cfg.sampling_rate_hz} Hz, kappa={cfg.kappa}, policy={policy.value}"
    )

    for cycle in range(1, cycles + 1):
        if feeder is not None:
            feeder.advance_to(cycle * period)
        timer = StageTimer()
        try:
            sent = sender.run_cycle(cycle, timer)
        except PoolExhaustedError as e:
            report.violations.append(CycleViolation(cycle, f"key pool exhausted: {str(e)}"))
            logger.warning(f"Cycle {cycle}: key request refused ({policy.value})")
            if policy is ExhaustionPolicy.HALT:
                report.halted = True
                break
            continue

        received, transmit_ns = collect(sent)
        if received.key_id != sent.key_id or not hmac.compare_digest(received.digest, sent.digest):
            raise IntegrityError(f"cycle {cycle}: decrypted frame differs from the transmitted one")
        if sent.key_id in seen_ids:
            raise IntegrityError(f"cycle {cycle}: key {sent.key_id} was used twice")
        seen_ids.add(sent.key_id)

        timer.add("transmit", transmit_ns)
        timer.add("key_b", received.key_b_ns)
        timer.add("dec_b", received.dec_b_ns)
        timer.add("action_b", received.action_b_ns)
        record = timer.record()
        report.cycles.append(cycle)
        report.records.append(record)
        report.key_ids.append(sent.key_id)
        logger.debug(f"Cycle {cycle}: total {record.total_ns / NS_PER_MS:.3f} ms")

    logger.info(
        f"Run finished: {report.cycles_completed}/{cycles} cycles, "
        f"{len(report.violations)} availability violation(s), {report.latency_violations} over the "
        f"{period * NS_PER_S / NS_PER_MS:.0f} ms deadline"
    )
    return report


def run_loop(
    cfg: UseCaseConfig,
    cycles: int,
    sender_kms: KeySource,
    receiver_kms: KeySource,
    connections: Optional[Tuple[FramedConnection, FramedConnection]] = None,
    policy: ExhaustionPolicy = ExhaustionPolicy.HALT,
    seed: int = 0,
    feeder: Optional[TraceFeeder] = None,
    auth_key: bytes = DEFAULT_AUTH_KEY,
    on_values: Optional[Callable[[np.ndarray], None]] = None,
) -> RunReport:
    """Run ``cycles`` loop cycles and report per-stage latencies.

    When a feeder is given, credits up to simulated time ``k * period`` land
    before cycle ``k``. A refused key request is an availability violation:
    HALT stops the run, SKIP drops that cycle's transmission and carries on.
    """
    sender_end, receiver_end = connections or loopback_pair(auth_key)
    source = TelemetrySource(cfg.n_signals, cfg.sampling_rate_hz, seed=seed)
    sender = SenderTerminal(cfg, sender_kms, sender_end, source)
    receiver = ReceiverTerminal(cfg, receiver_kms, receiver_end, on_values=on_values)
    receiver.start()

    def collect(sent: SentFrame) -> Tuple[ReceivedFrame, int]:
        received = _await_frame(receiver)
        return received, received.rx_done_ns - sent.tx_start_ns

    try:
        return _drive(cfg, cycles, sender, collect, policy, feeder)
    finally:
        sender_end.close()
        receiver.join(timeout=RECEIVE_TIMEOUT_S)
        receiver_end.close()


def run_sender(
    cfg: UseCaseConfig,
    cycles: int,
    sender_kms: KeySource,
    connection: FramedConnection,
    policy: ExhaustionPolicy = ExhaustionPolicy.HALT,
    seed: int = 0,
    feeder: Optional[TraceFeeder] = None,
) -> RunReport:
    """Sender half of a two-host run; the far end runs ``serve_receiver``.

    The two clocks are not comparable, so the transmit stage is half of the
    round trip to the acknowledgement minus the receiver's busy time.
    """
    source = TelemetrySource(cfg.n_signals, cfg.sampling_rate_hz, seed=seed)
    sender = SenderTerminal(cfg, sender_kms, connection, source)
    connection.sock.settimeout(RECEIVE_TIMEOUT_S)

    def collect(sent: SentFrame) -> Tuple[ReceivedFrame, int]:
        try:
            payload = connection.recv()
        except socket.timeout:
            raise IntegrityError(f"no acknowledgement from the receiver terminal within {RECEIVE_TIMEOUT_S} s")
        if payload is None:
            raise IntegrityError(f"receiver terminal closed the link during cycle {sent.cycle}")
        received, busy_ns = decode_ack(payload, time.perf_counter_ns())
        round_trip = received.rx_done_ns - sent.tx_start_ns
        return received, max(round_trip - busy_ns, 0) // 2

    try:
        return _drive(cfg, cycles, sender, collect, policy, feeder)
    finally:
        connection.close()


def serve_receiver(
    cfg: UseCaseConfig,
    receiver_kms: KeySource,
    connection: FramedConnection,
    on_values: Optional[Callable[[np.ndarray], None]] = None,
) -> int:
    """Receiver half of a two-host run: handle and acknowledge frames until the sender closes."""
    terminal = ReceiverTerminal(cfg, receiver_kms, connection, on_values=on_values)
    handled = 0
    try:
        while True:
            wire = connection.recv()
            if wire is None:
                break
            rx_done = terminal.clock()
            frame = terminal.handle(wire, rx_done)
            connection.send(encode_ack(frame, terminal.clock() - rx_done))
            handled += 1
    finally:
        connection.close()
    logger.info(f"Receiver terminal handled {handled} frame(s)")
    return handled


def run_in_process(
    cfg: UseCaseConfig,
    cycles: int,
    pair: Optional[KmsPair] = None,
    trace: Optional[KeyGenTrace] = None,
    initial_bits: int = 0,
    failure_at_cycle: Optional[int] = None,
    restore_at_cycle: Optional[int] = None,
    policy: ExhaustionPolicy = ExhaustionPolicy.HALT,
    seed: int = 0,
    on_values: Optional[Callable[[np.ndarray], None]] = None,
) -> RunReport:
    """Loopback run against an in-process pair, optionally fed from a trace."""
    pair = pair or KmsPair.in_memory()
    if initial_bits:
        pair.credit(initial_bits)
    period = effective_period(cfg)
    feeder = None
    if trace is not None:
        feeder = TraceFeeder(
            pair,
            trace,
            failure_at_s=None if failure_at_cycle is None else failure_at_cycle * period,
            restore_at_s=None if restore_at_cycle is None else restore_at_cycle * period,
        )
    elif failure_at_cycle is not None:
        raise ValueError("a failure cycle needs a trace to interrupt")
    sender_kms, receiver_kms = pair.clients()
    return run_loop(
        cfg, cycles, sender_kms, receiver_kms, policy=policy, seed=seed, feeder=feeder, on_values=on_values
    )
