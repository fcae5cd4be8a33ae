"""
Link harness: telemetry terminals, authenticated transport and latency-instrumented loop.
"""

from .loop import (
    CSV_COLUMNS,
    CycleViolation,
    ExhaustionPolicy,
    RunReport,
    run_in_process,
    run_loop,
    run_sender,
    serve_receiver,
)
from .telemetry import TelemetryFrame, TelemetrySource, generate_telemetry
from .terminals import ReceiverTerminal, SenderTerminal, decode_ack, encode_ack
from .timing import StageMeasurement, StageTimer, measure_stage
from .transport import DEFAULT_AUTH_KEY, FramedConnection, accept, connect, encode_frame, loopback_pair

__all__ = [
    'CSV_COLUMNS',
    'CycleViolation',
    'DEFAULT_AUTH_KEY',
    'ExhaustionPolicy',
    'FramedConnection',
    'ReceiverTerminal',
    'RunReport',
    'SenderTerminal',
    'StageMeasurement',
    'StageTimer',
    'TelemetryFrame',
    'TelemetrySource',
    'accept',
    'connect',
    'decode_ack',
    'encode_ack',
    'encode_frame',
    'generate_telemetry',
    'loopback_pair',
    'measure_stage',
    'run_in_process',
    'run_loop',
    'run_sender',
    'serve_receiver',
]
