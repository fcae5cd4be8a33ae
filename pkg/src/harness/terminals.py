"""
Sender and receiver terminals of the secure telemetry link.

The sender fetches a reporting batch, draws key material from its KMS,
encrypts and transmits. The receiver fetches the same key by ID, decrypts
and hands the decoded values on.
"""
import hashlib
import logging
import queue
import struct
import threading
import time
import uuid
from dataclasses import dataclass
from typing import Callable, Optional, Protocol, Tuple, Union

import numpy as np

from ..comm.use_case import UseCaseConfig
from ..core.exceptions import EncodingError
from ..crypto.codec import decode_signals, encode_signals
from ..crypto.envelope import open_envelope, pack_envelope, seal, unpack_envelope
from ..crypto.specs import CIPHER_SPECS, key_material_bits
from ..kms.client import DeliveredKey
from .telemetry import TelemetrySource
from .timing import Clock, StageTimer
from .transport import FramedConnection

logger = logging.getLogger(__name__)


class KeySource(Protocol):
    def get_key(self, size_bits: int) -> DeliveredKey: ...

    def get_key_by_id(self, key_id: uuid.UUID) -> bytes: ...


@dataclass
class SentFrame:
    cycle: int
    key_id: uuid.UUID
    digest: bytes
    tx_start_ns: int


@dataclass
class ReceivedFrame:
    key_id: uuid.UUID
    digest: bytes
    values: np.ndarray
    rx_done_ns: int
    key_b_ns: int
    dec_b_ns: int
    action_b_ns: int


# key ID, plaintext digest, then key_b, dec_b, action_b and busy time in ns
ACK = struct.Struct(">16s32sQQQQ")


def encode_ack(frame: ReceivedFrame, busy_ns: int) -> bytes:
    """Receiver-to-sender acknowledgement of one handled frame."""
    return ACK.pack(frame.key_id.bytes, frame.digest, frame.key_b_ns, frame.dec_b_ns, frame.action_b_ns, busy_ns)


def decode_ack(payload: bytes, rx_done_ns: int) -> Tuple[ReceivedFrame, int]:
    """Parse an acknowledgement; ``rx_done_ns`` is its arrival on the sender's clock."""
    if len(payload) != ACK.size:
        raise EncodingError(f"acknowledgement of {len(payload)} bytes, expected {ACK.size}")
    key_id, digest, key_b_ns, dec_b_ns, action_b_ns, busy_ns = ACK.unpack(payload)
    frame = ReceivedFrame(
        key_id=uuid.UUID(bytes=key_id),
        digest=digest,
        values=np.empty(0),
        rx_done_ns=rx_done_ns,
        key_b_ns=key_b_ns,
        dec_b_ns=dec_b_ns,
        action_b_ns=action_b_ns,
    )
    return frame, busy_ns


class SenderTerminal:
    """Terminal A: fetch, key request, encrypt, transmit."""

    def __init__(
        self,
        cfg: UseCaseConfig,
        kms: KeySource,
        connection: FramedConnection,
        source: TelemetrySource,
    ):
        self.cfg = cfg
        self.kms = kms
        self.connection = connection
        self.source = source
        self.spec = CIPHER_SPECS[cfg.algorithm]

    def fetch(self) -> np.ndarray:
        """One reporting batch: kappa frames laid end to end."""
        frames = [self.source.next_frame().values for _ in range(self.cfg.kappa)]
        return np.concatenate(frames) if frames else np.empty(0)

    def run_cycle(self, cycle: int, timer: StageTimer) -> SentFrame:
        """Run the sender stages; PoolExhaustedError leaves nothing sent."""
        values = timer.measure("fetch_a", self.fetch)
        plaintext_len = values.size * self.cfg.precision_bits // 8
        delivered = timer.measure("key_a", lambda: self.kms.get_key(key_material_bits(self.spec, plaintext_len)))
        with timer.stage("enc_a"):
            plaintext = encode_signals(values, self.cfg.precision_bits)
            wire = pack_envelope(seal(self.cfg.algorithm, plaintext, delivered.key_bytes, delivered.key_id))
        tx_start = timer.clock()
        self.connection.send(wire)
        return SentFrame(cycle, delivered.key_id, hashlib.sha256(plaintext).digest(), tx_start)


class ReceiverTerminal:
    """Terminal B: receive, key by ID, decrypt, act.

    Runs on its own thread and reports each frame through ``results``;
    a failure is reported as the exception object and stops the terminal.
    """

    def __init__(
        self,
        cfg: UseCaseConfig,
        kms: KeySource,
        connection: FramedConnection,
        clock: Clock = time.perf_counter_ns,
        on_values: Optional[Callable[[np.ndarray], None]] = None,
    ):
        self.cfg = cfg
        self.kms = kms
        self.connection = connection
        self.clock = clock
        self.on_values = on_values
        self.results: "queue.Queue[Union[ReceivedFrame, BaseException]]" = queue.Queue()
        self._thread: Optional[threading.Thread] = None

    def handle(self, wire: bytes, rx_done_ns: int) -> ReceivedFrame:
        start = self.clock()
        envelope = unpack_envelope(wire)
        unpacked = self.clock()
        key_material = self.kms.get_key_by_id(envelope.key_id)
        key_done = self.clock()
        plaintext = open_envelope(envelope, key_material)
        dec_done = self.clock()
        values = decode_signals(plaintext, self.cfg.precision_bits)
        if self.on_values is not None:
            self.on_values(values)
        action_done = self.clock()
        return ReceivedFrame(
            key_id=envelope.key_id,
            digest=hashlib.sha256(plaintext).digest(),
            values=values,
            rx_done_ns=rx_done_ns,
            key_b_ns=key_done - unpacked,
            # parsing the envelope counts as decryption
            dec_b_ns=(unpacked - start) + (dec_done - key_done),
            action_b_ns=action_done - dec_done,
        )

    def serve(self):
        try:
            while True:
                wire = self.connection.recv()
                if wire is None:
                    break
                self.results.put(self.handle(wire, self.clock()))
        except BaseException as e:
            logger.error(f"Receiver terminal stopped: {str(e)}")
            self.results.put(e)

    def start(self):
        self._thread = threading.Thread(target=self.serve, name="receiver-terminal", daemon=True)
        self._thread.start()

    def join(self, timeout: Optional[float] = None):
        if self._thread is not None:
            self._thread.join(timeout)
