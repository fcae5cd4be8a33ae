"""
Key store of one key-management server.

The A-side server answers ``enc_keys`` requests and forwards every block to
its B-side peer before confirming it; the B-side server answers ``dec_keys``
by key ID and tells A when a block has been consumed. After a restart A asks
B about serves it logged but never saw acknowledged before refunding any.
"""
import logging
import threading
import time
import uuid
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Protocol, Union

from Crypto.Random import get_random_bytes

from ..core.exceptions import (
    KeyAlreadyConsumedError,
    KmsError,
    MalformedRequestError,
    PeerSyncError,
    PoolExhaustedError,
    UnknownKeyIdError,
)
from .ledger import KeyBlock, KeyState, LedgerEvent, LedgerEventType, LedgerLog, LedgerState

logger = logging.getLogger(__name__)

DEFAULT_SNAPSHOT_INTERVAL = 1000


class Role(str, Enum):
    A = "A"
    B = "B"


class PeerLink(Protocol):
    def forward(self, key_id: uuid.UUID, key_bytes: bytes, size_bits: int) -> None:
        ...

    def consumed(self, key_id: uuid.UUID) -> None:
        ...

    def block_state(self, key_id: uuid.UUID) -> Optional[KeyState]:
        ...


class KeyStore:
    """Pool ledger plus key-block index, serialized behind one lock."""

    def __init__(
        self,
        role: Union[Role, str],
        peer: Optional[PeerLink] = None,
        data_dir: Optional[Union[str, Path]] = None,
        snapshot_interval: int = DEFAULT_SNAPSHOT_INTERVAL,
        clock: Callable[[], int] = time.time_ns,
    ):
        self.role = Role(role)
        self.peer = peer
        self.snapshot_interval = snapshot_interval
        self.clock = clock
        self.dropped_bits = 0
        self._lock = threading.RLock()
        # keeps reserve -> forward -> confirm in serve order
        self._serve_lock = threading.Lock()
        self._log = LedgerLog(data_dir) if data_dir is not None else None
        self._since_snapshot = 0
        self._unsettled = 0
        if self._log is not None:
            self._state, _ = self._log.recover()
            self._settle()
        else:
            self._state = LedgerState()
        logger.info(f"Key store {self.role.value} ready with {self.available_bits} bits available")

    # ledger views

    @property
    def available_bits(self) -> int:
        with self._lock:
            return self._state.available_bits

    @property
    def credited_bits(self) -> int:
        return self._state.credited_bits

    @property
    def debited_bits(self) -> int:
        return self._state.debited_bits

    @property
    def failed(self) -> bool:
        return self._state.failed

    def block(self, key_id: uuid.UUID) -> Optional[KeyBlock]:
        block = self._state.blocks.get(key_id)
        if block is None and key_id in self._state.retired:
            # pruned at a snapshot; only the ID survives
            return KeyBlock(key_id, 0, state=KeyState.RETIRED, confirmed=True)
        return block

    @property
    def unsettled_count(self) -> int:
        """Recovered serves still waiting for the peer's answer."""
        return self._unsettled

    def check_conservation(self) -> bool:
        with self._lock:
            state = self._state
            return state.available_bits == state.credited_bits - state.debited_bits and state.available_bits >= 0

    def ledger_state(self) -> Dict:
        """Counters and block states, comparable across restarts."""
        with self._lock:
            data = self._state.to_dict()
            data["available_bits"] = self._state.available_bits
            return data

    def status(self) -> Dict:
        with self._lock:
            state = self._state
            return {
                "role": self.role.value,
                "available_bits": state.available_bits,
                "credited_bits": state.credited_bits,
                "debited_bits": state.debited_bits,
                "served_count": len(state.blocks) + len(state.retired),
                "retired_count": state.count(KeyState.RETIRED),
                "failed": state.failed,
            }

    # mutations

    def _record(self, kind: LedgerEventType, key_id: Optional[uuid.UUID] = None, bits: int = 0,
                key_bytes: Optional[bytes] = None) -> LedgerEvent:
        event = LedgerEvent(self.clock(), kind, key_id, bits)
        self._state.apply(event, key_bytes)
        if self._log is not None:
            self._log.append(event, key_bytes)
            self._since_snapshot += 1
            if self.snapshot_interval and self._since_snapshot >= self.snapshot_interval:
                self.snapshot()
        return event

    def credit(self, bits: int) -> bool:
        """Add distilled key to the pool; dropped while key generation is failed."""
        if bits < 0:
            raise MalformedRequestError(f"cannot credit {bits} bits")
        with self._lock:
            if self._state.failed:
                self.dropped_bits += bits
                logger.debug(f"Key store {self.role.value} failed, dropped credit of {bits} bits")
                return False
            if bits:
                self._record(LedgerEventType.CREDIT, bits=bits)
            return True

    def inject_failure(self):
        with self._lock:
            if not self._state.failed:
                self._record(LedgerEventType.FAILURE)
                logger.info(f"Key generation failure injected on {self.role.value} "
                            f"({self._state.available_bits} bits in reserve)")

    def restore(self):
        with self._lock:
            if self._state.failed:
                self._record(LedgerEventType.RESTORE)
                logger.info(f"Key generation restored on {self.role.value}")

    def _require_role(self, role: Role, operation: str):
        if self.role is not role:
            raise MalformedRequestError(f"{operation} is served by the {role.value}-side server")

    @staticmethod
    def _check_size(size_bits: int):
        if size_bits <= 0 or size_bits % 8:
            raise MalformedRequestError(f"key size must be a positive multiple of 8 bits, got {size_bits}")

    def enc_keys(self, size_bits: int, number: int = 1) -> List[KeyBlock]:
        """Serve ``number`` fresh blocks; all or nothing."""
        self._require_role(Role.A, "enc_keys")
        self._check_size(size_bits)
        if number < 1:
            raise MalformedRequestError(f"number of keys must be positive, got {number}")
        with self._serve_lock:
            if self._unsettled:
                self._settle()
            with self._lock:
                needed = size_bits * number
                if needed > self._state.available_bits:
                    logger.warning(
                        f"Pool exhausted: {needed} bits requested, {self._state.available_bits} available"
                    )
                    raise PoolExhaustedError(
                        f"requested {needed} bits, only {self._state.available_bits} available"
                    )
                reserved = []
                for _ in range(number):
                    key_id = uuid.uuid4()
                    key_bytes = get_random_bytes(size_bits // 8)
                    event = self._record(LedgerEventType.SERVE_A, key_id, size_bits, key_bytes)
                    reserved.append(KeyBlock(key_id, size_bits, key_bytes, event.timestamp_ns, KeyState.SERVED_A))

            confirmed = []
            for index, block in enumerate(reserved):
                try:
                    if self.peer is not None:
                        self.peer.forward(block.key_id, block.key_bytes, block.size_bits)
                except KmsError as e:
                    self._refund(reserved[index:])
                    raise PeerSyncError(f"peer did not acknowledge key {block.key_id}: {e}") from e
                with self._lock:
                    self._record(LedgerEventType.PEER_A, block.key_id, block.size_bits)
                block.confirmed = True
                confirmed.append(block)
        logger.debug(f"Served {number} key(s) of {size_bits} bits, {self.available_bits} bits left")
        return confirmed

    def _refund(self, blocks: Iterable[KeyBlock]):
        with self._lock:
            for block in blocks:
                self._record(LedgerEventType.REFUND, block.key_id, block.size_bits)
                self._record(LedgerEventType.RETIRE, block.key_id, block.size_bits)
                logger.warning(f"Refunded unconfirmed key {block.key_id} ({block.size_bits} bits)")

    def reconcile(self) -> int:
        """Settle serves a crash left unacknowledged; returns how many stay open."""
        with self._serve_lock:
            return self._settle()

    def _settle(self) -> int:
        """A side: ask the peer about every recovered, unacknowledged serve.

        Blocks the peer mirrored are confirmed, and retired as well when the
        peer already delivered them; blocks it never received are refunded.
        Without a peer all of them are refunded. While the peer is
        unreachable the rest stay debited until the next attempt.
        """
        if self.role is not Role.A:
            return 0
        with self._lock:
            pending = [b for b in self._state.blocks.values() if b.state is KeyState.SERVED_A and not b.confirmed]
        if self.peer is None:
            self._refund(pending)
            pending = []
        for index, block in enumerate(pending):
            try:
                mirrored = self.peer.block_state(block.key_id)
            except KmsError as e:
                self._unsettled = len(pending) - index
                logger.warning(f"Peer unreachable, {self._unsettled} recovered key(s) left unsettled: {e}")
                return self._unsettled
            if mirrored is None:
                self._refund([block])
                continue
            with self._lock:
                self._record(LedgerEventType.PEER_A, block.key_id, block.size_bits)
                if mirrored in (KeyState.SERVED_BOTH, KeyState.RETIRED):
                    self._record(LedgerEventType.SERVE_B, block.key_id, block.size_bits)
                    self._record(LedgerEventType.RETIRE, block.key_id, block.size_bits)
            logger.info(f"Peer holds recovered key {block.key_id} ({mirrored.value}), kept as served")
        self._unsettled = 0
        return 0

    def accept_forward(self, key_id: uuid.UUID, key_bytes: bytes, size_bits: int):
        """B side: take over a block served by A, debiting the local pool."""
        self._require_role(Role.B, "peer forward")
        if len(key_bytes) * 8 != size_bits:
            raise MalformedRequestError(f"key {key_id}: {len(key_bytes)} bytes do not match {size_bits} bits")
        with self._lock:
            if self._state.knows(key_id):
                raise KeyAlreadyConsumedError(f"key {key_id} was already forwarded")
            if size_bits > self._state.available_bits:
                raise PoolExhaustedError(
                    f"peer pool holds {self._state.available_bits} bits, cannot mirror {size_bits}"
                )
            self._record(LedgerEventType.PEER_B, key_id, size_bits, key_bytes)

    def dec_keys(self, key_ids: Iterable[uuid.UUID]) -> List[KeyBlock]:
        """B side: deliver blocks by ID exactly once, then retire them."""
        self._require_role(Role.B, "dec_keys")
        key_ids = list(key_ids)
        if not key_ids:
            raise MalformedRequestError("no key IDs given")
        with self._lock:
            for key_id in key_ids:
                block = self.block(key_id)
                if block is None:
                    raise UnknownKeyIdError(f"unknown key ID {key_id}")
                if block.state is not KeyState.SERVED_A:
                    raise KeyAlreadyConsumedError(f"key {key_id} was already delivered")
            if len(set(key_ids)) != len(key_ids):
                raise KeyAlreadyConsumedError("duplicate key IDs in one request")
            delivered = []
            for key_id in key_ids:
                block = self._state.blocks[key_id]
                delivered.append(KeyBlock(key_id, block.size_bits, block.key_bytes, block.created_ns,
                                          KeyState.SERVED_BOTH, True))
                self._record(LedgerEventType.SERVE_B, key_id, block.size_bits)
                self._record(LedgerEventType.RETIRE, key_id, block.size_bits)
        for key_id in key_ids:
            self._notify_consumed(key_id)
        return delivered

    def _notify_consumed(self, key_id: uuid.UUID):
        if self.peer is None:
            return
        try:
            self.peer.consumed(key_id)
        except KmsError as e:
            logger.warning(f"Peer was not told that key {key_id} was consumed: {e}")

    def mark_consumed(self, key_id: uuid.UUID):
        """A side: the peer delivered this block, retire the local copy."""
        self._require_role(Role.A, "consumption notice")
        with self._lock:
            block = self.block(key_id)
            if block is None:
                raise UnknownKeyIdError(f"unknown key ID {key_id}")
            if block.state is KeyState.RETIRED:
                return
            self._record(LedgerEventType.SERVE_B, key_id, block.size_bits)
            self._record(LedgerEventType.RETIRE, key_id, block.size_bits)

    # persistence

    def snapshot(self):
        if self._log is None:
            return
        with self._lock:
            pruned = self._state.prune()
            if pruned:
                logger.debug(f"Pruned {pruned} retired block(s) from key store {self.role.value}")
            self._log.write_snapshot(self._state)
            self._since_snapshot = 0

    def close(self):
        if self._log is None:
            return
        self.snapshot()
        self._log.close()
        logger.info(f"Key store {self.role.value} closed at offset {self._state.offset}")
