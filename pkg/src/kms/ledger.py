"""
Key-block records and the on-disk ledger of a key-management server.

Each server keeps three files in its data directory:

    ledger.log     one ``timestamp_ns|event|key_id|bits`` line per event
    keys.log       ``key_id|hex`` lines, simulation key material only
    snapshot.json  ledger counters, live block states and retired key IDs up to a log offset

Recovery loads the snapshot and replays the ledger lines written after it.
"""
import json
import logging
import os
import threading
import uuid
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Set, Tuple, Union

logger = logging.getLogger(__name__)

LEDGER_FILE = "ledger.log"
KEYS_FILE = "keys.log"
SNAPSHOT_FILE = "snapshot.json"
KEYS_BANNER = "# SIMULATION KEY MATERIAL - generated by the QKD simulator, never use for real traffic"
NO_KEY = "-"


class KeyState(str, Enum):
    AVAILABLE = "AVAILABLE"
    SERVED_A = "SERVED_A"
    SERVED_B = "SERVED_B"
    SERVED_BOTH = "SERVED_BOTH"
    RETIRED = "RETIRED"


# monotone order; SERVED_A and SERVED_B share a rank
STATE_RANK = {
    KeyState.AVAILABLE: 0,
    KeyState.SERVED_A: 1,
    KeyState.SERVED_B: 1,
    KeyState.SERVED_BOTH: 2,
    KeyState.RETIRED: 3,
}


class LedgerEventType(str, Enum):
    CREDIT = "credit"
    SERVE_A = "serve_a"
    PEER_A = "peer_a"
    PEER_B = "peer_b"
    SERVE_B = "serve_b"
    REFUND = "refund"
    RETIRE = "retire"
    FAILURE = "failure"
    RESTORE = "restore"


@dataclass
class KeyBlock:
    """One block of QKD key material addressed by a random UUID."""

    key_id: uuid.UUID
    size_bits: int
    key_bytes: bytes = b""
    created_ns: int = 0
    state: KeyState = KeyState.AVAILABLE
    confirmed: bool = False

    def advance(self, state: KeyState):
        if STATE_RANK[state] < STATE_RANK[self.state]:
            raise ValueError(f"key {self.key_id}: cannot move from {self.state.value} to {state.value}")
        self.state = state
        if state is KeyState.RETIRED:
            self.key_bytes = b""

    def to_dict(self) -> Dict:
        return {
            "size_bits": self.size_bits,
            "created_ns": self.created_ns,
            "state": self.state.value,
            "confirmed": self.confirmed,
        }


@dataclass(frozen=True)
class LedgerEvent:
    timestamp_ns: int
    event: LedgerEventType
    key_id: Optional[uuid.UUID]
    bits: int

    def to_line(self) -> str:
        key = NO_KEY if self.key_id is None else str(self.key_id)
        return f"{self.timestamp_ns}|{self.event.value}|{key}|{self.bits}"

    @classmethod
    def from_line(cls, line: str) -> "LedgerEvent":
        timestamp, event, key, bits = line.strip().split("|")
        return cls(
            timestamp_ns=int(timestamp),
            event=LedgerEventType(event),
            key_id=None if key == NO_KEY else uuid.UUID(key),
            bits=int(bits),
        )


@dataclass
class LedgerState:
    """Counters and block index; ``available_bits = credited - debited``."""

    credited_bits: int = 0
    debited_bits: int = 0
    failed: bool = False
    offset: int = 0
    blocks: Dict[uuid.UUID, KeyBlock] = field(default_factory=dict)
    # retired blocks dropped from ``blocks`` at a snapshot; IDs only
    retired: Set[uuid.UUID] = field(default_factory=set)

    @property
    def available_bits(self) -> int:
        return self.credited_bits - self.debited_bits

    def count(self, state: KeyState) -> int:
        live = sum(1 for block in self.blocks.values() if block.state is state)
        return live + len(self.retired) if state is KeyState.RETIRED else live

    def knows(self, key_id: uuid.UUID) -> bool:
        return key_id in self.blocks or key_id in self.retired

    def prune(self) -> int:
        """Move retired blocks out of the index, keeping their IDs."""
        done = [key_id for key_id, block in self.blocks.items() if block.state is KeyState.RETIRED]
        for key_id in done:
            del self.blocks[key_id]
        self.retired.update(done)
        return len(done)

    def apply(self, event: LedgerEvent, key_bytes: Optional[bytes] = None):
        """Apply one event; the single place where ledger arithmetic happens."""
        kind = event.event
        if kind is LedgerEventType.CREDIT:
            self.credited_bits += event.bits
        elif kind is LedgerEventType.FAILURE:
            self.failed = True
        elif kind is LedgerEventType.RESTORE:
            self.failed = False
        elif kind in (LedgerEventType.SERVE_A, LedgerEventType.PEER_B):
            self.debited_bits += event.bits
            self.blocks[event.key_id] = KeyBlock(
                key_id=event.key_id,
                size_bits=event.bits,
                key_bytes=key_bytes or b"",
                created_ns=event.timestamp_ns,
                state=KeyState.SERVED_A,
                confirmed=kind is LedgerEventType.PEER_B,
            )
        elif kind is LedgerEventType.PEER_A:
            self.blocks[event.key_id].confirmed = True
        elif kind is LedgerEventType.SERVE_B:
            self.blocks[event.key_id].advance(KeyState.SERVED_BOTH)
        elif kind is LedgerEventType.REFUND:
            self.debited_bits -= event.bits
        elif kind is LedgerEventType.RETIRE:
            self.blocks[event.key_id].advance(KeyState.RETIRED)
        self.offset += 1

    def to_dict(self) -> Dict:
        """Same output whether or not retired blocks have been pruned yet."""
        retired = set(self.retired)
        blocks = {}
        for key_id, block in self.blocks.items():
            if block.state is KeyState.RETIRED:
                retired.add(key_id)
            else:
                blocks[str(key_id)] = block.to_dict()
        return {
            "offset": self.offset,
            "credited_bits": self.credited_bits,
            "debited_bits": self.debited_bits,
            "failed": self.failed,
            "blocks": blocks,
            "retired": sorted(str(key_id) for key_id in retired),
        }

    @classmethod
    def from_dict(cls, data: Dict, key_material: Dict[uuid.UUID, bytes]) -> "LedgerState":
        blocks = {}
        for key, raw in data.get("blocks", {}).items():
            key_id = uuid.UUID(key)
            state = KeyState(raw["state"])
            blocks[key_id] = KeyBlock(
                key_id=key_id,
                size_bits=raw["size_bits"],
                key_bytes=b"" if state is KeyState.RETIRED else key_material.get(key_id, b""),
                created_ns=raw["created_ns"],
                state=state,
                confirmed=raw["confirmed"],
            )
        return cls(
            credited_bits=data["credited_bits"],
            debited_bits=data["debited_bits"],
            failed=data["failed"],
            offset=data["offset"],
            blocks=blocks,
            retired={uuid.UUID(key) for key in data.get("retired", [])},
        )


class LedgerLog:
    """Append-only persistence for one server's ledger."""

    def __init__(self, data_dir: Union[str, Path]):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.ledger_path = self.data_dir / LEDGER_FILE
        self.keys_path = self.data_dir / KEYS_FILE
        self.snapshot_path = self.data_dir / SNAPSHOT_FILE
        self._lock = threading.Lock()
        if not self.keys_path.exists():
            self.keys_path.write_text(KEYS_BANNER + "\n")
        self._ledger = open(self.ledger_path, "a", encoding="utf-8")
        self._keys = open(self.keys_path, "a", encoding="utf-8")

    def append(self, event: LedgerEvent, key_bytes: Optional[bytes] = None):
        with self._lock:
            if key_bytes is not None:
                self._keys.write(f"{event.key_id}|{key_bytes.hex()}\n")
                self._keys.flush()
            self._ledger.write(event.to_line() + "\n")
            self._ledger.flush()

    def write_snapshot(self, state: LedgerState):
        tmp_path = self.snapshot_path.with_suffix(".tmp")
        tmp_path.write_text(json.dumps(state.to_dict(), sort_keys=True))
        os.replace(tmp_path, self.snapshot_path)
        logger.info(f"Snapshot written to {self.snapshot_path} at offset {state.offset}")

    def read_key_material(self) -> Dict[uuid.UUID, bytes]:
        material = {}
        if not self.keys_path.exists():
            return material
        for line in self.keys_path.read_text().splitlines():
            if not line or line.startswith("#"):
                continue
            key, hex_bytes = line.split("|")
            material[uuid.UUID(key)] = bytes.fromhex(hex_bytes)
        return material

    def events(self) -> Iterator[LedgerEvent]:
        if not self.ledger_path.exists():
            return
        with open(self.ledger_path, encoding="utf-8") as handle:
            for line in handle:
                if line.strip():
                    yield LedgerEvent.from_line(line)

    def recover(self) -> Tuple[LedgerState, List[LedgerEvent]]:
        """Snapshot plus replay of the log tail; returns the state and the replayed events."""
        material = self.read_key_material()
        if self.snapshot_path.exists():
            state = LedgerState.from_dict(json.loads(self.snapshot_path.read_text()), material)
        else:
            state = LedgerState()
        replayed = []
        for index, event in enumerate(self.events()):
            if index < state.offset:
                continue
            state.apply(event, material.get(event.key_id) if event.key_id else None)
            replayed.append(event)
        logger.info(
            f"Recovered ledger from {self.data_dir}: {state.offset} events "
            f"({len(replayed)} replayed), {state.available_bits} bits available"
        )
        return state, replayed

    def close(self):
        with self._lock:
            self._ledger.close()
            self._keys.close()
