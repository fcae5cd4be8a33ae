"""
Key management service bridging the HTTP layer and the key store
"""
import base64
import binascii
import logging
import uuid
from collections import Counter
from typing import Any, Dict, List

from src.core.exceptions import KmsError, MalformedRequestError, UnknownKeyIdError
from src.kms import KeyBlock, KeyStore, Role
from ..models.kms_models import (
    AckResponse, CreditRequest, KeyContainer, KeyEntry, KeyIdsRequest, KeyRequest,
    LedgerResponse, PeerBlockResponse, PeerConsumedRequest, PeerForwardRequest, StatusResponse
)

logger = logging.getLogger(__name__)


def parse_key_id(raw: str) -> uuid.UUID:
    try:
        return uuid.UUID(raw)
    except (ValueError, AttributeError, TypeError):
        raise MalformedRequestError(f"invalid key ID {raw!r}")


def _to_container(blocks: List[KeyBlock]) -> KeyContainer:
    return KeyContainer(
        keys=[
            KeyEntry(key_ID=str(block.key_id), key=base64.b64encode(block.key_bytes).decode("ascii"))
            for block in blocks
        ]
    )


class KmsService:
    """Service for key delivery on one server of the pair"""

    def __init__(self, storage: Dict[str, Any], config: Any):
        """Initialize the service with the shared app state"""
        self.storage = storage
        self.config = config
        store = storage.get("store")
        if store is None:
            raise KmsError("key store is not initialised", status_code=503)
        self.store: KeyStore = store

    def _check_sae(self, sae_id: str):
        if sae_id != self.config.sae_id:
            raise MalformedRequestError(f"unknown SAE ID {sae_id!r}, this server serves {self.config.sae_id!r}")

    def enc_keys(self, sae_id: str, request: KeyRequest) -> KeyContainer:
        self._check_sae(sae_id)
        if request.size > self.config.max_key_size:
            raise MalformedRequestError(f"key size {request.size} exceeds {self.config.max_key_size} bits")
        blocks = self.store.enc_keys(request.size, request.number)
        logger.debug(f"enc_keys for {sae_id}: {len(blocks)} x {request.size} bits")
        return _to_container(blocks)

    def dec_keys(self, sae_id: str, request: KeyIdsRequest) -> KeyContainer:
        self._check_sae(sae_id)
        key_ids = [parse_key_id(entry.key_ID) for entry in request.key_IDs]
        blocks = self.store.dec_keys(key_ids)
        logger.debug(f"dec_keys for {sae_id}: {len(blocks)} key(s)")
        return _to_container(blocks)

    def status(self, sae_id: str) -> StatusResponse:
        self._check_sae(sae_id)
        status = self.store.status()
        local, remote = ("A", "B") if self.store.role is Role.A else ("B", "A")
        return StatusResponse(
            source_KME_ID=f"kme-{local}",
            target_KME_ID=f"kme-{remote}",
            master_SAE_ID=sae_id,
            slave_SAE_ID=sae_id,
            key_size=256,
            stored_key_count=status["available_bits"] // 256,
            max_key_size=self.config.max_key_size,
            min_key_size=self.config.min_key_size,
            available_bits=status["available_bits"],
            served_count=status["served_count"],
            retired_count=status["retired_count"],
            failed=status["failed"],
        )

    def credit(self, request: CreditRequest) -> AckResponse:
        accepted = self.store.credit(request.bits)
        return AckResponse(status="ok" if accepted else "dropped",
                           detail=f"{self.store.available_bits} bits available")

    def inject_failure(self) -> AckResponse:
        self.store.inject_failure()
        return AckResponse(detail="key generation failed")

    def restore(self) -> AckResponse:
        self.store.restore()
        return AckResponse(detail="key generation restored")

    def ledger(self) -> LedgerResponse:
        state = self.store.ledger_state()
        states = Counter(block["state"] for block in state["blocks"].values())
        if state["retired"]:
            states["RETIRED"] += len(state["retired"])
        return LedgerResponse(
            role=self.store.role.value,
            available_bits=state["available_bits"],
            credited_bits=state["credited_bits"],
            debited_bits=state["debited_bits"],
            dropped_bits=self.store.dropped_bits,
            failed=state["failed"],
            offset=state["offset"],
            conserved=self.store.check_conservation(),
            block_states=dict(states),
        )

    def accept_forward(self, request: PeerForwardRequest) -> AckResponse:
        try:
            key_bytes = base64.b64decode(request.key, validate=True)
        except (binascii.Error, ValueError):
            raise MalformedRequestError("key material is not valid base64")
        self.store.accept_forward(parse_key_id(request.key_ID), key_bytes, request.size)
        return AckResponse(detail=f"key {request.key_ID} mirrored")

    def peer_block(self, key_id: str) -> PeerBlockResponse:
        block = self.store.block(parse_key_id(key_id))
        if block is None:
            raise UnknownKeyIdError(f"unknown key ID {key_id}")
        return PeerBlockResponse(key_ID=key_id, state=block.state.value)

    def mark_consumed(self, request: PeerConsumedRequest) -> AckResponse:
        self.store.mark_consumed(parse_key_id(request.key_ID))
        return AckResponse(detail=f"key {request.key_ID} retired")
