"""
Pydantic models for key delivery, peer synchronization and admin requests
"""
from datetime import datetime
from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class KeyRequest(BaseModel):
    """Request body of enc_keys"""
    number: int = Field(1, ge=1, description="Number of keys requested")
    size: int = Field(..., description="Size of each key in bits")


class KeyIdEntry(BaseModel):
    key_ID: str = Field(..., description="UUID of a previously served key")


class KeyIdsRequest(BaseModel):
    """Request body of dec_keys"""
    key_IDs: List[KeyIdEntry] = Field(..., description="Keys to deliver")


class KeyEntry(BaseModel):
    key_ID: str
    key: str = Field(..., description="Base64-encoded key material")


class KeyContainer(BaseModel):
    """Keys delivered by enc_keys or dec_keys"""
    keys: List[KeyEntry]


class StatusResponse(BaseModel):
    """Pool status for a secure application entity"""
    source_KME_ID: str
    target_KME_ID: str
    master_SAE_ID: str
    slave_SAE_ID: str
    key_size: int
    stored_key_count: int
    max_key_per_request: int = 1
    max_key_size: int
    min_key_size: int
    available_bits: int
    served_count: int
    retired_count: int
    failed: bool
    timestamp: datetime = Field(default_factory=datetime.utcnow)


class CreditRequest(BaseModel):
    bits: int = Field(..., ge=0, description="Distilled key bits to add to the pool")


class LedgerResponse(BaseModel):
    """Ledger counters and block states"""
    role: str
    available_bits: int
    credited_bits: int
    debited_bits: int
    dropped_bits: int
    failed: bool
    offset: int
    conserved: bool
    block_states: Dict[str, int] = Field(default_factory=dict)


class PeerForwardRequest(BaseModel):
    """Key block forwarded from the A-side server"""
    key_ID: str
    key: str = Field(..., description="Base64-encoded key material")
    size: int


class PeerConsumedRequest(BaseModel):
    """Notice that the B-side server delivered a key"""
    key_ID: str


class PeerBlockResponse(BaseModel):
    """State of one key block on this server"""
    key_ID: str
    state: str


class AckResponse(BaseModel):
    status: str = "ok"
    detail: Optional[str] = None
    timestamp: datetime = Field(default_factory=datetime.utcnow)
