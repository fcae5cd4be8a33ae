"""
Key-delivery clients used by the telemetry terminals.
"""
import base64
import logging
import os
import time
import uuid
from typing import Any, Dict, NamedTuple, Optional

import httpx

from ..core.exceptions import (
    KeyAlreadyConsumedError,
    KmsError,
    MalformedRequestError,
    PeerSyncError,
    PoolExhaustedError,
    UnknownKeyIdError,
)
from .key_store import KeyStore

logger = logging.getLogger(__name__)

DEFAULT_SAE_ID = "telemetry"

_TYPED_ERRORS = {
    400: MalformedRequestError,
    404: UnknownKeyIdError,
    409: KeyAlreadyConsumedError,
    503: PoolExhaustedError,
}

# 503 is shared by an empty pool and an unreachable peer; the body code tells them apart
_CODED_ERRORS = {
    cls.error_code: cls
    for cls in (MalformedRequestError, UnknownKeyIdError, KeyAlreadyConsumedError, PoolExhaustedError, PeerSyncError)
}


class KmsClientError(KmsError):
    """A key-management request failed on the wire or at the server."""


class DeliveredKey(NamedTuple):
    key_id: uuid.UUID
    key_bytes: bytes


class KmsClient:
    """HTTP client for the ETSI 014-style key-delivery endpoints."""

    def __init__(
        self,
        base_url: Optional[str] = None,
        sae_id: str = DEFAULT_SAE_ID,
        timeout: float = 10.0,
        client: Optional[httpx.Client] = None,
        retries: int = 3,
        backoff_s: float = 0.05,
    ):
        self.base_url = (base_url if base_url is not None else os.getenv("KMS_URL", "http://localhost:8100")).rstrip("/")
        self.sae_id = sae_id
        self.timeout = timeout
        self.retries = retries
        self.backoff_s = backoff_s
        self.headers = {"Content-Type": "application/json", "Accept": "application/json"}
        self._client = client

    def _make_request(self, method: str, endpoint: str, **kwargs) -> Dict[str, Any]:
        url = f"{self.base_url}{endpoint}"
        try:
            if self._client is not None:
                response = self._client.request(method=method, url=url, headers=self.headers, **kwargs)
            else:
                with httpx.Client(timeout=self.timeout) as client:
                    response = client.request(method=method, url=url, headers=self.headers, **kwargs)
            response.raise_for_status()
            return response.json()
        except httpx.HTTPStatusError as e:
            try:
                body = e.response.json()
            except ValueError:
                body = {}
            if not isinstance(body, dict):
                body = {}
            error_detail = body.get("message", str(e))
            status = e.response.status_code
            logger.debug(f"KMS request failed: {method} {url} - {error_detail}")
            typed = _CODED_ERRORS.get(body.get("error_code")) or _TYPED_ERRORS.get(status)
            if typed is not None:
                raise typed(f"KMS request failed: {error_detail}", status_code=status)
            raise KmsClientError(f"KMS request failed: {error_detail}", status_code=status)
        except httpx.RequestError as e:
            logger.error(f"Network error: {method} {url} - {str(e)}")
            raise KmsClientError(f"Network error: {str(e)}", status_code=503)

    @staticmethod
    def _decode(payload: Dict[str, Any]) -> DeliveredKey:
        entry = payload["keys"][0]
        return DeliveredKey(uuid.UUID(entry["key_ID"]), base64.b64decode(entry["key"]))

    def get_key(self, size_bits: int) -> DeliveredKey:
        payload = self._make_request(
            "POST", f"/api/v1/keys/{self.sae_id}/enc_keys", json={"number": 1, "size": size_bits}
        )
        return self._decode(payload)

    def get_key_by_id(self, key_id: uuid.UUID) -> bytes:
        """Fetch by ID, retrying while the forwarded block has not landed yet."""
        body = {"key_IDs": [{"key_ID": str(key_id)}]}
        for attempt in range(self.retries + 1):
            try:
                payload = self._make_request("POST", f"/api/v1/keys/{self.sae_id}/dec_keys", json=body)
                return self._decode(payload).key_bytes
            except UnknownKeyIdError:
                if attempt == self.retries:
                    raise
                time.sleep(self.backoff_s * (2 ** attempt))

    def status(self) -> Dict[str, Any]:
        return self._make_request("GET", f"/api/v1/keys/{self.sae_id}/status")


class LocalKmsClient:
    """Same surface as KmsClient, calling a key store directly."""

    def __init__(self, store: KeyStore):
        self.store = store

    def get_key(self, size_bits: int) -> DeliveredKey:
        block = self.store.enc_keys(size_bits)[0]
        return DeliveredKey(block.key_id, block.key_bytes)

    def get_key_by_id(self, key_id: uuid.UUID) -> bytes:
        return self.store.dec_keys([key_id])[0].key_bytes

    def status(self) -> Dict[str, Any]:
        return self.store.status()
