"""
Links between the two servers of a key-management pair.
"""
import base64
import logging
import time
import uuid
from typing import Optional

import httpx

from ..core.exceptions import KmsError, PeerSyncError
from .ledger import KeyState

logger = logging.getLogger(__name__)

FORWARD_PATH = "/api/v1/peer/forward"
CONSUMED_PATH = "/api/v1/peer/consumed"
BLOCKS_PATH = "/api/v1/peer/blocks"


class LocalPeerLink:
    """In-process link to the peer's key store."""

    def __init__(self, store):
        self.store = store

    def forward(self, key_id: uuid.UUID, key_bytes: bytes, size_bits: int) -> None:
        self.store.accept_forward(key_id, key_bytes, size_bits)

    def consumed(self, key_id: uuid.UUID) -> None:
        self.store.mark_consumed(key_id)

    def block_state(self, key_id: uuid.UUID) -> Optional[KeyState]:
        block = self.store.block(key_id)
        return None if block is None else block.state


class HttpPeerLink:
    """Peer link over the peer endpoints of the key-management API.

    Transport failures are retried ``retries`` times with exponential
    backoff before the request is given up as a PeerSyncError.
    """

    def __init__(
        self,
        base_url: str,
        client: Optional[httpx.Client] = None,
        timeout: float = 10.0,
        retries: int = 0,
        backoff_s: float = 0.05,
    ):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self.backoff_s = backoff_s
        self._client = client

    def _send(self, method: str, url: str, payload: Optional[dict]) -> httpx.Response:
        if self._client is not None:
            return self._client.request(method, url, json=payload)
        with httpx.Client(timeout=self.timeout) as client:
            return client.request(method, url, json=payload)

    def _request(self, method: str, endpoint: str, payload: Optional[dict] = None) -> dict:
        url = f"{self.base_url}{endpoint}"
        for attempt in range(self.retries + 1):
            try:
                response = self._send(method, url, payload)
                response.raise_for_status()
                return response.json()
            except httpx.HTTPStatusError as e:
                # a retried request the peer already applied
                if attempt > 0 and e.response.status_code == 409:
                    logger.info(f"Peer already applied {method} {url} after retry {attempt}")
                    return {}
                try:
                    detail = e.response.json().get("message", str(e))
                except ValueError:
                    detail = str(e)
                if e.response.status_code == 404:
                    logger.debug(f"Peer request found nothing: {method} {url} - {detail}")
                else:
                    logger.error(f"Peer request failed: {method} {url} - {detail}")
                raise KmsError(f"Peer request failed: {detail}", status_code=e.response.status_code)
            except httpx.RequestError as e:
                if attempt == self.retries:
                    logger.error(f"Network error: {method} {url} - {str(e)} after {attempt + 1} attempt(s)")
                    raise PeerSyncError(f"Network error: {str(e)}")
                logger.warning(f"Network error: {method} {url} - {str(e)}; retry {attempt + 1} of {self.retries}")
                time.sleep(self.backoff_s * (2 ** attempt))

    def forward(self, key_id: uuid.UUID, key_bytes: bytes, size_bits: int) -> None:
        self._request(
            "POST",
            FORWARD_PATH,
            {"key_ID": str(key_id), "key": base64.b64encode(key_bytes).decode("ascii"), "size": size_bits},
        )

    def consumed(self, key_id: uuid.UUID) -> None:
        self._request("POST", CONSUMED_PATH, {"key_ID": str(key_id)})

    def block_state(self, key_id: uuid.UUID) -> Optional[KeyState]:
        """State of a block on the peer, None when the peer never received it."""
        try:
            payload = self._request("GET", f"{BLOCKS_PATH}/{key_id}")
        except KmsError as e:
            if e.status_code == 404:
                return None
            raise
        return KeyState(payload["state"])
