"""
Exception hierarchy shared by the simulator, the crypto suite and the KMS.
"""
from typing import Optional


class QkdSimError(Exception):
    """Base class for all simulator errors."""


class TraceError(QkdSimError):
    """A key-generation trace violates its invariants or cannot be parsed."""

    def __init__(self, message: str, row: Optional[int] = None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class TraceCoverageError(TraceError):
    """The trace ends before the requested horizon."""


class ScheduleError(QkdSimError):
    """Invalid consumption schedule."""


class EncodingError(QkdSimError):
    """Telemetry values or envelope framing cannot be encoded/decoded."""


class CipherError(QkdSimError):
    """Base class for encryption backend failures."""


class KeySizeError(CipherError):
    """Key, IV or nonce has the wrong size for the selected cipher."""


class IntegrityError(CipherError):
    """Authentication, padding or HMAC verification failed."""


class KmsError(QkdSimError):
    """Key-management error carrying the HTTP status and wire code it maps to."""

    status_code = 500
    error_code = "kms_error"

    def __init__(self, message: str, status_code: Optional[int] = None):
        super().__init__(message)
        if status_code is not None:
            self.status_code = status_code


class MalformedRequestError(KmsError):
    status_code = 400
    error_code = "malformed_request"


class UnknownKeyIdError(KmsError):
    status_code = 404
    error_code = "unknown_key_id"


class KeyAlreadyConsumedError(KmsError):
    status_code = 409
    error_code = "key_already_consumed"


class PoolExhaustedError(KmsError):
    """The pool cannot cover the request; nothing was debited."""

    status_code = 503
    error_code = "pool_exhausted"


class PeerSyncError(KmsError):
    """The peer server did not acknowledge a forwarded key."""

    status_code = 503
    error_code = "peer_sync"
