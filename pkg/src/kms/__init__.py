"""
Paired key-management servers with ETSI 014-style key delivery.
"""

from .client import DeliveredKey, KmsClient, KmsClientError, LocalKmsClient
from .key_store import KeyStore, PeerLink, Role
from .ledger import KeyBlock, KeyState, LedgerEvent, LedgerEventType, LedgerLog, LedgerState
from .pair import KmsPair, ReplayResult, TraceFeeder, replay_schedule
from .peer import HttpPeerLink, LocalPeerLink

__all__ = [
    'DeliveredKey',
    'HttpPeerLink',
    'KeyBlock',
    'KeyState',
    'KeyStore',
    'KmsClient',
    'KmsClientError',
    'KmsPair',
    'LedgerEvent',
    'LedgerEventType',
    'LedgerLog',
    'LedgerState',
    'LocalKmsClient',
    'LocalPeerLink',
    'PeerLink',
    'ReplayResult',
    'Role',
    'TraceFeeder',
    'replay_schedule',
]
