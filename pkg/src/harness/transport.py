"""
Authenticated framing over a TCP byte stream between the two terminals.

Frame layout: 4-byte big-endian payload length | payload | HMAC-SHA256 over
length and payload, keyed with a pre-shared authentication key that never
comes from the QKD pool.
"""
import hashlib
import hmac
import logging
import os
import socket
import threading
import time
from typing import Optional, Tuple

from ..core.exceptions import EncodingError, IntegrityError

logger = logging.getLogger(__name__)

LENGTH_BYTES = 4
MAC_BYTES = 32
MAX_PAYLOAD_BYTES = 64 * 1024 * 1024
CONNECT_RETRY_S = 0.05
DEFAULT_AUTH_KEY = os.getenv("QKDSIM_AUTH_KEY", "qkdsim-classical-channel").encode("utf-8")


def frame_mac(auth_key: bytes, header: bytes, payload: bytes) -> bytes:
    return hmac.new(auth_key, header + payload, hashlib.sha256).digest()


def encode_frame(payload: bytes, auth_key: bytes) -> bytes:
    if len(payload) > MAX_PAYLOAD_BYTES:
        raise EncodingError(f"payload of {len(payload)} bytes exceeds the frame limit")
    header = len(payload).to_bytes(LENGTH_BYTES, "big")
    return header + payload + frame_mac(auth_key, header, payload)


class FramedConnection:
    """One end of an authenticated frame stream."""

    def __init__(self, sock: socket.socket, auth_key: bytes = DEFAULT_AUTH_KEY):
        if not auth_key:
            raise ValueError("an authentication key is required")
        self.sock = sock
        self.auth_key = auth_key
        self._send_lock = threading.Lock()
        self.frames_sent = 0
        self.frames_received = 0

    def send(self, payload: bytes):
        frame = encode_frame(payload, self.auth_key)
        with self._send_lock:
            self.sock.sendall(frame)
            self.frames_sent += 1

    def _recv_exact(self, size: int, allow_eof: bool = False) -> Optional[bytes]:
        buffer = bytearray(size)
        view = memoryview(buffer)
        received = 0
        while received < size:
            count = self.sock.recv_into(view[received:])
            if count == 0:
                if allow_eof and received == 0:
                    return None
                raise EncodingError(f"connection closed mid-frame after {received} of {size} bytes")
            received += count
        return bytes(buffer)

    def recv(self) -> Optional[bytes]:
        """Next verified payload, or None once the peer has closed the stream."""
        header = self._recv_exact(LENGTH_BYTES, allow_eof=True)
        if header is None:
            return None
        length = int.from_bytes(header, "big")
        if length > MAX_PAYLOAD_BYTES:
            raise EncodingError(f"announced frame of {length} bytes exceeds the frame limit")
        payload = self._recv_exact(length)
        mac = self._recv_exact(MAC_BYTES)
        if not hmac.compare_digest(mac, frame_mac(self.auth_key, header, payload)):
            raise IntegrityError("frame authentication failed")
        self.frames_received += 1
        return payload

    def close(self):
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()


def _tune(sock: socket.socket):
    # the loop sends one small frame per cycle
    sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)


def connect(
    host: str, port: int, auth_key: bytes = DEFAULT_AUTH_KEY, timeout: Optional[float] = 10.0
) -> FramedConnection:
    """Connect to a listening receiver terminal, retrying refusals until ``timeout``."""
    deadline = None if timeout is None else time.monotonic() + timeout
    while True:
        try:
            sock = socket.create_connection((host, port), timeout=timeout)
            break
        except ConnectionRefusedError:
            if deadline is None or time.monotonic() >= deadline:
                raise
            time.sleep(CONNECT_RETRY_S)
    sock.settimeout(None)
    _tune(sock)
    logger.info(f"Connected to receiver terminal at {host}:{port}")
    return FramedConnection(sock, auth_key)


def accept(host: str, port: int, auth_key: bytes = DEFAULT_AUTH_KEY) -> FramedConnection:
    """Block until the sender terminal connects."""
    with socket.create_server((host, port)) as server:
        logger.info(f"Receiver terminal listening on {host}:{port}")
        sock, address = server.accept()
    _tune(sock)
    logger.info(f"Sender terminal connected from {address[0]}:{address[1]}")
    return FramedConnection(sock, auth_key)


def loopback_pair(auth_key: bytes = DEFAULT_AUTH_KEY) -> Tuple[FramedConnection, FramedConnection]:
    """Connected (sender, receiver) ends over 127.0.0.1."""
    with socket.create_server(("127.0.0.1", 0)) as server:
        port = server.getsockname()[1]
        client = socket.create_connection(("127.0.0.1", port))
        sock, _ = server.accept()
    for s in (client, sock):
        _tune(s)
    logger.debug(f"Loopback link established on port {port}")
    return FramedConnection(client, auth_key), FramedConnection(sock, auth_key)
