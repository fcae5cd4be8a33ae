"""
Ascon v1.2 AEAD (Ascon-128, Ascon-128a, Ascon-80pq).

Pure-Python sponge over a five-word 64-bit state. The later standardized
profile changed padding and byte order, so the published v1.2 variants are
kept here in-tree.
"""
import hmac
from dataclasses import dataclass
from typing import List, Tuple

from ..core.exceptions import IntegrityError, KeySizeError
from .specs import Algorithm

MASK64 = 0xFFFFFFFFFFFFFFFF
TAG_BYTES = 16
NONCE_BYTES = 16


@dataclass(frozen=True)
class AsconParams:
    key_bytes: int
    rate: int  # bytes absorbed per block
    a: int  # initialization/finalization rounds
    b: int  # rounds between blocks


ASCON_PARAMS = {
    Algorithm.ASCON128: AsconParams(key_bytes=16, rate=8, a=12, b=6),
    Algorithm.ASCON128A: AsconParams(key_bytes=16, rate=16, a=12, b=8),
    Algorithm.ASCON80PQ: AsconParams(key_bytes=20, rate=8, a=12, b=6),
}


def _rotr(value: int, r: int) -> int:
    return ((value >> r) | (value << (64 - r))) & MASK64


def _permute(S: List[int], rounds: int):
    for r in range(12 - rounds, 12):
        S[2] ^= 0xF0 - r * 0x10 + r * 0x1
        # substitution layer
        S[0] ^= S[4]
        S[4] ^= S[3]
        S[2] ^= S[1]
        T = [(S[i] ^ MASK64) & S[(i + 1) % 5] for i in range(5)]
        for i in range(5):
            S[i] ^= T[(i + 1) % 5]
        S[1] ^= S[0]
        S[0] ^= S[4]
        S[3] ^= S[2]
        S[2] ^= MASK64
        # linear diffusion layer
        S[0] ^= _rotr(S[0], 19) ^ _rotr(S[0], 28)
        S[1] ^= _rotr(S[1], 61) ^ _rotr(S[1], 39)
        S[2] ^= _rotr(S[2], 1) ^ _rotr(S[2], 6)
        S[3] ^= _rotr(S[3], 10) ^ _rotr(S[3], 17)
        S[4] ^= _rotr(S[4], 7) ^ _rotr(S[4], 41)


def _word(data: bytes) -> int:
    return int.from_bytes(data, "big")


def _state(data: bytes) -> List[int]:
    return [_word(data[8 * w:8 * (w + 1)]) for w in range(5)]


def _pad(data: bytes, rate: int) -> bytes:
    return data + b"\x80" + bytes(rate - (len(data) % rate) - 1)


def _params(variant: Algorithm, key: bytes, nonce: bytes) -> AsconParams:
    if variant not in ASCON_PARAMS:
        raise KeySizeError(f"{variant} is not an Ascon variant")
    params = ASCON_PARAMS[variant]
    if len(key) != params.key_bytes:
        raise KeySizeError(f"{variant.value} needs a {params.key_bytes}-byte key, got {len(key)}")
    if len(nonce) != NONCE_BYTES:
        raise KeySizeError(f"{variant.value} needs a {NONCE_BYTES}-byte nonce, got {len(nonce)}")
    return params


def _initialize(p: AsconParams, key: bytes, nonce: bytes) -> List[int]:
    iv = bytes([8 * p.key_bytes, 8 * p.rate, p.a, p.b]) + bytes(20 - p.key_bytes)
    S = _state(iv + key + nonce)
    _permute(S, p.a)
    zero_key = _state(bytes(40 - p.key_bytes) + key)
    for i in range(5):
        S[i] ^= zero_key[i]
    return S


def _absorb_associated_data(S: List[int], p: AsconParams, associated_data: bytes):
    if associated_data:
        padded = _pad(associated_data, p.rate)
        for block in range(0, len(padded), p.rate):
            S[0] ^= _word(padded[block:block + 8])
            if p.rate == 16:
                S[1] ^= _word(padded[block + 8:block + 16])
            _permute(S, p.b)
    S[4] ^= 1


def _finalize(S: List[int], p: AsconParams, key: bytes) -> bytes:
    lane = p.rate // 8
    S[lane] ^= _word(key[0:8])
    S[lane + 1] ^= _word(key[8:16])
    S[lane + 2] ^= _word(key[16:] + bytes(24 - len(key)))
    _permute(S, p.a)
    S[3] ^= _word(key[-16:-8])
    S[4] ^= _word(key[-8:])
    return S[3].to_bytes(8, "big") + S[4].to_bytes(8, "big")


def ascon_encrypt(
    variant: Algorithm, plaintext: bytes, key: bytes, nonce: bytes, associated_data: bytes = b""
) -> Tuple[bytes, bytes]:
    """Seal ``plaintext``; returns ``(ciphertext, tag)``."""
    p = _params(variant, key, nonce)
    S = _initialize(p, key, nonce)
    _absorb_associated_data(S, p, associated_data)

    padded = _pad(plaintext, p.rate)
    out = bytearray()
    for block in range(0, len(padded), p.rate):
        S[0] ^= _word(padded[block:block + 8])
        out += S[0].to_bytes(8, "big")
        if p.rate == 16:
            S[1] ^= _word(padded[block + 8:block + 16])
            out += S[1].to_bytes(8, "big")
        if block + p.rate < len(padded):
            _permute(S, p.b)
    ciphertext = bytes(out[:len(plaintext)])
    return ciphertext, _finalize(S, p, key)


def ascon_decrypt(
    variant: Algorithm, ciphertext: bytes, tag: bytes, key: bytes, nonce: bytes, associated_data: bytes = b""
) -> bytes:
    """Open a sealed message; raises IntegrityError if the tag does not verify."""
    p = _params(variant, key, nonce)
    if len(tag) != TAG_BYTES:
        raise IntegrityError(f"Ascon tag must be {TAG_BYTES} bytes, got {len(tag)}")
    S = _initialize(p, key, nonce)
    _absorb_associated_data(S, p, associated_data)

    last = len(ciphertext) % p.rate
    full = len(ciphertext) - last
    out = bytearray()
    for block in range(0, full, p.rate):
        for lane in range(p.rate // 8):
            c = _word(ciphertext[block + 8 * lane:block + 8 * lane + 8])
            out += (S[lane] ^ c).to_bytes(8, "big")
            S[lane] = c
        _permute(S, p.b)

    # final partial block, padded with 0x80 inside the state
    tail = ciphertext[full:] + bytes(p.rate - last)
    lanes = [_word(tail[8 * i:8 * i + 8]) for i in range(p.rate // 8)]
    keystream = b"".join(S[i].to_bytes(8, "big") for i in range(p.rate // 8))
    out += bytes(x ^ y for x, y in zip(tail[:last], keystream[:last]))
    lane = last // 8
    offset = last % 8
    for i in range(lane):
        S[i] = lanes[i]
    mask = MASK64 >> (8 * offset)
    S[lane] = lanes[lane] ^ (S[lane] & mask) ^ (0x80 << (8 * (7 - offset)))

    expected = _finalize(S, p, key)
    if not hmac.compare_digest(expected, tag):
        raise IntegrityError(f"{variant.value} authentication failed")
    return bytes(out)
