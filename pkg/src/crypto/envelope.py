"""
Cipher envelopes and their wire layout.

    tag (1) | key_id (16) | iv_len (1) | iv | ct_len (4, big-endian) | ct | auth tag (16, AEAD only)

The algorithm tag and key ID are authenticated as associated data by the
AEAD variants. Envelopes reference key material by ID and never carry it.
"""
import hmac
import uuid
from dataclasses import dataclass
from typing import Optional, Tuple

from ..core.exceptions import EncodingError, IntegrityError, KeySizeError
from .aes import aes256_decrypt, aes256_encrypt
from .ascon import TAG_BYTES, ascon_decrypt, ascon_encrypt
from .otp import otp_decrypt, otp_encrypt
from .specs import CIPHER_SPECS, Algorithm, CipherSpec, key_material_bits


@dataclass(frozen=True)
class CipherEnvelope:
    algorithm: Algorithm
    key_id: uuid.UUID
    iv_or_nonce: bytes
    ciphertext: bytes
    auth_tag: Optional[bytes] = None

    @property
    def header(self) -> bytes:
        return bytes([self.algorithm.wire_tag]) + self.key_id.bytes


def split_key_material(spec: CipherSpec, key_material: bytes, plaintext_len: Optional[int] = None) -> Tuple[bytes, bytes]:
    """Split pool material into (key, iv_or_nonce) for ``spec``."""
    if spec.key_bits is None:
        if plaintext_len is not None and len(key_material) != plaintext_len:
            raise KeySizeError(
                f"OTP needs {plaintext_len} bytes of key material, got {len(key_material)}"
            )
        return key_material, b""
    expected = key_material_bits(spec, 0) // 8
    if len(key_material) != expected:
        raise KeySizeError(
            f"{spec.algorithm.value} needs {expected} bytes of key material, got {len(key_material)}"
        )
    key_len = spec.key_bits // 8
    return key_material[:key_len], key_material[key_len:]


def seal(algorithm: Algorithm, plaintext: bytes, key_material: bytes, key_id: uuid.UUID) -> CipherEnvelope:
    spec = CIPHER_SPECS[algorithm]
    key, iv = split_key_material(spec, key_material, len(plaintext))
    if algorithm is Algorithm.OTP:
        return CipherEnvelope(algorithm, key_id, b"", otp_encrypt(plaintext, key))
    if algorithm is Algorithm.AES256:
        return CipherEnvelope(algorithm, key_id, iv, aes256_encrypt(plaintext, key, iv))
    header = bytes([algorithm.wire_tag]) + key_id.bytes
    ciphertext, tag = ascon_encrypt(algorithm, plaintext, key, iv, header)
    return CipherEnvelope(algorithm, key_id, iv, ciphertext, tag)


def open_envelope(envelope: CipherEnvelope, key_material: bytes) -> bytes:
    spec = CIPHER_SPECS[envelope.algorithm]
    plaintext_len = len(envelope.ciphertext) if spec.key_bits is None else None
    key, iv = split_key_material(spec, key_material, plaintext_len)
    if not hmac.compare_digest(iv, envelope.iv_or_nonce):
        raise IntegrityError("envelope IV/nonce does not match the key material for its key ID")
    if envelope.algorithm is Algorithm.OTP:
        return otp_decrypt(envelope.ciphertext, key)
    if envelope.algorithm is Algorithm.AES256:
        return aes256_decrypt(envelope.ciphertext, key, iv)
    if envelope.auth_tag is None:
        raise IntegrityError("AEAD envelope without authentication tag")
    return ascon_decrypt(envelope.algorithm, envelope.ciphertext, envelope.auth_tag, key, iv, envelope.header)


def pack_envelope(envelope: CipherEnvelope) -> bytes:
    spec = CIPHER_SPECS[envelope.algorithm]
    if len(envelope.iv_or_nonce) > 255:
        raise EncodingError("IV/nonce longer than 255 bytes")
    if len(envelope.ciphertext) >= 1 << 32:
        raise EncodingError("ciphertext too long for a 4-byte length field")
    if spec.aead != (envelope.auth_tag is not None):
        raise EncodingError(f"{envelope.algorithm.value} envelope tag presence does not match the cipher")
    if envelope.auth_tag is not None and len(envelope.auth_tag) != TAG_BYTES:
        raise EncodingError(f"authentication tag must be {TAG_BYTES} bytes")
    return b"".join(
        (
            envelope.header,
            bytes([len(envelope.iv_or_nonce)]),
            envelope.iv_or_nonce,
            len(envelope.ciphertext).to_bytes(4, "big"),
            envelope.ciphertext,
            envelope.auth_tag or b"",
        )
    )


def unpack_envelope(data: bytes) -> CipherEnvelope:
    """Parse the wire layout; truncated or trailing bytes raise EncodingError."""
    if len(data) < 22:
        raise EncodingError(f"envelope truncated: {len(data)} bytes")
    try:
        algorithm = Algorithm.from_wire_tag(data[0])
    except ValueError as e:
        raise EncodingError(str(e))
    key_id = uuid.UUID(bytes=bytes(data[1:17]))
    iv_len = data[17]
    pos = 18 + iv_len
    if len(data) < pos + 4:
        raise EncodingError("envelope truncated in IV or length field")
    iv = bytes(data[18:pos])
    ct_len = int.from_bytes(data[pos:pos + 4], "big")
    pos += 4
    tag_len = TAG_BYTES if CIPHER_SPECS[algorithm].aead else 0
    end = pos + ct_len + tag_len
    if len(data) < end:
        raise EncodingError("envelope truncated in ciphertext or tag")
    if len(data) > end:
        raise EncodingError(f"{len(data) - end} trailing bytes after envelope")
    ciphertext = bytes(data[pos:pos + ct_len])
    auth_tag = bytes(data[pos + ct_len:end]) if tag_len else None
    return CipherEnvelope(algorithm, key_id, iv, ciphertext, auth_tag)
