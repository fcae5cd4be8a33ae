"""
AES-256-CBC with PKCS#7 padding (pycryptodome).
"""
from Crypto.Cipher import AES
from Crypto.Util.Padding import pad, unpad

from ..core.exceptions import IntegrityError, KeySizeError

KEY_BYTES = 32
IV_BYTES = AES.block_size


def _check_sizes(key: bytes, iv: bytes):
    if len(key) != KEY_BYTES:
        raise KeySizeError(f"AES-256 needs a {KEY_BYTES}-byte key, got {len(key)}")
    if len(iv) != IV_BYTES:
        raise KeySizeError(f"AES-CBC needs a {IV_BYTES}-byte IV, got {len(iv)}")


def aes256_encrypt(plaintext: bytes, key: bytes, iv: bytes) -> bytes:
    _check_sizes(key, iv)
    cipher = AES.new(key, AES.MODE_CBC, iv=iv)
    return cipher.encrypt(pad(plaintext, AES.block_size))


def aes256_decrypt(ciphertext: bytes, key: bytes, iv: bytes) -> bytes:
    _check_sizes(key, iv)
    if not ciphertext or len(ciphertext) % AES.block_size:
        raise IntegrityError(f"CBC ciphertext length {len(ciphertext)} is not a positive multiple of 16")
    cipher = AES.new(key, AES.MODE_CBC, iv=iv)
    try:
        return unpad(cipher.decrypt(ciphertext), AES.block_size)
    except ValueError as e:
        raise IntegrityError(f"AES-CBC padding check failed: {e}")
