"""
One-time pad: bytewise XOR with a key as long as the message.
"""
from Crypto.Util.strxor import strxor

from ..core.exceptions import KeySizeError


def otp_encrypt(plaintext: bytes, key: bytes) -> bytes:
    if len(key) != len(plaintext):
        raise KeySizeError(f"OTP key length {len(key)} does not match message length {len(plaintext)}")
    if not plaintext:
        return b""
    return strxor(plaintext, key)


# XOR is its own inverse
otp_decrypt = otp_encrypt
