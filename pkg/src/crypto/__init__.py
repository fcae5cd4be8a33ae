"""
Symmetric encryption backends and the telemetry codec.
"""

from .aes import aes256_decrypt, aes256_encrypt
from .ascon import ascon_decrypt, ascon_encrypt
from .codec import decode_signals, encode_signals
from .envelope import CipherEnvelope, open_envelope, pack_envelope, seal, unpack_envelope
from .otp import otp_decrypt, otp_encrypt
from .specs import CIPHER_SPECS, Algorithm, CipherSpec, key_material_bits

__all__ = [
    'Algorithm',
    'CIPHER_SPECS',
    'CipherEnvelope',
    'CipherSpec',
    'aes256_decrypt',
    'aes256_encrypt',
    'ascon_decrypt',
    'ascon_encrypt',
    'decode_signals',
    'encode_signals',
    'key_material_bits',
    'open_envelope',
    'otp_decrypt',
    'otp_encrypt',
    'pack_envelope',
    'seal',
    'unpack_envelope',
]
