"""
Cipher catalogue: key, IV/nonce and tag sizes per algorithm.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional


class Algorithm(str, Enum):
    """Encryption variants; values double as configuration names."""
    OTP = "OTP"
    AES256 = "AES256"
    ASCON128 = "ASCON128"
    ASCON128A = "ASCON128A"
    ASCON80PQ = "ASCON80PQ"

    @property
    def wire_tag(self) -> int:
        return _WIRE_TAGS[self]

    @classmethod
    def from_wire_tag(cls, tag: int) -> "Algorithm":
        for algorithm, value in _WIRE_TAGS.items():
            if value == tag:
                return algorithm
        raise ValueError(f"unknown algorithm tag {tag}")


_WIRE_TAGS = {
    Algorithm.OTP: 1,
    Algorithm.AES256: 2,
    Algorithm.ASCON128: 3,
    Algorithm.ASCON128A: 4,
    Algorithm.ASCON80PQ: 5,
}


@dataclass(frozen=True)
class CipherSpec:
    algorithm: Algorithm
    key_bits: Optional[int]  # None: as long as the plaintext (OTP)
    iv_or_nonce_bits: int
    aead: bool
    tag_bits: int = 0

    @property
    def fixed_key_material_bits(self) -> Optional[int]:
        if self.key_bits is None:
            return None
        return self.key_bits + self.iv_or_nonce_bits


CIPHER_SPECS: Dict[Algorithm, CipherSpec] = {
    Algorithm.OTP: CipherSpec(Algorithm.OTP, None, 0, aead=False),
    # CBC with PKCS#7 padding
    Algorithm.AES256: CipherSpec(Algorithm.AES256, 256, 128, aead=False),
    Algorithm.ASCON128: CipherSpec(Algorithm.ASCON128, 128, 128, aead=True, tag_bits=128),
    Algorithm.ASCON128A: CipherSpec(Algorithm.ASCON128A, 128, 128, aead=True, tag_bits=128),
    Algorithm.ASCON80PQ: CipherSpec(Algorithm.ASCON80PQ, 160, 128, aead=True, tag_bits=128),
}


def key_material_bits(spec: CipherSpec, plaintext_len: int) -> int:
    """Bits drawn from the key pool for one encryption of ``plaintext_len`` bytes."""
    if spec.key_bits is None:
        return 8 * plaintext_len
    return spec.key_bits + spec.iv_or_nonce_bits
