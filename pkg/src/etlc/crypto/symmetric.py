"""AES-256-CTR stream layer (the notifier's one-time key ``k``)."""

from __future__ import annotations

from dataclasses import dataclass

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

KEY_LEN = 32
NONCE_LEN = 16


@dataclass(frozen=True)
class SymKey:
    key: bytes
    nonce: bytes

    def __post_init__(self):
        if len(self.key) != KEY_LEN or len(self.nonce) != NONCE_LEN:
            raise ValueError("SymKey needs a 32-byte key and a 16-byte nonce")

    def to_bytes(self) -> bytes:
        return self.key + self.nonce

    @classmethod
    def from_bytes(cls, data: bytes) -> "SymKey":
        if len(data) != KEY_LEN + NONCE_LEN:
            raise ValueError("serialized SymKey must be 48 bytes")
        return cls(data[:KEY_LEN], data[KEY_LEN:])


def _ctr(k: SymKey, data: bytes) -> bytes:
    ctx = Cipher(algorithms.AES(k.key), modes.CTR(k.nonce)).encryptor()
    return ctx.update(data) + ctx.finalize()


def sym_encrypt(k: SymKey, msg: bytes) -> bytes:
    return _ctr(k, msg)


def sym_decrypt(k: SymKey, ct: bytes) -> bytes:
    # CTR is an involution on the keystream.
    return _ctr(k, ct)
