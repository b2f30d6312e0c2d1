"""Group-bound cryptographic operations.

A :class:`CryptoSuite` fixes one prime-order group and exposes keys,
Schnorr signatures, hash commitments, the hybrid deterministic encryption
and the proof of ciphertext well-formedness over it.  All methods are pure.

Derivations use SHA-256 with a distinct domain tag per purpose so that a
digest computed for one use can never be replayed as another.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass
from functools import lru_cache
from typing import Any

from etlc.crypto.encoding import DecodeError, bytes_to_int, int_to_bytes, pack, unpack
from etlc.crypto.groups import SECP256K1, GroupError
from etlc.crypto.symmetric import KEY_LEN, NONCE_LEN, SymKey, sym_decrypt, sym_encrypt
from etlc.errors import EmptyMessage, InconsistentInputs, InvalidPublicKey, NotRobustCiphertext

DIGEST_LEN = 32
OPENING_LEN = 32

_CT_MAGIC = b"DCT1"
_PROOF_MAGIC = b"PI1"


def tagged_hash(tag: str, *parts: bytes) -> bytes:
    return hashlib.sha256(pack(b"etlc/" + tag.encode(), *parts)).digest()


@dataclass(frozen=True)
class KeyPair:
    sk: int
    pk: Any


@dataclass(frozen=True)
class Commitment:
    value: bytes
    opening: bytes


@dataclass(frozen=True)
class DetCiphertext:
    kem: Any
    dem: bytes

    def to_bytes(self, group) -> bytes:
        return pack(_CT_MAGIC, group.encode(self.kem), self.dem)

    @classmethod
    def from_bytes(cls, group, data: bytes) -> "DetCiphertext":
        try:
            magic, kem, dem = unpack(data, 3)
            if magic != _CT_MAGIC:
                raise DecodeError("not a ciphertext")
            return cls(group.decode(kem), dem)
        except GroupError as exc:
            raise DecodeError(str(exc)) from exc


@dataclass(frozen=True)
class EncProof:
    commitment_point: Any
    response: int
    bound_digest: bytes

    def to_bytes(self, group) -> bytes:
        return pack(
            _PROOF_MAGIC,
            group.encode(self.commitment_point),
            int_to_bytes(self.response, group.scalar_len),
            self.bound_digest,
        )

    @classmethod
    def from_bytes(cls, group, data: bytes) -> "EncProof":
        try:
            magic, point, resp, digest = unpack(data, 4)
            if magic != _PROOF_MAGIC:
                raise DecodeError("not a proof")
            return cls(group.decode(point), bytes_to_int(resp, group.scalar_len), digest)
        except GroupError as exc:
            raise DecodeError(str(exc)) from exc


class CryptoSuite:
    def __init__(self, group=SECP256K1):
        self.group = group
        self.name = group.name
        self._verify_cached = lru_cache(maxsize=8192)(self._verify_sig)

    def __repr__(self) -> str:
        return f"CryptoSuite({self.group.name})"

    # -- helpers -------------------------------------------------------------

    def encode_scalar(self, k: int) -> bytes:
        return int_to_bytes(k, self.group.scalar_len)

    def encode_element(self, e) -> bytes:
        return self.group.encode(e)

    def decode_element(self, data: bytes):
        return self.group.decode(data)

    def hash_to_scalar(self, tag: str, *parts: bytes) -> int:
        # 512 bits reduced mod q keeps the bias negligible for any group size
        wide = tagged_hash(tag, b"\x00", *parts) + tagged_hash(tag, b"\x01", *parts)
        return int.from_bytes(wide, "big") % self.group.order

    def _nonzero_scalar(self, tag: str, *parts: bytes) -> int:
        return self.hash_to_scalar(tag, *parts) % (self.group.order - 1) + 1

    def _check_pk(self, pk) -> None:
        if pk == self.group.identity or not self.group.contains(pk):
            raise InvalidPublicKey("public key must be a non-identity subgroup element")

    # -- keys ----------------------------------------------------------------

    def keygen(self, seed: bytes) -> KeyPair:
        if len(seed) != 32:
            raise ValueError("keygen seed must be 32 bytes")
        sk = self._nonzero_scalar("keygen", seed)
        return KeyPair(sk, self.group.gexp(sk))

    def public_key(self, sk: int):
        return self.group.gexp(sk)

    # -- signatures ----------------------------------------------------------

    def sign(self, sk: int, msg: bytes) -> bytes:
        """Schnorr signature with a deterministic nonce."""
        grp = self.group
        pk = grp.gexp(sk)
        w = self._nonzero_scalar("sig-nonce", self.encode_scalar(sk), msg)
        R = grp.gexp(w)
        e = self.hash_to_scalar("sig-challenge", grp.encode(R), grp.encode(pk), msg)
        s = (w + e * sk) % grp.order
        return pack(grp.encode(R), self.encode_scalar(s))

    def verify_sig(self, pk, msg: bytes, sig: bytes) -> bool:
        return self._verify_cached(pk, bytes(msg), bytes(sig))

    def _verify_sig(self, pk, msg: bytes, sig: bytes) -> bool:
        grp = self.group
        try:
            self._check_pk(pk)
            r_bytes, s_bytes = unpack(sig, 2)
            R = grp.decode(r_bytes)
            s = bytes_to_int(s_bytes, grp.scalar_len)
        except (DecodeError, GroupError, InvalidPublicKey, TypeError):
            return False
        if s >= grp.order:
            return False
        e = self.hash_to_scalar("sig-challenge", r_bytes, grp.encode(pk), msg)
        return grp.gexp(s) == grp.mul(R, grp.exp(pk, e))

    # -- commitments ---------------------------------------------------------

    def commit(self, msg: bytes, randomness: bytes) -> Commitment:
        if len(randomness) != OPENING_LEN:
            raise ValueError("commitment randomness must be 32 bytes")
        return Commitment(tagged_hash("commit", randomness, msg), bytes(randomness))

    def verify_commit(self, c: bytes, msg: bytes, opening: bytes) -> bool:
        if len(opening) != OPENING_LEN or len(c) != DIGEST_LEN:
            return False
        return hmac.compare_digest(tagged_hash("commit", opening, msg), c)

    # -- deterministic public-key encryption ---------------------------------

    def _enc_randomness(self, pk, msg: bytes) -> int:
        return self._nonzero_scalar("detenc-r", self.group.encode(pk), msg)

    def _dem_key(self, kem, shared) -> SymKey:
        grp = self.group
        kem_b, shared_b = grp.encode(kem), grp.encode(shared)
        key = tagged_hash("detenc-kdf-key", kem_b, shared_b)[:KEY_LEN]
        nonce = tagged_hash("detenc-kdf-nonce", kem_b, shared_b)[:NONCE_LEN]
        return SymKey(key, nonce)

    def det_encrypt(self, pk, msg: bytes) -> DetCiphertext:
        """Encrypt-with-Hash over an ElGamal KEM.

        The KEM exponent is derived from ``(pk, msg)``, so encryption is a
        deterministic function anyone holding the plaintext can recompute.
        """
        if not msg:
            raise EmptyMessage("deterministic encryption needs a non-empty message")
        self._check_pk(pk)
        grp = self.group
        r = self._enc_randomness(pk, msg)
        kem = grp.gexp(r)
        dem = sym_encrypt(self._dem_key(kem, grp.exp(pk, r)), msg)
        return DetCiphertext(kem, dem)

    def det_decrypt(self, sk: int, ct: DetCiphertext) -> bytes:
        grp = self.group
        if ct.kem == grp.identity or not grp.contains(ct.kem):
            raise NotRobustCiphertext("KEM component outside the group")
        msg = sym_decrypt(self._dem_key(ct.kem, grp.exp(ct.kem, sk)), ct.dem)
        if not msg or self.det_encrypt(grp.gexp(sk), msg) != ct:
            raise NotRobustCiphertext("re-encryption does not reproduce the ciphertext")
        return msg

    def det_decrypt_bytes(self, sk: int, data: bytes) -> bytes:
        """Parse then decrypt; any parse failure counts as non-robust."""
        try:
            ct = DetCiphertext.from_bytes(self.group, data)
        except DecodeError as exc:
            raise NotRobustCiphertext(str(exc)) from exc
        return self.det_decrypt(sk, ct)

    # -- proof of ciphertext well-formedness ---------------------------------

    def _proof_challenge(self, pk, kem, h: bytes, W) -> int:
        grp = self.group
        return self.hash_to_scalar(
            "nizk-challenge",
            grp.name.encode(),
            grp.encode(grp.generator),
            grp.encode(pk),
            grp.encode(kem),
            h,
            grp.encode(W),
        )

    def prove_enc(self, pk, msg: bytes, ct: DetCiphertext, h: bytes) -> EncProof:
        """Prove knowledge of the KEM exponent, bound to ``pk`` and ``h``."""
        if self.det_encrypt(pk, msg) != ct:
            raise InconsistentInputs("ciphertext is not det_encrypt(pk, msg)")
        grp = self.group
        r = self._enc_randomness(pk, msg)
        w = self._nonzero_scalar("nizk-nonce", self.encode_scalar(r), grp.encode(pk), h)
        W = grp.gexp(w)
        c = self._proof_challenge(pk, ct.kem, h, W)
        return EncProof(W, (w + c * r) % grp.order, bytes(h))

    def verify_enc_proof(self, pk, kem, h: bytes, proof: EncProof) -> bool:
        grp = self.group
        try:
            self._check_pk(pk)
        except InvalidPublicKey:
            return False
        if not hmac.compare_digest(bytes(proof.bound_digest), bytes(h)):
            return False
        if not (0 <= proof.response < grp.order):
            return False
        if kem == grp.identity or not grp.contains(kem) or not grp.contains(proof.commitment_point):
            return False
        c = self._proof_challenge(pk, kem, h, proof.commitment_point)
        return grp.gexp(proof.response) == grp.mul(proof.commitment_point, grp.exp(kem, c))


DEFAULT_SUITE = CryptoSuite(SECP256K1)
