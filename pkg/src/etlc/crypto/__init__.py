"""Cryptographic primitives for the notification protocol.

The module-level functions are bound to the default secp256k1 suite; build a
:class:`CryptoSuite` over :data:`TOY64` or :data:`TINY` for brute-force tests.
"""

from etlc.crypto.groups import GROUPS, SECP256K1, TINY, TOY64, CurveGroup, GroupError, SchnorrGroup, get_group
from etlc.crypto.suite import (
    DEFAULT_SUITE,
    DIGEST_LEN,
    OPENING_LEN,
    Commitment,
    CryptoSuite,
    DetCiphertext,
    EncProof,
    KeyPair,
    tagged_hash,
)
from etlc.crypto.symmetric import SymKey, sym_decrypt, sym_encrypt

keygen = DEFAULT_SUITE.keygen
sign = DEFAULT_SUITE.sign
verify_sig = DEFAULT_SUITE.verify_sig
commit = DEFAULT_SUITE.commit
verify_commit = DEFAULT_SUITE.verify_commit
det_encrypt = DEFAULT_SUITE.det_encrypt
det_decrypt = DEFAULT_SUITE.det_decrypt
prove_enc = DEFAULT_SUITE.prove_enc
verify_enc_proof = DEFAULT_SUITE.verify_enc_proof


def suite_for(group_name: str) -> CryptoSuite:
    if group_name == DEFAULT_SUITE.name:
        return DEFAULT_SUITE
    return _suites.setdefault(group_name, CryptoSuite(get_group(group_name)))


_suites: dict = {}

__all__ = [
    "GROUPS", "SECP256K1", "TINY", "TOY64", "CurveGroup", "GroupError", "SchnorrGroup", "get_group",
    "DEFAULT_SUITE", "DIGEST_LEN", "OPENING_LEN", "Commitment", "CryptoSuite", "DetCiphertext",
    "EncProof", "KeyPair", "tagged_hash", "SymKey", "sym_decrypt", "sym_encrypt",
    "keygen", "sign", "verify_sig", "commit", "verify_commit", "det_encrypt", "det_decrypt",
    "prove_enc", "verify_enc_proof", "suite_for",
]
