"""Independent helpers shared by the unit tests and the acceptance gate."""

import hashlib
import random
from typing import Iterator, Tuple

from etlc.crypto import CryptoSuite, EncProof


def flip_bit(data: bytes, bit: int) -> bytes:
    out = bytearray(data)
    out[bit // 8] ^= 1 << (bit % 8)
    return bytes(out)


def random_element(suite: CryptoSuite, rng: random.Random):
    return suite.group.gexp(rng.randrange(1, suite.group.order))


def proof_mutations(suite: CryptoSuite, pk, kem, h: bytes, proof: EncProof, rng: random.Random,
                    per_kind: int = 8) -> Iterator[Tuple[str, object, object, bytes, EncProof]]:
    """Yield (kind, pk, kem, h, proof) tuples that each differ from the honest statement or proof."""
    grp = suite.group
    q = grp.order
    W, z, bound = proof.commitment_point, proof.response, proof.bound_digest
    for _ in range(per_kind):
        d = rng.randrange(1, q)
        yield "response+d", pk, kem, h, EncProof(W, (z + d) % q, bound)
        yield "W*g^d", pk, kem, h, EncProof(grp.mul(W, grp.gexp(d)), z, bound)
        yield "random W", pk, kem, h, EncProof(random_element(suite, rng), z, bound)
        yield "random pk", random_element(suite, rng), kem, h, proof
        yield "random kem", pk, random_element(suite, rng), h, proof
        yield "kem*g^d", pk, grp.mul(kem, grp.gexp(d)), h, proof
        other = hashlib.sha256(rng.randbytes(16)).digest()
        yield "other h (replay)", pk, kem, other, EncProof(W, z, other)
        yield "other h, old bound", pk, kem, other, proof
        bit = rng.randrange(256)
        yield "bound bit", pk, kem, h, EncProof(W, z, flip_bit(bound, bit))
        yield "h bit", pk, kem, flip_bit(h, bit), proof
    yield "response+1", pk, kem, h, EncProof(W, (z + 1) % q, bound)
    yield "response-1", pk, kem, h, EncProof(W, (z - 1) % q, bound)
    yield "response=0", pk, kem, h, EncProof(W, 0, bound)
    yield "response=q", pk, kem, h, EncProof(W, q, bound)
    yield "negated response", pk, kem, h, EncProof(W, (-z) % q, bound)
    yield "W=identity", pk, kem, h, EncProof(grp.identity, z, bound)
    yield "kem=identity", pk, grp.identity, h, proof
    yield "pk=identity", grp.identity, kem, h, proof
    yield "W<->kem", pk, W, h, EncProof(kem, z, bound)


def nizk_mutation_sweep(suite: CryptoSuite, rng: random.Random, statements: int, per_kind: int = 8):
    """Return (mutations tried, accepted mutations, honest failures)."""
    tried, accepted, honest_failures = 0, [], 0
    for _ in range(statements):
        kp = suite.keygen(rng.randbytes(32))
        msg = rng.randbytes(rng.randrange(1, 80))
        ct = suite.det_encrypt(kp.pk, msg)
        h = suite.commit(ct.to_bytes(suite.group), rng.randbytes(32)).value
        proof = suite.prove_enc(kp.pk, msg, ct, h)
        if not suite.verify_enc_proof(kp.pk, ct.kem, h, proof):
            honest_failures += 1
        for kind, pk2, kem2, h2, proof2 in proof_mutations(suite, kp.pk, ct.kem, h, proof, rng, per_kind):
            tried += 1
            if suite.verify_enc_proof(pk2, kem2, h2, proof2):
                accepted.append(kind)
    return tried, accepted, honest_failures
