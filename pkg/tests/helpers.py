"""Small builders shared by the chain and contract tests."""

from etlc.crypto import DEFAULT_SUITE, tagged_hash
from etlc.privbc import Member, MembershipIssuer, PrivateChain, Role


def seed(label: str) -> bytes:
    return tagged_hash("test-seed", label.encode())


def make_members(ids=("a", "b", "c"), suite=DEFAULT_SUITE, roles=None):
    issuer = MembershipIssuer(suite.keygen(seed("issuer")), suite)
    members = []
    for i, mid in enumerate(ids):
        role = (roles or {}).get(mid, Role.PEER)
        kp = suite.keygen(seed("member/" + mid))
        members.append(Member(mid, kp, role, mid, issuer.issue(mid, kp.pk, role)))
    return issuer, members


def make_chain(ids=("a", "b", "c"), quorum=2, suite=DEFAULT_SUITE, roles=None):
    issuer, members = make_members(ids, suite, roles)
    return PrivateChain(members, issuer, quorum, suite), {m.id: m for m in members}


def notification(chain, recipient_pk, key, rng, eld=None, suite=DEFAULT_SUITE):
    eld = eld or chain.head(key)
    ct = suite.det_encrypt(recipient_pk, eld.to_bytes())
    commitment = suite.commit(ct.to_bytes(suite.group), rng.randbytes(32))
    proof = suite.prove_enc(recipient_pk, eld.to_bytes(), ct, commitment.value)
    return ct, commitment, proof
