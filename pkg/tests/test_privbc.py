import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from etlc.crypto import DEFAULT_SUITE as S
from etlc.errors import (
    AccessDenied,
    BadCiphertext,
    BadProof,
    NoLiveEntry,
    NotAMember,
    NotAuthorized,
    QuorumNotMet,
    StaleVersion,
    UnknownObject,
)
from etlc.privbc import (
    EndorsedLedgerData,
    LedgerData,
    Member,
    PrivateChain,
    Role,
    auth_message,
    ld_message,
    verify_endorsements,
)
from helpers import make_chain, make_members, notification, seed

R = S.keygen(seed("recipient"))


@pytest.fixture
def chain():
    c, members = make_chain()
    c.update_ledger_data(members["a"], "deed-42", b"owner=alice")
    return c, members


def test_first_and_second_write_versions():
    c, m = make_chain()
    assert c.update_ledger_data(m["a"], "deed-42", b"v").data.version == 0
    assert c.update_ledger_data(m["b"], "deed-42", b"w").data.version == 1
    assert [e.data.version for e in c.history("deed-42")] == [0, 1]


def test_non_member_author_rejected():
    c, _ = make_chain()
    _, [stranger] = make_members(["zed"])
    with pytest.raises(NotAMember):
        c.update_ledger_data(stranger, "k", b"v")
    with pytest.raises(NotAMember):
        c.update_ledger_data("nobody", "k", b"v")


def test_update_endorsements_verify_under_quorum(chain):
    c, _ = chain
    eld = c.head("deed-42")
    assert verify_endorsements(S, ld_message(eld.data), eld.endorsements, c.peer_pks, c.quorum)
    assert EndorsedLedgerData.from_bytes(eld.to_bytes()) == eld


def test_update_fires_hook_with_live_subscribers(chain):
    c, m = chain
    seen = []
    c.subscribe(lambda eld, subs: seen.append((eld.data.version, len(subs))))
    c.permit_access(R.pk, "deed-42")
    c.update_ledger_data(m["b"], "deed-42", b"owner=bob")
    assert seen == [(1, 1)]


def test_permit_access_live_entry(chain):
    c, _ = chain
    entry = c.permit_access(R.pk, "deed-42")
    assert not entry.revoked and entry.granted_at_version == 0
    assert c.live_entry(R.pk, "deed-42") is entry
    assert c.permit_access(R.pk, "deed-42") is entry  # idempotent while live


def test_permit_access_unknown_object(chain):
    c, _ = chain
    with pytest.raises(UnknownObject):
        c.permit_access(R.pk, "missing")


def test_quorum_enumeration_over_signer_subsets(chain):
    c, _ = chain
    for size in range(0, 4):
        for subset in itertools.combinations(["a", "b", "c"], size):
            probe = S.keygen(seed("probe" + "".join(subset))).pk
            if size < 2:
                with pytest.raises(QuorumNotMet):
                    c.permit_access(probe, "deed-42", endorsers=subset)
            else:
                entry = c.permit_access(probe, "deed-42", endorsers=subset)
                assert {mid for mid, _ in entry.endorsements} == set(subset)


def test_clients_do_not_count_toward_quorum():
    c, m = make_chain(("a", "b", "c", "d"), quorum=2, roles={"c": Role.CLIENT, "d": Role.CLIENT})
    with pytest.raises(QuorumNotMet):
        c.update_ledger_data(m["c"], "k", b"v", endorsers=["a", "c", "d"])
    assert c.update_ledger_data(m["c"], "k", b"v", endorsers=["a", "b"]).data.version == 0


def test_revoke_then_revoke_again(chain):
    c, _ = chain
    c.permit_access(R.pk, "deed-42")
    assert c.revoke_access(R.pk, "deed-42").revoked
    with pytest.raises(NoLiveEntry):
        c.revoke_access(R.pk, "deed-42")


def test_generation_after_revocation_not_authorized(chain, rng):
    c, m = chain
    c.permit_access(R.pk, "deed-42")
    c.revoke_access(R.pk, "deed-42")
    ct, com, proof = notification(c, R.pk, "deed-42", rng)
    with pytest.raises(NotAuthorized):
        c.record_enc_data_hash_proof(m["a"], "deed-42", R.pk, ct, com, proof)


def test_honest_generation_record(chain, rng):
    c, m = chain
    c.permit_access(R.pk, "deed-42")
    ct, com, proof = notification(c, R.pk, "deed-42", rng)
    rec = c.record_enc_data_hash_proof(m["a"], "deed-42", R.pk, ct, com, proof)
    assert rec.version == 0 and rec.opening == com.opening
    msg = auth_message(S, R.pk, "deed-42", com.value)
    assert verify_endorsements(S, msg, rec.auth_sigs, c.peer_pks, c.quorum)
    assert S.verify_enc_proof(R.pk, ct.kem, com.value, rec.proof)


def test_stale_version_rejected(chain, rng):
    c, m = chain
    c.permit_access(R.pk, "deed-42")
    old = c.head("deed-42")
    c.update_ledger_data(m["b"], "deed-42", b"owner=bob")
    ct, com, proof = notification(c, R.pk, "deed-42", rng, eld=old)
    with pytest.raises(StaleVersion):
        c.record_enc_data_hash_proof(m["a"], "deed-42", R.pk, ct, com, proof)


def test_proof_for_other_pk_rejected(chain, rng):
    c, m = chain
    c.permit_access(R.pk, "deed-42")
    ct, com, _ = notification(c, R.pk, "deed-42", rng)
    other = S.keygen(seed("other")).pk
    ct_other = S.det_encrypt(other, c.head("deed-42").to_bytes())
    swapped = S.prove_enc(other, c.head("deed-42").to_bytes(), ct_other, com.value)
    with pytest.raises(BadProof):
        c.record_enc_data_hash_proof(m["a"], "deed-42", R.pk, ct, com, swapped)


def test_commitment_must_open_to_ciphertext(chain, rng):
    c, m = chain
    c.permit_access(R.pk, "deed-42")
    ct, com, proof = notification(c, R.pk, "deed-42", rng)
    bad = type(com)(com.value, bytes(32))
    with pytest.raises(BadCiphertext):
        c.record_enc_data_hash_proof(m["a"], "deed-42", R.pk, ct, bad, proof)


def test_vrs_authorized_and_denied(chain):
    c, _ = chain
    with pytest.raises(AccessDenied):
        c.vrs_query(R.pk, "deed-42")
    c.permit_access(R.pk, "deed-42")
    resp = c.vrs_query(R.pk, "deed-42")
    assert c.verify_vrs(R.pk, resp)
    assert not c.verify_vrs(S.keygen(seed("x")).pk, resp)


def test_vrs_after_three_updates_returns_version_two():
    c, m = make_chain()
    for v in (b"1", b"2", b"3"):
        c.update_ledger_data(m["a"], "k", v)
    c.permit_access(R.pk, "k")
    assert c.vrs_query(R.pk, "k").eld.data.version == 2


def test_peer_without_certificate_refused():
    issuer, members = make_members()
    forged = Member("a", members[0].keypair, Role.PEER, "a", b"not a certificate")
    with pytest.raises(ValueError):
        PrivateChain([forged] + members[1:], issuer)


def test_default_quorum_is_majority():
    issuer, members = make_members(("a", "b", "c", "d"))
    assert PrivateChain(members, issuer).quorum == 3


def test_verify_endorsements_rejects_duplicates_and_unknown(chain):
    c, _ = chain
    eld = c.head("deed-42")
    msg = ld_message(eld.data)
    dup = (eld.endorsements[0], eld.endorsements[0])
    assert not verify_endorsements(S, msg, dup, c.peer_pks, 2)
    stranger = (("zz", eld.endorsements[0][1]),) + eld.endorsements[:1]
    assert not verify_endorsements(S, msg, stranger, c.peer_pks, 2)


def test_export_is_canonical(chain):
    c, _ = chain
    c.permit_access(R.pk, "deed-42")
    again, m = make_chain()
    again.update_ledger_data(m["a"], "deed-42", b"owner=alice")
    again.permit_access(R.pk, "deed-42")
    assert c.export() == again.export()


@given(st.lists(st.tuples(st.sampled_from(["x", "y"]), st.binary(max_size=8)), max_size=12))
def test_version_monotonicity(writes):
    c, m = make_chain()
    for key, value in writes:
        c.update_ledger_data(m["a"], key, value)
    for key in c.keys():
        assert [e.data.version for e in c.history(key)] == list(range(len(c.history(key))))


def test_acl_soundness_exhaustive(rng):
    # every combination of grant/revoke: generation succeeds exactly when a live grant exists
    for script in itertools.product(["grant", "revoke", "noop"], repeat=3):
        c, m = make_chain()
        c.update_ledger_data(m["a"], "k", b"v")
        for step in script:
            if step == "grant":
                c.permit_access(R.pk, "k")
            elif step == "revoke" and c.live_entry(R.pk, "k"):
                c.revoke_access(R.pk, "k")
        ct, com, proof = notification(c, R.pk, "k", rng)
        live = c.live_entry(R.pk, "k") is not None
        if live:
            c.record_enc_data_hash_proof(m["b"], "k", R.pk, ct, com, proof)
        else:
            with pytest.raises(NotAuthorized):
                c.record_enc_data_hash_proof(m["b"], "k", R.pk, ct, com, proof)


def test_ledger_data_round_trip():
    ld = LedgerData("k", b"\x00\x01", 7)
    assert LedgerData.from_bytes(ld.to_bytes()) == ld
