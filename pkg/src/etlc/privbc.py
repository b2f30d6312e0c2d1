"""In-process model of the private (consortium) blockchain.

Consensus is an endorsement quorum: a transaction commits when at least
``quorum`` distinct peers sign its canonical message.  The chain holds a
versioned key-value ledger, the access control list contract and the
generation records notifiers produce for external recipients, and serves
access-controlled verifiable reads.

All transactions pass through the chain object one at a time, in call order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from etlc.crypto import DEFAULT_SUITE, CryptoSuite, DetCiphertext, EncProof, KeyPair
from etlc.crypto.encoding import DecodeError, bytes_to_int, int_to_bytes, pack, pack_list, unpack, unpack_list
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

log = logging.getLogger(__name__)

Endorsements = Tuple[Tuple[str, bytes], ...]


class Role(str, Enum):
    PEER = "peer"
    CLIENT = "client"


@dataclass(frozen=True)
class Member:
    id: str
    keypair: KeyPair
    role: Role
    pubbc_account: str
    certificate: bytes = b""

    @property
    def pk(self):
        return self.keypair.pk


@dataclass(frozen=True)
class LedgerData:
    key: str
    value: bytes
    version: int

    def to_bytes(self) -> bytes:
        return pack(b"LD1", self.key.encode(), self.value, int_to_bytes(self.version, 8))

    @classmethod
    def from_bytes(cls, data: bytes) -> "LedgerData":
        magic, key, value, version = unpack(data, 4)
        if magic != b"LD1":
            raise DecodeError("not ledger data")
        try:
            key_str = key.decode()
        except UnicodeDecodeError as exc:
            raise DecodeError("ledger key is not utf-8") from exc
        return cls(key_str, value, bytes_to_int(version, 8))


@dataclass(frozen=True)
class EndorsedLedgerData:
    data: LedgerData
    endorsements: Endorsements

    @property
    def signer_ids(self) -> frozenset:
        return frozenset(mid for mid, _ in self.endorsements)

    def to_bytes(self) -> bytes:
        sigs = pack_list([pack(mid.encode(), sig) for mid, sig in self.endorsements])
        return pack(b"ELD1", self.data.to_bytes(), sigs)

    @classmethod
    def from_bytes(cls, data: bytes) -> "EndorsedLedgerData":
        magic, ld, sigs = unpack(data, 3)
        if magic != b"ELD1":
            raise DecodeError("not endorsed ledger data")
        endorsements = []
        for item in unpack_list(sigs):
            mid, sig = unpack(item, 2)
            try:
                endorsements.append((mid.decode(), sig))
            except UnicodeDecodeError as exc:
                raise DecodeError("member id is not utf-8") from exc
        return cls(LedgerData.from_bytes(ld), tuple(endorsements))


@dataclass
class AccessControlEntry:
    subject_pk: object
    object_key: str
    granted_at_version: int
    revoked: bool = False
    endorsements: Endorsements = ()


@dataclass(frozen=True)
class GenerationRecord:
    object_key: str
    version: int
    subject_pk: object
    notifier_id: str
    ciphertext: DetCiphertext
    commitment: bytes
    opening: bytes
    proof: EncProof
    auth_sigs: Endorsements


@dataclass(frozen=True)
class VRSResponse:
    eld: EndorsedLedgerData
    entry: AccessControlEntry
    confirmations: Endorsements


# -- canonical messages that peers sign ----------------------------------------

def ld_message(ld: LedgerData) -> bytes:
    return pack(b"etlc/ld", ld.to_bytes())


def acl_message(suite: CryptoSuite, subject_pk, object_key: str, version: int, revoked: bool) -> bytes:
    return pack(b"etlc/acl", suite.encode_element(subject_pk), object_key.encode(),
                int_to_bytes(version, 8), b"\x01" if revoked else b"\x00")


def auth_message(suite: CryptoSuite, subject_pk, object_key: str, commitment: bytes) -> bytes:
    """What a quorum signs to authorize one committed notification for a recipient."""
    return pack(b"etlc/auth", suite.encode_element(subject_pk), object_key.encode(), commitment)


def vrs_message(suite: CryptoSuite, subject_pk, eld: EndorsedLedgerData) -> bytes:
    return pack(b"etlc/vrs", suite.encode_element(subject_pk), eld.to_bytes())


def certificate_message(suite: CryptoSuite, member_id: str, pk, role: str) -> bytes:
    return pack(b"etlc/cert", member_id.encode(), suite.encode_element(pk), role.encode())


def verify_endorsements(
    suite: CryptoSuite,
    message: bytes,
    endorsements: Sequence[Tuple[str, bytes]],
    member_pks: Mapping[str, object],
    quorum: int,
) -> bool:
    """True iff the signers are distinct, all registered, all valid, and numerous enough."""
    seen = set()
    for mid, sig in endorsements:
        if mid in seen or mid not in member_pks:
            return False
        if not suite.verify_sig(member_pks[mid], message, sig):
            return False
        seen.add(mid)
    return len(seen) >= quorum


class MembershipIssuer:
    """The single certificate authority of the consortium."""

    def __init__(self, keypair: KeyPair, suite: CryptoSuite = DEFAULT_SUITE):
        self.keypair = keypair
        self.suite = suite

    @property
    def pk(self):
        return self.keypair.pk

    def issue(self, member_id: str, pk, role: Role) -> bytes:
        return self.suite.sign(self.keypair.sk, certificate_message(self.suite, member_id, pk, Role(role).value))

    def verify(self, member_id: str, pk, role: Role, cert: bytes) -> bool:
        return self.suite.verify_sig(self.pk, certificate_message(self.suite, member_id, pk, Role(role).value), cert)


NotificationHook = Callable[[EndorsedLedgerData, List[object]], None]


class PrivateChain:
    def __init__(
        self,
        members: Iterable[Member],
        issuer: MembershipIssuer,
        quorum: Optional[int] = None,
        suite: CryptoSuite = DEFAULT_SUITE,
    ):
        self.suite = suite
        self.issuer = issuer
        self.members: Dict[str, Member] = {}
        for m in members:
            if m.id in self.members:
                raise ValueError(f"duplicate member id {m.id!r}")
            if m.role is Role.PEER and not issuer.verify(m.id, m.pk, m.role, m.certificate):
                raise ValueError(f"peer {m.id!r} has no valid membership certificate")
            self.members[m.id] = m
        self.peers = [m.id for m in self.members.values() if m.role is Role.PEER]
        if not self.peers:
            raise ValueError("a private chain needs at least one peer")
        self.quorum = quorum if quorum is not None else len(self.peers) // 2 + 1
        if not 1 <= self.quorum <= len(self.peers):
            raise ValueError(f"quorum {self.quorum} impossible with {len(self.peers)} peers")
        self._ledger: Dict[str, List[EndorsedLedgerData]] = {}
        self._acl: Dict[Tuple[bytes, str], AccessControlEntry] = {}
        self.records: List[GenerationRecord] = []
        self.log: List[dict] = []
        self._hooks: List[NotificationHook] = []
        # optional shared counter that orders commits against another chain's events
        self.sequencer = None
        self.clock = None

    # -- helpers -----------------------------------------------------------

    @property
    def peer_pks(self) -> Dict[str, object]:
        return {mid: self.members[mid].pk for mid in self.peers}

    def _member(self, who) -> Member:
        mid = who.id if isinstance(who, Member) else who
        member = self.members.get(mid)
        if member is None or (isinstance(who, Member) and member != who):
            raise NotAMember(f"{mid!r} is not a member of the private chain")
        return member

    def _endorse(self, message: bytes, endorsers: Optional[Iterable[str]]) -> Endorsements:
        """Collect peer signatures; only peers count toward the quorum."""
        ids = self.peers if endorsers is None else [e for e in dict.fromkeys(endorsers) if e in self.peers]
        if len(ids) < self.quorum:
            raise QuorumNotMet(f"{len(ids)} endorsements, policy needs {self.quorum}")
        return tuple((mid, self.suite.sign(self.members[mid].keypair.sk, message)) for mid in ids)

    def _pk_key(self, pk) -> bytes:
        return self.suite.encode_element(pk)

    def _commit(self, op: str, **fields) -> None:
        entry = {"op": op, **fields}
        if self.sequencer is not None:
            entry["seq"] = next(self.sequencer)
        if self.clock is not None:
            entry["height"] = self.clock()
        self.log.append(entry)

    def subscribe(self, hook: NotificationHook) -> None:
        self._hooks.append(hook)

    # -- ledger --------------------------------------------------------------

    def head(self, key: str) -> EndorsedLedgerData:
        try:
            return self._ledger[key][-1]
        except KeyError:
            raise UnknownObject(f"no ledger data under {key!r}") from None

    def history(self, key: str) -> List[EndorsedLedgerData]:
        return list(self._ledger.get(key, ()))

    def keys(self) -> List[str]:
        return list(self._ledger)

    def update_ledger_data(self, author, key: str, value: bytes,
                           endorsers: Optional[Iterable[str]] = None) -> EndorsedLedgerData:
        self._member(author)
        version = len(self._ledger.get(key, ()))
        ld = LedgerData(key, bytes(value), version)
        eld = EndorsedLedgerData(ld, self._endorse(ld_message(ld), endorsers))
        self._ledger.setdefault(key, []).append(eld)
        self._commit("update", key=key, version=version, value=ld.value.hex(),
                     author=author.id if isinstance(author, Member) else author,
                     endorsers=sorted(eld.signer_ids))
        subscribers = [e.subject_pk for e in self._acl.values() if e.object_key == key and not e.revoked]
        for hook in list(self._hooks):
            hook(eld, subscribers)
        return eld

    # -- SC-ACL ----------------------------------------------------------------

    def live_entry(self, subject_pk, object_key: str) -> Optional[AccessControlEntry]:
        entry = self._acl.get((self._pk_key(subject_pk), object_key))
        return entry if entry is not None and not entry.revoked else None

    def permit_access(self, subject_pk, object_key: str,
                      endorsers: Optional[Iterable[str]] = None) -> AccessControlEntry:
        head = self.head(object_key)
        existing = self.live_entry(subject_pk, object_key)
        if existing is not None:
            return existing
        version = head.data.version
        sigs = self._endorse(acl_message(self.suite, subject_pk, object_key, version, False), endorsers)
        entry = AccessControlEntry(subject_pk, object_key, version, False, sigs)
        self._acl[(self._pk_key(subject_pk), object_key)] = entry
        self._commit("permit_access", subject=self._pk_key(subject_pk).hex(), key=object_key, version=version)
        return entry

    def revoke_access(self, subject_pk, object_key: str,
                      endorsers: Optional[Iterable[str]] = None) -> AccessControlEntry:
        entry = self.live_entry(subject_pk, object_key)
        if entry is None:
            raise NoLiveEntry("no live grant to revoke")
        sigs = self._endorse(acl_message(self.suite, subject_pk, object_key, entry.granted_at_version, True),
                             endorsers)
        entry.revoked = True
        entry.endorsements = sigs
        self._commit("revoke_access", subject=self._pk_key(subject_pk).hex(), key=object_key)
        return entry

    def record_enc_data_hash_proof(
        self,
        notifier,
        object_key: str,
        subject_pk,
        ciphertext: DetCiphertext,
        commitment,
        proof: EncProof,
        endorsers: Optional[Iterable[str]] = None,
    ) -> GenerationRecord:
        """Validate a notifier's encrypted notification and co-sign its authorization."""
        member = self._member(notifier)
        head = self.head(object_key)
        if self.live_entry(subject_pk, object_key) is None:
            raise NotAuthorized("recipient has no live access grant for this object")
        suite = self.suite
        ct_bytes = ciphertext.to_bytes(suite.group)
        if not suite.verify_commit(commitment.value, ct_bytes, commitment.opening):
            raise BadCiphertext("commitment does not open to the ciphertext")
        if suite.det_encrypt(subject_pk, head.to_bytes()) != ciphertext:
            for older in self._ledger[object_key][:-1]:
                if suite.det_encrypt(subject_pk, older.to_bytes()) == ciphertext:
                    raise StaleVersion(f"ciphertext is of version {older.data.version}, head is {head.data.version}")
            raise BadCiphertext("ciphertext is not the recipient's encryption of the head")
        if not suite.verify_enc_proof(subject_pk, ciphertext.kem, commitment.value, proof):
            raise BadProof("well-formedness proof does not verify")
        auth = self._endorse(auth_message(suite, subject_pk, object_key, commitment.value), endorsers)
        record = GenerationRecord(object_key, head.data.version, subject_pk, member.id, ciphertext,
                                  commitment.value, commitment.opening, proof, auth)
        self.records.append(record)
        self._commit("record_enc_data_hash_proof", key=object_key, version=head.data.version,
                     subject=self._pk_key(subject_pk).hex(), notifier=member.id,
                     commitment=commitment.value.hex(), endorsers=sorted(mid for mid, _ in auth))
        return record

    # -- verifiable read service --------------------------------------------

    def vrs_query(self, requestor_pk, object_key: str) -> VRSResponse:
        entry = self.live_entry(requestor_pk, object_key)
        if entry is None:
            raise AccessDenied("requestor is not on the access list for this object")
        eld = self.head(object_key)
        confirmations = self._endorse(vrs_message(self.suite, requestor_pk, eld), None)
        return VRSResponse(eld, entry, confirmations)

    def verify_vrs(self, requestor_pk, response: VRSResponse) -> bool:
        """Recipient-side check of a read: quorum on the data and on the confirmation."""
        pks = self.peer_pks
        return (verify_endorsements(self.suite, ld_message(response.eld.data), response.eld.endorsements,
                                    pks, self.quorum)
                and verify_endorsements(self.suite, vrs_message(self.suite, requestor_pk, response.eld),
                                        response.confirmations, pks, self.quorum))

    # -- export --------------------------------------------------------------

    def export(self) -> dict:
        enc = self._pk_key
        return {
            "quorum": self.quorum,
            "issuer": enc(self.issuer.pk).hex(),
            "members": [
                {"id": m.id, "role": m.role.value, "pk": enc(m.pk).hex(), "account": m.pubbc_account}
                for m in self.members.values()
            ],
            "ledger": {
                key: [
                    {"version": e.data.version, "value": e.data.value.hex(),
                     "endorsements": [[mid, sig.hex()] for mid, sig in e.endorsements]}
                    for e in elds
                ]
                for key, elds in sorted(self._ledger.items())
            },
            "acl": [
                {"subject": enc(e.subject_pk).hex(), "key": e.object_key,
                 "granted_at_version": e.granted_at_version, "revoked": e.revoked}
                for e in self._acl.values()
            ],
            "records": [
                {"key": r.object_key, "version": r.version, "subject": enc(r.subject_pk).hex(),
                 "notifier": r.notifier_id, "ciphertext": r.ciphertext.to_bytes(self.suite.group).hex(),
                 "commitment": r.commitment.hex(), "opening": r.opening.hex(),
                 "auth_sigs": [[mid, sig.hex()] for mid, sig in r.auth_sigs]}
                for r in self.records
            ],
        }
