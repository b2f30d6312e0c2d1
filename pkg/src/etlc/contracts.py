"""Public-chain contracts of the notification protocol.

``SC-Reward`` owns the notification sessions: recipient bootstrap, the
notifier's committed ciphertext, the reward claim, the challenge and the
final settlement.  ``SC-R-Sign`` and ``SC-N-Key`` are the interlocking pair
of the key-transfer stage: the notifier escrows ``A`` refundable against the
recipient's receipt signature, the recipient escrows ``A`` payable against a
key that opens the committed ciphertext.

The three contracts share one :class:`EtlcState`; the chain snapshots it as a
whole, so a rejected call on any of them leaves every session untouched.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from etlc.crypto import DEFAULT_SUITE, CryptoSuite, DetCiphertext, EncProof, SymKey, sym_decrypt, tagged_hash
from etlc.crypto.encoding import DecodeError, pack
from etlc.errors import (
    BadAuthSigs,
    ChallengeUpheld,
    DeadlineTooTight,
    DuplicateSession,
    EmptyMessage,
    InsufficientFunds,
    MalformedPayload,
    NotRegistered,
    PastDeadline,
    SignatureMismatch,
    SignContractMissing,
    BadSignature,
    Unauthorized,
    UnknownSession,
    WindowClosed,
    WrongState,
)
from etlc.privbc import EndorsedLedgerData, Role, auth_message, certificate_message, ld_message, verify_endorsements
from etlc.pubbc import CallContext, Contract, PublicChain

log = logging.getLogger(__name__)

SC_REWARD = "SC-Reward"
SC_R_SIGN = "SC-R-Sign"
SC_N_KEY = "SC-N-Key"


class SessionState(str, Enum):
    INIT = "Init"
    GENERATED = "Generated"
    KEY_POSTED = "KeyPosted"
    SIGNATURE_POSTED = "SignaturePosted"
    CHALLENGE_WINDOW = "ChallengeWindow"
    REWARDED = "Rewarded"
    REFUNDED = "Refunded"
    PENALIZED = "Penalized"
    ABORTED = "Aborted"


TERMINAL = frozenset({SessionState.REWARDED, SessionState.REFUNDED, SessionState.PENALIZED, SessionState.ABORTED})


class Verdict(str, Enum):
    UPHELD = "Upheld"
    REJECTED = "Rejected"


@dataclass(frozen=True)
class EconomicParams:
    reward: int = 10
    escrow: int = 100
    penalty: int = 50
    bonus: int = 3


@dataclass(frozen=True)
class Deadlines:
    """Block-height offsets.  ``key`` and ``sign`` count from session creation."""
    key: int = 10
    sign: int = 40
    challenge: int = 20
    gap: int = 20


@dataclass
class ChallengeRecord:
    session_id: str
    submitted_dec_eld: bytes
    verdict: Verdict
    reasons: List[str]


@dataclass
class NotificationSession:
    session_id: str
    object_key: str
    version: int
    recipient_pk: Any
    recipient_account: str
    member_ids: Tuple[str, ...]
    created_at: int
    params: EconomicParams
    t_key: int
    t_sig: int
    state: SessionState = SessionState.INIT
    history: List[Tuple[int, str]] = field(default_factory=list)
    notifier_id: Optional[str] = None
    notifier_account: Optional[str] = None
    ciphertext2: Optional[bytes] = None
    kem: Optional[bytes] = None
    commitment: Optional[bytes] = None
    opening: Optional[bytes] = None
    proof: Optional[bytes] = None
    auth_sigs: Tuple[Tuple[str, bytes], ...] = ()
    key: Optional[bytes] = None
    eld_r_prime: Optional[bytes] = None
    receipt_sig: Optional[bytes] = None
    t_challenge: Optional[int] = None
    sign_armed: bool = False
    key_armed: bool = False
    challenge: Optional[ChallengeRecord] = None
    forfeited: bool = False
    outcome_reason: str = ""
    # purpose -> amount currently held for this session
    held: Dict[str, int] = field(default_factory=dict)
    deposits: List[Tuple[str, str, int]] = field(default_factory=list)
    payouts: List[Tuple[str, str, int]] = field(default_factory=list)

    @property
    def terminal(self) -> bool:
        return self.state in TERMINAL

    def summary(self, suite: CryptoSuite) -> Dict[str, Any]:
        return {
            "session_id": self.session_id,
            "object_key": self.object_key,
            "version": self.version,
            "recipient_pk": suite.encode_element(self.recipient_pk).hex(),
            "recipient_account": self.recipient_account,
            "notifier": self.notifier_id,
            "notifier_account": self.notifier_account,
            "members": list(self.member_ids),
            "state": self.state.value,
            "history": [[h, s] for h, s in self.history],
            "reason": self.outcome_reason,
            "forfeited": self.forfeited,
            "deadlines": {"t_key": self.t_key, "t_sig": self.t_sig, "t_challenge": self.t_challenge},
            "params": {"reward": self.params.reward, "escrow": self.params.escrow,
                       "penalty": self.params.penalty, "bonus": self.params.bonus},
            "challenge": None if self.challenge is None else {
                "verdict": self.challenge.verdict.value, "reasons": self.challenge.reasons,
                "dec_eld": self.challenge.submitted_dec_eld.hex()},
            "held": dict(sorted(self.held.items())),
            "deposits": [list(d) for d in self.deposits],
            "payouts": [list(p) for p in self.payouts],
        }


@dataclass
class RegisteredMember:
    member_id: str
    pk: Any
    role: str
    account: str


@dataclass
class EtlcState:
    members: Dict[str, RegisteredMember] = field(default_factory=dict)
    sessions: Dict[str, NotificationSession] = field(default_factory=dict)
    order: List[str] = field(default_factory=list)
    # (pk bytes, key, version) -> session id, for first-come-first-serve
    slots: Dict[Tuple[bytes, str, int], str] = field(default_factory=dict)


# escrow purpose -> contract that holds it
_HOLDER = {"reward": SC_REWARD, "penalty": SC_REWARD, "sign": SC_R_SIGN, "key": SC_N_KEY}


def session_id_for(suite: CryptoSuite, recipient_pk, object_key: str, version: int) -> str:
    return tagged_hash("session", suite.encode_element(recipient_pk), object_key.encode(),
                       version.to_bytes(8, "big")).hex()[:16]


def receipt_message(session_id: str, eld_r_prime: bytes) -> bytes:
    """The bytes a recipient signs to acknowledge the decrypted ciphertext."""
    return pack(b"etlc/receipt", session_id.encode(), eld_r_prime)


def validate_dec_eld(
    suite: CryptoSuite,
    session: NotificationSession,
    dec_eld: bytes,
    member_pks: Dict[str, Any],
    quorum: int,
) -> Tuple[bool, List[str]]:
    """Adjudicate a claimed decryption of the delivered ciphertext.

    Returns ``(bound, problems)``.  ``bound`` says whether ``dec_eld``
    re-encrypts to the ciphertext the recipient received; only then do the
    ``problems`` (empty when the notification is valid) mean anything.
    """
    try:
        bound = suite.det_encrypt(session.recipient_pk, dec_eld).to_bytes(suite.group) == session.eld_r_prime
    except EmptyMessage:
        bound = False
    if not bound:
        return False, ["dec_eld does not re-encrypt to the delivered ciphertext"]
    try:
        eld = EndorsedLedgerData.from_bytes(dec_eld)
    except DecodeError as exc:
        return True, [f"malformed: {exc}"]
    problems = []
    if eld.data.key != session.object_key:
        problems.append(f"wrong object: {eld.data.key!r}")
    if not verify_endorsements(suite, ld_message(eld.data), eld.endorsements, member_pks, quorum):
        problems.append("ledger endorsements do not meet the quorum under registered keys")
    auth_ids = frozenset(mid for mid, _ in session.auth_sigs)
    if eld.signer_ids != auth_ids:
        problems.append("endorser set differs from the authorization signers")
    msg = auth_message(suite, session.recipient_pk, session.object_key, session.commitment or b"")
    if not verify_endorsements(suite, msg, session.auth_sigs, member_pks, quorum):
        problems.append("authorization signatures do not verify")
    if eld.data.version < session.version:
        problems.append(f"stale version {eld.data.version} < {session.version}")
    return True, problems


class _EtlcContract(Contract):
    def __init__(self, shared: EtlcState, suite: CryptoSuite, quorum: int, issuer_pk,
                 deadlines: Deadlines, defer_proof_check: bool):
        super().__init__()
        self.state = shared
        self.suite = suite
        self.quorum = quorum
        self.issuer_pk = issuer_pk
        self.deadlines = deadlines
        self.defer_proof_check = defer_proof_check

    # -- shared helpers ----------------------------------------------------

    def _session(self, payload) -> NotificationSession:
        sid = payload.get("session_id")
        sess = self.state.sessions.get(sid)
        if sess is None:
            raise UnknownSession(f"no session {sid!r}")
        return sess

    def _member_pks(self, sess: NotificationSession) -> Dict[str, Any]:
        return {mid: self.state.members[mid].pk for mid in sess.member_ids
                if self.state.members[mid].role == Role.PEER.value}

    @staticmethod
    def _bytes(payload, name: str, length: Optional[int] = None) -> bytes:
        value = payload.get(name)
        if isinstance(value, str):
            try:
                value = bytes.fromhex(value)
            except ValueError:
                raise MalformedPayload(f"{name} is not hex") from None
        if not isinstance(value, (bytes, bytearray)):
            raise MalformedPayload(f"{name} must be bytes")
        if length is not None and len(value) != length:
            raise MalformedPayload(f"{name} must be {length} bytes")
        return bytes(value)

    def _require_sender(self, ctx: CallContext, account: Optional[str]) -> None:
        if ctx.sender != account:
            raise Unauthorized(f"{ctx.sender} may not call this for the session")

    @staticmethod
    def _require_state(sess: NotificationSession, *states: SessionState) -> None:
        if sess.state not in states:
            raise WrongState(f"session is {sess.state.value}, needs {'/'.join(s.value for s in states)}")

    @staticmethod
    def _enter(sess: NotificationSession, state: SessionState, height: int, reason: str = "") -> None:
        sess.state = state
        sess.history.append((height, state.value))
        if reason:
            sess.outcome_reason = reason

    def _deposit(self, ctx: CallContext, sess: NotificationSession, purpose: str, account: str, amount: int):
        if amount <= 0:
            return
        ctx.for_contract(_HOLDER[purpose]).lock(amount, account)
        sess.held[purpose] = sess.held.get(purpose, 0) + amount
        sess.deposits.append((account, purpose, amount))

    def _payout(self, ctx: CallContext, sess: NotificationSession, purpose: str, account: str,
                amount: Optional[int] = None):
        amount = sess.held.get(purpose, 0) if amount is None else amount
        if amount <= 0:
            return
        if sess.held.get(purpose, 0) < amount:
            raise InsufficientFunds(f"session holds {sess.held.get(purpose, 0)} for {purpose}")
        ctx.for_contract(_HOLDER[purpose]).pay(account, amount)
        sess.held[purpose] -= amount
        sess.payouts.append((account, purpose, amount))

    def _refund_all(self, ctx: CallContext, sess: NotificationSession) -> None:
        owners = {"reward": sess.recipient_account, "key": sess.recipient_account,
                  "penalty": sess.notifier_account, "sign": sess.notifier_account}
        for purpose in ("reward", "penalty", "sign", "key"):
            self._payout(ctx, sess, purpose, owners[purpose])

    def _settle(self, ctx: CallContext, sess: NotificationSession) -> Dict[str, Any]:
        """Close an expired challenge window: reward members, or penalize."""
        suite = self.suite
        receipt_ok = suite.verify_sig(sess.recipient_pk, receipt_message(sess.session_id, sess.eld_r_prime),
                                      sess.receipt_sig or b"")
        proof_ok = True
        if self.defer_proof_check:
            try:
                ct = DetCiphertext.from_bytes(suite.group, sess.eld_r_prime)
                proof = EncProof.from_bytes(suite.group, sess.proof)
                proof_ok = suite.verify_enc_proof(sess.recipient_pk, ct.kem, sess.commitment, proof)
            except DecodeError:
                proof_ok = False
        if not (receipt_ok and proof_ok):
            reason = "receipt signature invalid" if not receipt_ok else "deferred proof check failed"
            self._payout(ctx, sess, "penalty", sess.recipient_account)
            self._payout(ctx, sess, "reward", sess.recipient_account)
            self._refund_all(ctx, sess)
            self._enter(sess, SessionState.PENALIZED, ctx.height, reason)
            return {"state": sess.state.value, "reason": reason}
        p = sess.params
        members = sorted(sess.member_ids)
        share, remainder = divmod(p.reward, len(members))
        for mid in members:
            amount = share + (remainder if mid == sess.notifier_id else 0)
            self._payout(ctx, sess, "reward", self.state.members[mid].account, amount)
        self._payout(ctx, sess, "reward", sess.notifier_account, p.bonus)
        self._refund_all(ctx, sess)  # over-deposit goes back to the recipient
        self._enter(sess, SessionState.REWARDED, ctx.height, "challenge window closed")
        return {"state": sess.state.value, "share": share, "bonus": p.bonus + remainder}


class RewardContract(_EtlcContract):
    name = SC_REWARD

    def op_register_member(self, ctx: CallContext, payload) -> Dict[str, Any]:
        mid = payload.get("member_id")
        role = payload.get("role")
        if not isinstance(mid, str) or role not in (Role.PEER.value, Role.CLIENT.value):
            raise MalformedPayload("member_id and role required")
        try:
            pk = self.suite.decode_element(self._bytes(payload, "pk"))
        except ValueError:
            raise MalformedPayload("pk is not a group element") from None
        cert = self._bytes(payload, "certificate")
        if not self.suite.verify_sig(self.issuer_pk, certificate_message(self.suite, mid, pk, role), cert):
            raise NotRegistered("membership certificate does not verify")
        if mid in self.state.members:
            raise NotRegistered(f"{mid} already registered")
        self.state.members[mid] = RegisteredMember(mid, pk, role, ctx.sender)
        return {"member_id": mid}

    def op_record_pubkey(self, ctx: CallContext, payload) -> Dict[str, Any]:
        suite = self.suite
        try:
            pk = suite.decode_element(self._bytes(payload, "recipient_pk"))
        except ValueError:
            raise MalformedPayload("recipient_pk is not a group element") from None
        key, version = payload.get("object_key"), payload.get("version")
        if not isinstance(key, str) or not isinstance(version, int) or version < 0:
            raise MalformedPayload("object_key and a non-negative version are required")
        p = EconomicParams(**{k: int(payload.get(k, getattr(EconomicParams(), k)))
                              for k in ("reward", "escrow", "penalty", "bonus")})
        deposit = payload.get("deposit", p.reward + p.bonus)
        if not self.state.members:
            raise NotRegistered("no private-chain members registered")
        slot = (suite.encode_element(pk), key, version)
        if slot in self.state.slots:
            raise DuplicateSession("a session already exists for this recipient, object and version")
        if deposit < p.reward + p.bonus:
            raise InsufficientFunds(f"deposit {deposit} below reward plus bonus {p.reward + p.bonus}")
        sid = session_id_for(suite, pk, key, version)
        d = self.deadlines
        sess = NotificationSession(
            session_id=sid, object_key=key, version=version, recipient_pk=pk, recipient_account=ctx.sender,
            member_ids=tuple(sorted(self.state.members)), created_at=ctx.height, params=p,
            t_key=ctx.height + d.key, t_sig=ctx.height + d.sign,
        )
        self._enter(sess, SessionState.INIT, ctx.height)
        self._deposit(ctx, sess, "reward", ctx.sender, deposit)
        self.state.sessions[sid] = sess
        self.state.order.append(sid)
        self.state.slots[slot] = sid
        return {"session_id": sid, "state": sess.state.value, "escrow": deposit,
                "t_key": sess.t_key, "t_sig": sess.t_sig}

    def op_record_ciphertext_hash_proof(self, ctx: CallContext, payload) -> Dict[str, Any]:
        sess = self._session(payload)
        caller = next((m for m in self.state.members.values() if m.account == ctx.sender), None)
        if caller is None:
            raise NotRegistered(f"{ctx.sender} is not a registered private-chain member")
        if sess.notifier_id is not None and sess.notifier_id != caller.member_id and not sess.terminal:
            raise DuplicateSession(f"session already taken by notifier {sess.notifier_id}")
        self._require_state(sess, SessionState.INIT)
        if ctx.height > sess.t_key:
            raise PastDeadline("generation deadline passed")
        suite = self.suite
        ciphertext2 = self._bytes(payload, "ciphertext")
        commitment = self._bytes(payload, "commitment", 32)
        opening = self._bytes(payload, "opening", 32)
        kem_bytes = self._bytes(payload, "kem")
        proof_bytes = self._bytes(payload, "proof")
        try:
            auth = tuple((mid, bytes.fromhex(sig) if isinstance(sig, str) else bytes(sig))
                         for mid, sig in payload.get("auth_sigs", ()))
        except (TypeError, ValueError):
            raise MalformedPayload("auth_sigs must be (member, signature) pairs") from None
        sess.notifier_id = caller.member_id
        sess.notifier_account = ctx.sender
        if not self.defer_proof_check:
            try:
                kem = suite.decode_element(kem_bytes)
                proof_ok = suite.verify_enc_proof(sess.recipient_pk, kem, commitment,
                                                  EncProof.from_bytes(suite.group, proof_bytes))
            except (ValueError, DecodeError):
                proof_ok = False
            if not proof_ok:
                self._refund_all(ctx, sess)
                self._enter(sess, SessionState.ABORTED, ctx.height, "BadProof")
                return {"state": sess.state.value, "reason": "BadProof"}
        msg = auth_message(suite, sess.recipient_pk, sess.object_key, commitment)
        if not verify_endorsements(suite, msg, auth, self._member_pks(sess), self.quorum):
            raise BadAuthSigs("authorization signatures do not meet the quorum")
        self._deposit(ctx, sess, "penalty", ctx.sender, sess.params.penalty)
        sess.ciphertext2, sess.commitment, sess.opening = ciphertext2, commitment, opening
        sess.kem, sess.proof, sess.auth_sigs = kem_bytes, proof_bytes, auth
        self._enter(sess, SessionState.GENERATED, ctx.height)
        return {"state": sess.state.value, "t_key": sess.t_key}

    def op_claim_reward(self, ctx: CallContext, payload) -> Dict[str, Any]:
        sess = self._session(payload)
        self._require_sender(ctx, sess.notifier_account)
        self._require_state(sess, SessionState.SIGNATURE_POSTED)
        sig = self._bytes(payload, "receipt_sig")
        if sig != sess.receipt_sig:
            raise SignatureMismatch("receipt does not match the recorded signature")
        sess.t_challenge = ctx.height + self.deadlines.challenge
        self._enter(sess, SessionState.CHALLENGE_WINDOW, ctx.height)
        return {"state": sess.state.value, "t_challenge": sess.t_challenge}

    def op_challenge(self, ctx: CallContext, payload) -> Dict[str, Any]:
        sess = self._session(payload)
        self._require_sender(ctx, sess.recipient_account)
        self._require_state(sess, SessionState.CHALLENGE_WINDOW)
        if ctx.height > sess.t_challenge:
            raise WindowClosed("challenge window has closed")
        if sess.challenge is not None:
            raise WrongState("a challenge was already submitted for this session")
        dec_eld = self._bytes(payload, "dec_eld")
        bound, problems = validate_dec_eld(self.suite, sess, dec_eld, self._member_pks(sess), self.quorum)
        if bound and problems:
            sess.challenge = ChallengeRecord(sess.session_id, dec_eld, Verdict.UPHELD, problems)
            self._payout(ctx, sess, "penalty", sess.recipient_account)
            self._payout(ctx, sess, "reward", sess.recipient_account)
            self._refund_all(ctx, sess)
            self._enter(sess, SessionState.PENALIZED, ctx.height, "challenge upheld")
        else:
            reasons = problems if not bound else ["notification is valid"]
            sess.challenge = ChallengeRecord(sess.session_id, dec_eld, Verdict.REJECTED, reasons)
        return {"verdict": sess.challenge.verdict.value, "reasons": sess.challenge.reasons,
                "state": sess.state.value}

    def op_finalize(self, ctx: CallContext, payload) -> Dict[str, Any]:
        sess = self._session(payload)
        if sess.challenge is not None and sess.challenge.verdict is Verdict.UPHELD:
            raise ChallengeUpheld("an upheld challenge voids the reward")
        self._require_state(sess, SessionState.CHALLENGE_WINDOW)
        if ctx.height <= sess.t_challenge:
            raise WrongState(f"challenge window open until height {sess.t_challenge}")
        return self._settle(ctx, sess)

    def on_tick(self, ctx: CallContext) -> List[Dict[str, Any]]:
        events = []
        h = ctx.height
        for sid in self.state.order:
            sess = self.state.sessions[sid]
            before = sess.state
            if sess.state in (SessionState.INIT, SessionState.GENERATED) and h > sess.t_key:
                self._refund_all(ctx, sess)
                reason = "no generation before t_key" if before is SessionState.INIT else "no key before t_key"
                self._enter(sess, SessionState.REFUNDED, h, reason)
            elif sess.state is SessionState.KEY_POSTED and h > sess.t_sig:
                # recipient withheld its receipt: the notifier keeps A
                sess.forfeited = True
                self._refund_all(ctx, sess)
                self._enter(sess, SessionState.REFUNDED, h, "no receipt signature before t_sig")
            elif sess.state is SessionState.SIGNATURE_POSTED and h > sess.t_sig:
                sess.t_challenge = h + self.deadlines.challenge
                self._enter(sess, SessionState.CHALLENGE_WINDOW, h, "reward claim opened at t_sig")
            elif sess.state is SessionState.CHALLENGE_WINDOW and h > sess.t_challenge:
                self._settle(ctx, sess)
            if sess.state is not before:
                events.append({"session_id": sid, "from": before.value, "to": sess.state.value,
                               "reason": sess.outcome_reason})
        return events


class SignContract(_EtlcContract):
    """SC-R-Sign: notifier's ``A``, released to the recipient against a receipt."""

    name = SC_R_SIGN

    def op_install(self, ctx: CallContext, payload) -> Dict[str, Any]:
        sess = self._session(payload)
        self._require_sender(ctx, sess.notifier_account)
        self._require_state(sess, SessionState.GENERATED)
        if sess.sign_armed:
            raise WrongState("sign contract already installed")
        deadline = payload.get("deadline", sess.t_sig)
        if not isinstance(deadline, int):
            raise MalformedPayload("deadline must be a block height")
        if deadline < sess.t_key + self.deadlines.gap:
            raise DeadlineTooTight(f"t' = {deadline} must be at least t + {self.deadlines.gap} = "
                                   f"{sess.t_key + self.deadlines.gap}")
        self._deposit(ctx, sess, "sign", ctx.sender, sess.params.escrow)
        sess.t_sig = deadline
        sess.sign_armed = True
        return {"armed": True, "escrow": sess.params.escrow, "t_sig": sess.t_sig}

    def op_record_signature(self, ctx: CallContext, payload) -> Dict[str, Any]:
        sess = self._session(payload)
        self._require_sender(ctx, sess.recipient_account)
        self._require_state(sess, SessionState.KEY_POSTED)
        if ctx.height > sess.t_sig:
            raise PastDeadline("receipt deadline passed")
        sig = self._bytes(payload, "signature")
        if not self.suite.verify_sig(sess.recipient_pk, receipt_message(sess.session_id, sess.eld_r_prime), sig):
            raise BadSignature("receipt signature does not verify under the recipient key")
        sess.receipt_sig = sig
        self._payout(ctx, sess, "sign", sess.recipient_account)
        self._enter(sess, SessionState.SIGNATURE_POSTED, ctx.height)
        return {"state": sess.state.value}


class KeyContract(_EtlcContract):
    """SC-N-Key: recipient's ``A``, released to the notifier against a valid key."""

    name = SC_N_KEY

    def op_install(self, ctx: CallContext, payload) -> Dict[str, Any]:
        sess = self._session(payload)
        self._require_sender(ctx, sess.recipient_account)
        self._require_state(sess, SessionState.GENERATED)
        if not sess.sign_armed:
            raise SignContractMissing("SC-R-Sign must be installed first")
        if sess.key_armed:
            raise WrongState("key contract already installed")
        deadline = payload.get("deadline", sess.t_key)
        if not isinstance(deadline, int):
            raise MalformedPayload("deadline must be a block height")
        if deadline < ctx.height or deadline + self.deadlines.gap > sess.t_sig:
            raise DeadlineTooTight(f"t = {deadline} leaves no room before t' = {sess.t_sig}")
        self._deposit(ctx, sess, "key", ctx.sender, sess.params.escrow)
        sess.t_key = deadline
        sess.key_armed = True
        return {"armed": True, "escrow": sess.params.escrow, "t_key": sess.t_key}

    def op_record_key(self, ctx: CallContext, payload) -> Dict[str, Any]:
        sess = self._session(payload)
        self._require_sender(ctx, sess.notifier_account)
        self._require_state(sess, SessionState.GENERATED)
        if not (sess.sign_armed and sess.key_armed):
            raise WrongState("both interlocking contracts must be installed")
        if ctx.height > sess.t_key:
            raise PastDeadline("key deadline passed")
        try:
            k = SymKey.from_bytes(self._bytes(payload, "key"))
        except ValueError:
            raise MalformedPayload("key must be 48 bytes") from None
        eld_r_prime = sym_decrypt(k, sess.ciphertext2)
        reason = None
        if not self.suite.verify_commit(sess.commitment, eld_r_prime, sess.opening):
            reason = "HashMismatch"
        elif not self.defer_proof_check:
            try:
                kem = DetCiphertext.from_bytes(self.suite.group, eld_r_prime).kem
                if self.suite.encode_element(kem) != sess.kem:
                    reason = "KemMismatch"
            except DecodeError:
                reason = "KemMismatch"
        sess.key = k.to_bytes()
        if reason:
            self._refund_all(ctx, sess)
            self._enter(sess, SessionState.ABORTED, ctx.height, reason)
            return {"state": sess.state.value, "reason": reason}
        sess.eld_r_prime = eld_r_prime
        self._payout(ctx, sess, "key", sess.notifier_account)
        self._enter(sess, SessionState.KEY_POSTED, ctx.height)
        return {"state": sess.state.value, "t_sig": sess.t_sig}


@dataclass
class EtlcDeployment:
    reward: RewardContract
    sign: SignContract
    key: KeyContract

    @property
    def state(self) -> EtlcState:
        return self.reward.state

    def session(self, session_id: str) -> NotificationSession:
        return self.reward.state.sessions[session_id]

    def sessions(self) -> List[NotificationSession]:
        st = self.reward.state
        return [st.sessions[sid] for sid in st.order]


def deploy_etlc(chain: PublicChain, issuer_pk, quorum: int, suite: CryptoSuite = DEFAULT_SUITE,
                deadlines: Deadlines = Deadlines(), defer_proof_check: bool = False) -> EtlcDeployment:
    """Install SC-Reward, SC-R-Sign and SC-N-Key, in that order, over a shared state."""
    shared = EtlcState()
    args = (shared, suite, quorum, issuer_pk, deadlines, defer_proof_check)
    dep = EtlcDeployment(RewardContract(*args), SignContract(*args), KeyContract(*args))
    for c in (dep.reward, dep.sign, dep.key):
        chain.deploy(c)
    return dep
