"""Offline evaluation of the protocol's security claims over transcripts.

The checker works only from what a transcript records plus the recipient's
secret key, which it re-derives from the scenario seed (it plays the part of
the recipient's own auditor).  It does not reuse the contract adjudication
code: validity of a delivered payload is decided against the exported
private ledger, independently of how SC-Reward judged it.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

from etlc.actors import get_strategy
from etlc.contracts import receipt_message
from etlc.crypto import SymKey, suite_for, sym_decrypt
from etlc.crypto.encoding import DecodeError
from etlc.errors import MalformedTranscript, NotRobustCiphertext
from etlc.harness.scenario import Transcript, recipient_keypair
from etlc.privbc import EndorsedLedgerData, LedgerData, ld_message, verify_endorsements

CLAIMS = ("claim1", "claim2", "claim3", "claim4", "claim5", "claim6")
PROPERTIES = ("interlock", "conservation", "timeout-totality", "absorbing-terminals",
              "challenge-soundness", "first-come-first-serve", "confidentiality")
ALL_CHECKS = CLAIMS + PROPERTIES

TERMINAL = {"Rewarded", "Refunded", "Penalized", "Aborted"}
LATER_THAN_KEY = {"KeyPosted", "SignaturePosted", "ChallengeWindow", "Rewarded"}


@dataclass
class CheckResult:
    check: str
    passed: bool = True
    applicable: int = 0
    failures: List[str] = field(default_factory=list)

    def fail(self, message: str) -> None:
        self.passed = False
        self.failures.append(message)


@dataclass
class Delivery:
    """What the recipient could extract from the public chain for one session."""
    eld_r_prime: Optional[bytes] = None
    plaintext: Optional[bytes] = None
    eld: Optional[EndorsedLedgerData] = None
    genuine: bool = False
    fresh: bool = False

    @property
    def valid(self) -> bool:
        return self.genuine and self.fresh


def _b(hexstr) -> bytes:
    return bytes.fromhex(hexstr) if isinstance(hexstr, str) else b""


class TranscriptView:
    """Indexes one transcript for the checks below."""

    def __init__(self, transcript: Transcript):
        self.t = transcript
        scen = transcript.scenario
        try:
            self.suite = suite_for(scen.get("group", "secp256k1"))
            self.keypair = recipient_keypair(scen)
        except (KeyError, ValueError) as exc:
            raise MalformedTranscript(f"{transcript.name}: header scenario unusable: {exc}") from None
        final = transcript.final
        if self.suite.encode_element(self.keypair.pk).hex() != final["recipient"].get("pk"):
            raise MalformedTranscript(f"{transcript.name}: recipient key does not match the scenario seed")
        self.final = final
        self.ledger = final["ledger"]
        self.recipient = final["recipient"]["account"]
        try:
            self.member_accounts = {m["id"]: m["account"] for m in self.ledger["members"]}
            self.peer_pks = {m["id"]: self.suite.decode_element(_b(m["pk"]))
                             for m in self.ledger["members"] if m["role"] == "peer"}
            self.quorum = self.ledger["quorum"]
        except (KeyError, ValueError) as exc:
            raise MalformedTranscript(f"{transcript.name}: ledger export unusable: {exc}") from None
        self.sessions = {s["session_id"]: s for s in final["sessions"]}
        self.txs = transcript.events("pubbc")
        strategies = scen.get("strategies", {})
        self.r_rational = self._rational("receiver", strategies.get("receiver"))
        self.n_rational = self._rational("notifier", strategies.get("notifier"))
        self.notifier_strategy = (strategies.get("notifier") or {}).get("name", "honest")
        self.racing = bool(scen.get("racer")) or "racer" in get_strategy("notifier", self.notifier_strategy).effects
        self._deliveries: Dict[str, Delivery] = {}

    @staticmethod
    def _rational(role: str, spec) -> bool:
        spec = spec or {"name": "honest"}
        strat = get_strategy(role, spec["name"])
        if spec.get("overrides"):
            strat = strat.with_overrides(spec["overrides"])
        return strat.rational

    # -- lookups -------------------------------------------------------------

    def ok_txs(self, sid: str, op: str) -> List[dict]:
        return [r for r in self.txs if r["op"] == op and r["receipt"]["ok"]
                and r["payload"].get("session_id") == sid]

    def generated(self, sid: str) -> List[dict]:
        return [r for r in self.ok_txs(sid, "record_ciphertext_hash_proof")
                if r["receipt"]["result"].get("state") == "Generated"]

    def key_posted(self, sid: str) -> List[dict]:
        return [r for r in self.ok_txs(sid, "record_key") if r["receipt"]["result"].get("state") == "KeyPosted"]

    def deltas(self, sess: dict) -> Dict[str, int]:
        d: Dict[str, int] = {}
        for account, _purpose, amount in sess["deposits"]:
            d[account] = d.get(account, 0) - amount
        for account, _purpose, amount in sess["payouts"]:
            d[account] = d.get(account, 0) + amount
        return d

    def acl_live(self, object_key: str) -> bool:
        pk = self.final["recipient"]["pk"]
        return any(e["subject"] == pk and e["key"] == object_key and not e["revoked"] for e in self.ledger["acl"])

    def judge(self, plaintext: bytes, sess: dict) -> Delivery:
        """Independent validity oracle: does ``plaintext`` match the private ledger?"""
        out = Delivery(plaintext=plaintext)
        try:
            eld = EndorsedLedgerData.from_bytes(plaintext)
        except (DecodeError, ValueError):
            return out
        out.eld = eld
        history = self.ledger["ledger"].get(eld.data.key, [])
        entry = history[eld.data.version] if 0 <= eld.data.version < len(history) else None
        out.genuine = (
            entry is not None
            and eld.data.key == sess["object_key"]
            and _b(entry["value"]) == eld.data.value
            and verify_endorsements(self.suite, ld_message(LedgerData(eld.data.key, eld.data.value,
                                                                        eld.data.version)),
                                    eld.endorsements, self.peer_pks, self.quorum)
        )
        out.fresh = eld.data.version >= sess["version"]
        return out

    def delivery(self, sid: str) -> Delivery:
        if sid in self._deliveries:
            return self._deliveries[sid]
        out = Delivery()
        gen, key = self.generated(sid), self.key_posted(sid)
        if gen and key:
            try:
                k = SymKey.from_bytes(_b(key[-1]["payload"]["key"]))
                eld_r_prime = sym_decrypt(k, _b(gen[-1]["payload"]["ciphertext"]))
                plaintext = self.suite.det_decrypt_bytes(self.keypair.sk, eld_r_prime)
                out = self.judge(plaintext, self.sessions[sid])
                out.eld_r_prime = eld_r_prime
            except (ValueError, NotRobustCiphertext):
                pass
        self._deliveries[sid] = out
        return out

    def receipt_on_chain(self, sid: str) -> bool:
        d = self.delivery(sid)
        if d.eld_r_prime is None:
            return False
        msg = receipt_message(sid, d.eld_r_prime)
        return any(self.suite.verify_sig(self.keypair.pk, msg, _b(r["payload"].get("signature")))
                   for r in self.ok_txs(sid, "record_signature"))


# -- the checks --------------------------------------------------------------------------

def _claim1(v: TranscriptView, res: CheckResult) -> None:
    # a rational recipient only ends up paying for genuine, fresh, endorsed data
    if not v.r_rational:
        return
    for sid, s in v.sessions.items():
        if s["state"] != "Rewarded":
            continue
        res.applicable += 1
        d = v.delivery(sid)
        if not d.valid:
            res.fail(f"{sid}: rational recipient accepted a payload that is not genuine and fresh")


def _claim2(v: TranscriptView, res: CheckResult) -> None:
    if not v.n_rational:
        return
    for sid, s in v.sessions.items():
        versions = v.ledger["ledger"].get(s["object_key"], [])
        if s["version"] >= len(versions) or not v.acl_live(s["object_key"]):
            continue
        res.applicable += 1
        if not any(state in LATER_THAN_KEY for _, state in s["history"]):
            res.fail(f"{sid}: update {s['version']} never reached KeyPosted")


def _claim3(v: TranscriptView, res: CheckResult) -> None:
    if not v.r_rational:
        return
    for sid, s in v.sessions.items():
        if s["state"] != "Rewarded" or not v.delivery(sid).valid:
            continue
        res.applicable += 1
        p = s["params"]
        d = v.deltas(s)
        members = s["members"]
        gained = sum(d.get(v.member_accounts[m], 0) for m in members)
        if gained != p["reward"] + p["bonus"]:
            res.fail(f"{sid}: members gained {gained}, expected {p['reward'] + p['bonus']}")
        if d.get(v.recipient, 0) != -(p["reward"] + p["bonus"]):
            res.fail(f"{sid}: recipient paid {-d.get(v.recipient, 0)}, expected {p['reward'] + p['bonus']}")
        share, rem = divmod(p["reward"], len(members))
        for m in members:
            want = share + (rem + p["bonus"] if m == s["notifier"] else 0)
            if d.get(v.member_accounts[m], 0) != want:
                res.fail(f"{sid}: member {m} received {d.get(v.member_accounts[m], 0)}, expected {want}")


def _claim4(v: TranscriptView, res: CheckResult) -> None:
    for sid, s in v.sessions.items():
        if v.delivery(sid).plaintext is None:
            continue
        res.applicable += 1
        if v.receipt_on_chain(sid):
            continue
        if v.deltas(s).get(v.recipient, 0) != -s["params"]["escrow"]:
            res.fail(f"{sid}: recipient decrypted without a receipt and without forfeiting A")


def _claim5(v: TranscriptView, res: CheckResult) -> None:
    for sid, s in v.sessions.items():
        d = v.delivery(sid)
        rewarded = s["state"] == "Rewarded"
        res.applicable += 1
        if rewarded and not v.receipt_on_chain(sid):
            res.fail(f"{sid}: members rewarded without the recipient's receipt on chain")
        # each direction protects one side, so it binds when that side is rational
        if (v.r_rational or v.n_rational) and rewarded and not d.valid:
            res.fail(f"{sid}: members rewarded while the recipient holds no valid data")
        if v.n_rational:
            if d.valid and not rewarded:
                compensated = s["forfeited"] and v.deltas(s).get(s["notifier_account"], 0) == s["params"]["escrow"]
                if not compensated:
                    res.fail(f"{sid}: recipient holds valid data; members neither rewarded nor compensated")


def _claim6(v: TranscriptView, res: CheckResult) -> None:
    member_accounts = set(v.member_accounts.values())
    for sid, s in v.sessions.items():
        if v.acl_live(s["object_key"]):
            continue
        res.applicable += 1
        if v.delivery(sid).plaintext is not None:
            res.fail(f"{sid}: unauthorized recipient obtained decryptable data")
        if any(a in member_accounts and purpose == "reward" for a, purpose, _ in s["payouts"]):
            res.fail(f"{sid}: reward paid for an unauthorized recipient")


def _interlock(v: TranscriptView, res: CheckResult) -> None:
    for sid, s in v.sessions.items():
        if s["state"] not in TERMINAL:
            continue
        res.applicable += 1
        d = v.deltas(s)
        p = s["params"]
        notifier = s["notifier_account"]
        others = [v.member_accounts[m] for m in s["members"] if v.member_accounts[m] != notifier]
        held = v.delivery(sid)
        disjuncts = [
            s["state"] == "Rewarded" and held.genuine,
            s["state"] == "Penalized"
            and not any(a in v.member_accounts.values() and purpose == "reward" for a, purpose, _ in s["payouts"])
            and d.get(notifier, 0) == -p["penalty"] and all(d.get(a, 0) == 0 for a in others),
            s["state"] in ("Aborted", "Refunded")
            and (all(x == 0 for x in d.values())
                 or (s["forfeited"] and d.get(v.recipient, 0) == -p["escrow"]
                     and d.get(notifier, 0) == p["escrow"] and len([x for x in d.values() if x]) == 2)),
        ]
        if sum(disjuncts) != 1:
            res.fail(f"{sid}: {s['state']} satisfies {sum(disjuncts)} interlock disjuncts (deltas {d})")


def _conservation(v: TranscriptView, res: CheckResult) -> None:
    f = v.final
    res.applicable += 1
    before = sum(f["initial_balances"].values())
    after = sum(f["balances"].values()) + sum(f["escrow"].values())
    if before != after:
        res.fail(f"total supply changed: {before} -> {after}")
    if f.get("total_supply", after) != after:
        res.fail("recorded total supply disagrees with balances")
    combined: Dict[str, int] = {}
    for sid, s in v.sessions.items():
        deposited = sum(x for _, _, x in s["deposits"])
        paid = sum(x for _, _, x in s["payouts"])
        held = sum(s["held"].values())
        if deposited != paid + held:
            res.fail(f"{sid}: deposits {deposited} != payouts {paid} + held {held}")
        for acct, x in v.deltas(s).items():
            combined[acct] = combined.get(acct, 0) + x
    for acct, start in f["initial_balances"].items():
        if f["balances"].get(acct, 0) - start != combined.get(acct, 0):
            res.fail(f"{acct}: balance change {f['balances'].get(acct, 0) - start} "
                     f"not explained by session flows {combined.get(acct, 0)}")


def _timeouts(v: TranscriptView, res: CheckResult) -> None:
    res.applicable += 1
    for sid, s in v.sessions.items():
        if s["state"] not in TERMINAL:
            res.fail(f"{sid}: still {s['state']} at the end of the run")
        if any(s["held"].values()):
            res.fail(f"{sid}: still holds {s['held']}")
    if any(v.final["escrow"].values()):
        res.fail(f"contracts retain escrow {v.final['escrow']}")


def _absorbing(v: TranscriptView, res: CheckResult) -> None:
    for sid, s in v.sessions.items():
        if s["state"] not in TERMINAL:
            continue
        res.applicable += 1
        closed_at = None
        for r in v.t.events("pubbc", "pubbc-timeout"):
            if r["type"] == "pubbc":
                hit = r["receipt"]["ok"] and r["payload"].get("session_id") == sid
                if hit and closed_at is not None:
                    res.fail(f"{sid}: {r['op']} succeeded after the session was {s['state']}")
                if hit and r["receipt"]["result"].get("state") in TERMINAL:
                    closed_at = r["seq"]
            elif r["event"].get("session_id") == sid:
                if closed_at is not None:
                    res.fail(f"{sid}: timeout fired after the session closed")
                if r["event"].get("to") in TERMINAL:
                    closed_at = r["seq"]


def _soundness(v: TranscriptView, res: CheckResult) -> None:
    for sid, s in v.sessions.items():
        for r in v.ok_txs(sid, "challenge"):
            res.applicable += 1
            verdict = r["receipt"]["result"].get("verdict")
            d = v.delivery(sid)
            dec_eld = _b(r["payload"].get("dec_eld"))
            bound = d.eld_r_prime is not None and dec_eld and \
                v.suite.det_encrypt(v.keypair.pk, dec_eld).to_bytes(v.suite.group) == d.eld_r_prime
            oracle_upholds = bool(bound) and not v.judge(dec_eld, s).valid
            if (verdict == "Upheld") != oracle_upholds:
                res.fail(f"{sid}: contract verdict {verdict}, independent validator says "
                         f"{'Upheld' if oracle_upholds else 'Rejected'}")


def _fcfs(v: TranscriptView, res: CheckResult) -> None:
    for sid in v.sessions:
        res.applicable += 1
        if len(v.generated(sid)) > 1:
            res.fail(f"{sid}: more than one Generated commitment")
        if v.racing:
            dup = [r for r in v.txs if r["op"] == "record_ciphertext_hash_proof"
                   and r["payload"].get("session_id") == sid and r["receipt"]["error"] == "DuplicateSession"]
            if len(v.generated(sid)) + len(dup) > 0 and not (len(v.generated(sid)) == 1 and len(dup) == 1):
                res.fail(f"{sid}: race produced {len(v.generated(sid))} Generated and {len(dup)} DuplicateSession")


def _byte_fields(value, out: List[bytes]) -> None:
    if isinstance(value, str):
        if len(value) >= 32 and len(value) % 2 == 0:
            try:
                out.append(bytes.fromhex(value))
            except ValueError:
                pass
    elif isinstance(value, dict):
        for x in value.values():
            _byte_fields(x, out)
    elif isinstance(value, list):
        for x in value:
            _byte_fields(x, out)


def leaks(v: TranscriptView, records: Iterable[dict], object_key: Optional[str] = None) -> List[str]:
    """Try every public byte field, alone and under every key-sized field, as a ciphertext to sk_R."""
    fields: List[bytes] = []
    for r in records:
        _byte_fields({k: r.get(k) for k in ("payload", "receipt", "event")}, fields)
    fields = list(dict.fromkeys(fields))
    keys = [SymKey.from_bytes(f) for f in fields if len(f) == 48]
    candidates = list(fields)
    for k in keys:
        candidates.extend(sym_decrypt(k, f) for f in fields)
    found = []
    for c in candidates:
        try:
            plaintext = v.suite.det_decrypt_bytes(v.keypair.sk, c)
        except NotRobustCiphertext:
            continue
        try:
            eld = EndorsedLedgerData.from_bytes(plaintext)
        except (DecodeError, ValueError):
            continue
        if object_key is None or eld.data.key == object_key:
            found.append(f"{eld.data.key}@{eld.data.version}")
    return found


def public_records(v: TranscriptView) -> List[dict]:
    """What the public chain actually carries: accepted transactions and timeout events."""
    return [r for r in v.t.events("pubbc", "pubbc-timeout") if r["type"] == "pubbc-timeout" or r["receipt"]["ok"]]


def _confidentiality(v: TranscriptView, res: CheckResult) -> None:
    events = public_records(v)
    for sid, s in v.sessions.items():
        res.applicable += 1
        key = v.key_posted(sid)
        cutoff = key[0]["seq"] if key else None
        prefix = [r for r in events if cutoff is None or r["seq"] < cutoff]
        # data already sold to the recipient by earlier sessions is not a leak
        sold = set()
        for other in v.sessions:
            d = v.delivery(other)
            if d.eld is not None and v.key_posted(other) and (cutoff is None or v.key_posted(other)[0]["seq"] < cutoff):
                sold.add(f"{d.eld.data.key}@{d.eld.data.version}")
        leaked = [x for x in leaks(v, prefix, s["object_key"]) if x not in sold]
        if leaked:
            res.fail(f"{sid}: public data decrypts to {leaked} before any key was released")


_CHECKS = {
    "claim1": _claim1, "claim2": _claim2, "claim3": _claim3, "claim4": _claim4, "claim5": _claim5,
    "claim6": _claim6, "interlock": _interlock, "conservation": _conservation,
    "timeout-totality": _timeouts, "absorbing-terminals": _absorbing, "challenge-soundness": _soundness,
    "first-come-first-serve": _fcfs, "confidentiality": _confidentiality,
}


@dataclass
class ClaimReport:
    results: Dict[str, CheckResult]
    transcripts: int

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results.values())

    def lines(self) -> List[str]:
        out = []
        for name, r in self.results.items():
            out.append(f"{'PASS' if r.passed else 'FAIL'} {name:24s} applicable={r.applicable}")
            out.extend(f"    {msg}" for msg in r.failures[:10])
            if len(r.failures) > 10:
                out.append(f"    ... {len(r.failures) - 10} more")
        out.append(f"{len(self.results)} checks over {self.transcripts} transcripts: "
                   f"{'all passed' if self.passed else 'FAILURES'}")
        return out


def check_transcripts(transcripts: Sequence[Transcript], checks: Sequence[str] = ALL_CHECKS) -> ClaimReport:
    unknown = [c for c in checks if c not in _CHECKS]
    if unknown:
        raise KeyError(f"unknown checks {unknown}; choose from {list(_CHECKS)}")
    results = {c: CheckResult(c) for c in checks}
    for t in transcripts:
        view = TranscriptView(t)
        for c in checks:
            before = len(results[c].failures)
            try:
                _CHECKS[c](view, results[c])
            except (KeyError, TypeError, IndexError) as exc:
                raise MalformedTranscript(f"{t.name}: missing or mistyped field during {c}: {exc!r}") from None
            for i in range(before, len(results[c].failures)):
                results[c].failures[i] = f"[{t.name}] {results[c].failures[i]}"
    return ClaimReport(results, len(transcripts))


def transcript_paths(paths: Iterable[Union[str, os.PathLike]]) -> List[Path]:
    out = []
    for p in map(Path, paths):
        if p.is_dir():
            out.extend(sorted(p.glob("*.jsonl")))
        elif p.exists():
            out.append(p)
        else:
            raise MalformedTranscript(f"{p}: no such transcript or corpus directory")
    return out


def check_claims(target: Union[Transcript, str, os.PathLike, Sequence], checks: Sequence[str] = ALL_CHECKS
                 ) -> ClaimReport:
    """Evaluate the claim properties over a transcript, a file, or a corpus directory."""
    if isinstance(target, Transcript):
        return check_transcripts([target], checks)
    targets = [target] if isinstance(target, (str, os.PathLike)) else list(target)
    if all(isinstance(t, Transcript) for t in targets):
        return check_transcripts(targets, checks)
    return check_transcripts([Transcript.load(p) for p in transcript_paths(targets)], checks)
