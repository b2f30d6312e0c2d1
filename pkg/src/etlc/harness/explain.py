"""Stage-by-stage narrative of one session, reconstructed from a transcript."""

from __future__ import annotations

from typing import List

from etlc.harness.scenario import Transcript

STAGE_OF = {
    "permit_access": "Bootstrap", "record_pubkey": "Bootstrap",
    "update": "Generation", "record_enc_data_hash_proof": "Generation", "record_ciphertext_hash_proof": "Generation",
    "install": "Key transfer", "record_key": "Key transfer", "record_signature": "Key transfer",
    "claim_reward": "Verification", "challenge": "Verification", "finalize": "Verification",
}


def _short(value, n: int = 16) -> str:
    s = str(value)
    return s if len(s) <= n else s[:n] + "..."


def _describe_tx(r: dict) -> str:
    rec = r["receipt"]
    where = f"{r['contract']}.{r['op']}"
    if not rec["ok"]:
        return f"{where} by {r['sender']} rejected: {rec['error']} ({rec['detail']})"
    result = rec["result"]
    extra = ""
    if r["op"] == "challenge":
        extra = f" verdict={result.get('verdict')} reasons={result.get('reasons')}"
    elif "state" in result:
        extra = f" -> {result['state']}"
        if result.get("reason"):
            extra += f" ({result['reason']})"
    return f"{where} by {r['sender']}{extra}"


def find_session(transcript: Transcript, session_id: str):
    for s in transcript.final["sessions"]:
        if s["session_id"] == session_id or s["session_id"].startswith(session_id):
            return s
    return None


def explain(transcript: Transcript, session_id: str) -> List[str]:
    sess = find_session(transcript, session_id)
    if sess is None:
        raise KeyError(f"no session {session_id!r} in {transcript.name}")
    sid = sess["session_id"]
    lines = [f"session {sid}: {sess['recipient_account']} buys {sess['object_key']} version {sess['version']}",
             f"  scenario {transcript.name}; notifier {sess['notifier'] or '-'}; final state {sess['state']}"
             + (f" ({sess['reason']})" if sess["reason"] else "")]
    stage = None
    for r in transcript.events():
        if r["type"] == "pubbc":
            if r["payload"].get("session_id") != sid and r["receipt"]["result"].get("session_id") != sid:
                continue
            text = _describe_tx(r)
            name = STAGE_OF.get(r["op"], "Other")
        elif r["type"] == "pubbc-timeout":
            if r["event"].get("session_id") != sid:
                continue
            ev = r["event"]
            text = f"timeout on {r['contract']}: {ev['from']} -> {ev['to']} ({ev['reason']})"
            name = "Timeout"
        else:
            if r.get("key") != sess["object_key"]:
                continue
            if r["op"] == "update" and r["version"] != sess["version"]:
                continue
            if r["op"] == "record_enc_data_hash_proof" and r["version"] > sess["version"]:
                continue
            name = STAGE_OF.get(r["op"], "Private chain")
            text = f"private chain {r['op']}" + "".join(
                f" {k}={_short(r[k])}" for k in ("version", "author", "notifier") if k in r)
        if name != stage:
            lines.append(f"[{name}]")
            stage = name
        lines.append(f"  h={r['height']:<4d} {text}")
    lines.append("[Settlement]")
    for account, purpose, amount in sess["payouts"]:
        lines.append(f"  {purpose:8s} {amount:>6d} -> {account}")
    if sess["forfeited"]:
        lines.append("  the recipient forfeited its escrow by not signing the receipt")
    return lines
