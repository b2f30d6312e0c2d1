"""Scenario scripts: loading, validation and deterministic execution."""

from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import jsonschema

from etlc.actors import MemberSpec, Network, derive_seed, get_strategy
from etlc.contracts import Deadlines, EconomicParams
from etlc.crypto import GROUPS, suite_for
from etlc.errors import InvalidScenario, MalformedTranscript, ParseError
from etlc.privbc import Role
from etlc.pubbc import to_wire

SCENARIO_SCHEMA = "etlc-scenario/1"
TRANSCRIPT_SCHEMA = "etlc-transcript/1"


def _schema(name: str) -> dict:
    return json.loads(resources.files("etlc.schemas").joinpath(name).read_text())


def bundled_scenarios() -> List[str]:
    return sorted(p.name[:-5] for p in resources.files("etlc.scenarios").iterdir() if p.name.endswith(".json"))


@dataclass
class Scenario:
    """A fully specified, replayable run."""

    data: Dict[str, Any]

    @property
    def name(self) -> str:
        return self.data.get("name", "scenario")

    @property
    def seed(self) -> int:
        return self.data.get("seed", 0)

    @property
    def group(self) -> str:
        return self.data.get("group", "secp256k1")

    @property
    def economics(self) -> EconomicParams:
        return EconomicParams(**self.data.get("economics", {}))

    @property
    def deadlines(self) -> Deadlines:
        return Deadlines(**self.data.get("deadlines", {}))

    def strategy(self, role: str):
        spec = self.data.get("strategies", {}).get(role, {"name": "honest"})
        strat = get_strategy(role, spec["name"])
        if spec.get("overrides"):
            strat = strat.with_overrides(spec["overrides"])
        return strat

    def with_changes(self, **changes) -> "Scenario":
        data = copy.deepcopy(self.data)
        for k, v in changes.items():
            if v is not None:
                data[k] = v
        return Scenario.from_dict(data)

    def with_strategies(self, notifier: str, receiver: str) -> "Scenario":
        data = copy.deepcopy(self.data)
        data["strategies"] = {"notifier": {"name": notifier}, "receiver": {"name": receiver}}
        data["name"] = f"{self.name}__{notifier}__{receiver}"
        return Scenario.from_dict(data)

    def to_dict(self) -> Dict[str, Any]:
        return copy.deepcopy(self.data)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Scenario":
        try:
            jsonschema.validate(data, _schema("scenario.schema.json"))
        except jsonschema.ValidationError as exc:
            path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ParseError(f"scenario does not match {SCENARIO_SCHEMA} at {path}: {exc.message}") from None
        scenario = cls(copy.deepcopy(data))
        scenario.validate()
        return scenario

    def validate(self) -> None:
        d = self.data
        ids = [m["id"] for m in d["members"]]
        if len(set(ids)) != len(ids):
            raise InvalidScenario("member ids must be unique")
        peers = [m["id"] for m in d["members"] if m.get("role", "peer") == "peer"]
        if not peers:
            raise InvalidScenario("at least one member must be a peer")
        quorum = d.get("quorum")
        if quorum is not None and quorum > len(peers):
            raise InvalidScenario(f"quorum {quorum} exceeds the {len(peers)} endorsing peers")
        p, t = self.economics, self.deadlines
        if p.escrow <= p.reward:
            raise InvalidScenario(f"escrow A={p.escrow} must exceed the reward a={p.reward}")
        if t.sign < t.key + t.gap:
            raise InvalidScenario(f"t'={t.sign} must be at least t + gap = {t.key + t.gap}")
        if d["recipient"]["id"] in ids:
            raise InvalidScenario("the recipient must not be a private-chain member")
        for who in [d["notifier"], d.get("racer")] + [u.get("author") for u in d.get("updates", [])]:
            if who is not None and who not in ids:
                raise InvalidScenario(f"unknown member {who!r}")
        if d.get("racer") is not None and d["racer"] == d["notifier"]:
            raise InvalidScenario("the racing notifier must differ from the notifier")
        for role in ("notifier", "receiver"):
            try:
                self.strategy(role)
            except KeyError as exc:
                raise InvalidScenario(str(exc.args[0])) from None


def load_scenario(source: Union[str, os.PathLike, dict]) -> Scenario:
    """Load a scenario from a dict, a file path, or a bundled name such as ``honest``."""
    if isinstance(source, dict):
        return Scenario.from_dict(source)
    path = Path(source)
    if path.exists():
        text = path.read_text()
    elif str(source) in bundled_scenarios():
        text = resources.files("etlc.scenarios").joinpath(f"{source}.json").read_text()
    else:
        raise ParseError(f"no scenario file or bundled scenario named {str(source)!r}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{source}: {exc}") from None
    if not isinstance(data, dict):
        raise ParseError(f"{source}: a scenario must be a JSON object")
    return Scenario.from_dict(data)


# -- transcripts ---------------------------------------------------------------------

def _dumps(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


@dataclass
class Transcript:
    records: List[dict] = field(default_factory=list)

    @property
    def header(self) -> dict:
        return self.records[0]

    @property
    def final(self) -> dict:
        return self.records[-1]

    @property
    def scenario(self) -> dict:
        return self.header["scenario"]

    @property
    def name(self) -> str:
        return self.scenario.get("name", "scenario")

    def events(self, *types: str) -> List[dict]:
        return [r for r in self.records[1:-1] if not types or r["type"] in types]

    def to_jsonl(self) -> str:
        return "".join(_dumps(r) + "\n" for r in self.records)

    @property
    def content_hash(self) -> str:
        return hashlib.sha256(self.to_jsonl().encode()).hexdigest()

    def write(self, path: Union[str, os.PathLike]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_jsonl())
        return path

    @classmethod
    def from_jsonl(cls, text: str, source: str = "<transcript>") -> "Transcript":
        records = []
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise MalformedTranscript(f"{source}:{lineno}: {exc}") from None
        t = cls(records)
        t.validate(source)
        return t

    @classmethod
    def load(cls, path: Union[str, os.PathLike]) -> "Transcript":
        try:
            text = Path(path).read_text()
        except (OSError, UnicodeDecodeError) as exc:
            raise MalformedTranscript(f"{path}: {exc}") from None
        return cls.from_jsonl(text, str(path))

    def validate(self, source: str = "<transcript>") -> None:
        if len(self.records) < 2:
            raise MalformedTranscript(f"{source}: needs at least a header and a final record")
        schema = _schema("transcript.schema.json")
        for i, rec in enumerate(self.records):
            try:
                jsonschema.validate(rec, schema)
            except jsonschema.ValidationError as exc:
                raise MalformedTranscript(f"{source}: record {i}: {exc.message}") from None
        if self.records[0]["type"] != "header" or self.records[-1]["type"] != "final":
            raise MalformedTranscript(f"{source}: must start with a header and end with a final record")
        if any(r["type"] in ("header", "final") for r in self.records[1:-1]):
            raise MalformedTranscript(f"{source}: header and final records may appear only once")
        seqs = [r["seq"] for r in self.records[1:-1]]
        if seqs != sorted(seqs):
            raise MalformedTranscript(f"{source}: events are out of order")


# -- execution --------------------------------------------------------------------------

def build_network(scenario: Scenario) -> Network:
    d = scenario.data
    suite = suite_for(scenario.group)
    members = [MemberSpec(m["id"], Role(m.get("role", "peer")), m.get("balance", 1000)) for m in d["members"]]
    return Network(
        members,
        recipient_id=d["recipient"]["id"],
        recipient_balance=d["recipient"].get("balance", 1000),
        quorum=d.get("quorum"),
        params=scenario.economics,
        deadlines=scenario.deadlines,
        seed=scenario.seed,
        suite=suite,
        defer_proof_check=d.get("defer_proof_check", False),
    )


def recipient_keypair(scenario_data: dict):
    """Re-derive the recipient's key pair from a scenario (used by offline checkers)."""
    suite = suite_for(scenario_data.get("group", "secp256k1"))
    rid = scenario_data["recipient"]["id"]
    return suite.keygen(derive_seed(scenario_data.get("seed", 0), "recipient/" + rid))


def _pick_racer(scenario: Scenario) -> Optional[str]:
    d = scenario.data
    if d.get("racer"):
        return d["racer"]
    if "racer" not in scenario.strategy("notifier").effects:
        return None
    peers = [m["id"] for m in d["members"] if m.get("role", "peer") == "peer" and m["id"] != d["notifier"]]
    return peers[0] if peers else None


def execute(scenario: Scenario) -> Network:
    """Run every stage of every update in the scenario; returns the settled network."""
    d = scenario.data
    net = build_network(scenario)
    key = d["object_key"]
    nstrat = scenario.strategy("notifier")
    receiver = net.add_receiver(scenario.strategy("receiver"))
    notifier = net.add_notifier(d["notifier"], nstrat)
    racer_id = _pick_racer(scenario)
    racer = net.add_notifier(racer_id, get_strategy("notifier", "honest")) if racer_id else None
    updates = d.get("updates") or [{"value": "update"}]
    first_author = updates[0].get("author", d["notifier"])
    net.co_owner(first_author).update(key, d.get("initial_value", "initial").encode())

    needs_history = (nstrat.action("generation", "version") == "stale"
                     or nstrat.action("generation", "proof") == "replayed")
    for i, update in enumerate(updates):
        sid = net.run_bootstrap(receiver, key) if i == 0 else net.open_session(receiver, key)
        if needs_history:
            net.prepare_record(notifier, receiver.pk, key)
        if i == 0 and "revoke-grant" in nstrat.effects:
            net.privbc.revoke_access(receiver.pk, key)
        net.co_owner(update.get("author", d["notifier"])).update(key, update["value"].encode())
        net.run_generation(notifier, sid)
        if racer is not None:
            net.run_generation(racer, sid)
        net.run_key_transfer(notifier, receiver, sid)
        net.run_verification(notifier, receiver, sid)
        net.settle()
    net.settle(extra=d.get("settle_ticks", 0))
    return net


def transcript_of(scenario: Scenario, net: Network) -> Transcript:
    suite = net.suite
    events = [dict(r, type="privbc") for r in net.privbc.log] + net.pubbc.block_log()
    events.sort(key=lambda r: r["seq"])
    header = {"type": "header", "schema": TRANSCRIPT_SCHEMA, "scenario": scenario.to_dict(),
              "contracts": sorted(net.pubbc.contracts)}
    final = {
        "type": "final",
        "height": net.pubbc.height,
        "sessions": [s.summary(suite) for s in net.etlc.sessions()],
        "initial_balances": dict(sorted(net.initial_balances.items())),
        "balances": dict(sorted(net.pubbc.balances().items())),
        "escrow": dict(sorted(net.pubbc.escrow.items())),
        "total_supply": net.pubbc.total_supply(),
        "ledger": to_wire(net.privbc.export()),
        "recipient": {"account": net.recipient_id,
                      "pk": suite.encode_element(net.recipient_keypair.pk).hex()},
    }
    return Transcript([header] + events + [final])


def run_scenario(source: Union[str, os.PathLike, dict, Scenario], seed: Optional[int] = None,
                 defer_proof_check: Optional[bool] = None, out: Optional[Union[str, os.PathLike]] = None
                 ) -> Transcript:
    """Load, execute and (optionally) write the transcript of one scenario."""
    scenario = source if isinstance(source, Scenario) else load_scenario(source)
    scenario = scenario.with_changes(seed=seed, defer_proof_check=defer_proof_check)
    transcript = transcript_of(scenario, execute(scenario))
    if out is not None:
        out = Path(out)
        target = out if out.suffix == ".jsonl" else out / f"{scenario.name}.jsonl"
        transcript.write(target)
    return transcript
