import copy
import json

import pytest

from etlc.errors import InvalidScenario, MalformedTranscript, ParseError
from etlc.harness import (
    ALL_CHECKS,
    CLAIMS,
    Scenario,
    Transcript,
    bundled_scenarios,
    check_claims,
    load_scenario,
    run_scenario,
    sweep,
)
from etlc.harness.claims import TranscriptView, leaks, public_records
from etlc.harness.explain import explain


def honest_data():
    return load_scenario("honest").to_dict()


def states(t):
    return [s["state"] for s in t.final["sessions"]]


def corrupt(t, edit):
    records = copy.deepcopy(t.records)
    edit(records)
    return Transcript(records)


# -- scenarios ---------------------------------------------------------------------------


def test_bundled_scenarios_listed():
    assert {"honest", "race", "stale", "withhold", "multi", "deferred"} <= set(bundled_scenarios())


def test_honest_scenario_ends_rewarded():
    t = run_scenario("honest")
    assert states(t) == ["Rewarded"]
    t.validate()


@pytest.mark.parametrize("name", ["race", "stale", "withhold", "multi", "deferred"])
def test_every_bundled_scenario_runs_and_checks(name):
    t = run_scenario(name)
    assert all(s in {"Rewarded", "Refunded", "Penalized", "Aborted"} for s in states(t))
    assert check_claims(t).passed


def test_multi_update_sessions():
    t = run_scenario("multi")
    versions = [s["version"] for s in t.final["sessions"]]
    assert versions == sorted(versions) and len(versions) == len(load_scenario("multi").data["updates"])
    assert set(states(t)) == {"Rewarded"}


def test_escrow_not_above_reward_is_invalid():
    data = honest_data()
    data["economics"]["escrow"] = data["economics"]["reward"]
    with pytest.raises(InvalidScenario):
        load_scenario(data)


@pytest.mark.parametrize("edit", [
    lambda d: d.update(quorum=4),
    lambda d: d["deadlines"].update(sign=d["deadlines"]["key"] + 1),
    lambda d: d.update(notifier="nobody"),
    lambda d: d.update(racer=d["notifier"]),
    lambda d: d["members"].append(dict(d["members"][0])),
    lambda d: d["recipient"].update(id=d["members"][0]["id"]),
    lambda d: d.update(strategies={"notifier": {"name": "bogus"}}),
    lambda d: d.update(strategies={"receiver": {"name": "honest", "overrides": [["x", "y", "z"]]}}),
])
def test_invalid_scenarios(edit):
    data = honest_data()
    edit(data)
    with pytest.raises(InvalidScenario):
        Scenario.from_dict(data)


def test_schema_violations_are_parse_errors(tmp_path):
    data = honest_data()
    data["surprise"] = 1
    with pytest.raises(ParseError):
        load_scenario(data)
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ParseError):
        load_scenario(bad)
    bad.write_text("[1, 2]")
    with pytest.raises(ParseError):
        load_scenario(bad)
    with pytest.raises(ParseError):
        load_scenario("no-such-scenario")


def test_replay_is_byte_identical(tmp_path):
    a = run_scenario("honest", out=tmp_path / "a")
    b = run_scenario("honest", out=tmp_path / "b")
    assert (tmp_path / "a" / "honest.jsonl").read_bytes() == (tmp_path / "b" / "honest.jsonl").read_bytes()
    assert a.content_hash == b.content_hash


def test_seed_changes_transcript():
    assert run_scenario("honest", seed=1).content_hash != run_scenario("honest", seed=2).content_hash


def test_transcript_roundtrip_through_disk(tmp_path):
    t = run_scenario("stale", out=tmp_path)
    loaded = Transcript.load(tmp_path / "stale.jsonl")
    assert loaded.records == t.records
    assert loaded.header["schema"] == "etlc-transcript/1"


def test_toy_group_scenario():
    data = honest_data()
    data["group"] = "toy64"
    t = run_scenario(data)
    assert states(t) == ["Rewarded"] and check_claims(t).passed


# -- claim checker -----------------------------------------------------------------------


def test_honest_corpus_passes_all_claims():
    honest = [run_scenario("honest", seed=s) for s in range(4)] + [run_scenario("multi")]
    report = check_claims(honest)
    assert report.passed
    assert all(report.results[c].applicable > 0 for c in CLAIMS if c != "claim6")


def test_stale_adversary_still_satisfies_claim1():
    corpus = sweep("honest", notifiers=["stale-version"], receivers=["honest", "no-challenge-on-bad-data"])
    report = check_claims(list(corpus.transcripts.values()), ["claim1"])
    assert report.passed
    stale = corpus.transcripts["honest__stale-version__honest"]
    assert states(stale) == ["Penalized"]


def _drop_signature(records):
    records[:] = [r for r in records if not (r.get("type") == "pubbc" and r["op"] == "record_signature")]


def test_reward_without_receipt_fails_claim5():
    t = run_scenario("honest")
    assert check_claims(t, ["claim5"]).passed
    bad = corrupt(t, _drop_signature)
    report = check_claims(bad, ["claim5"])
    assert not report.passed
    assert any("receipt" in m for m in report.results["claim5"].failures)


def test_withheld_session_marked_rewarded_fails_claim5():
    t = run_scenario("withhold")
    assert states(t) == ["Refunded"]

    def promote(records):
        records[-1]["sessions"][0]["state"] = "Rewarded"

    assert not check_claims(corrupt(t, promote), ["claim5"]).passed


def test_corrupted_balances_fail_conservation():
    t = run_scenario("honest")

    def mint(records):
        records[-1]["balances"]["insurer"] += 1

    assert not check_claims(corrupt(t, mint), ["conservation"]).passed


def test_tampered_recipient_key_is_malformed():
    t = run_scenario("honest")

    def swap(records):
        records[-1]["recipient"]["pk"] = "00" * 33

    with pytest.raises(MalformedTranscript):
        check_claims(corrupt(t, swap))


def test_missing_fields_are_malformed():
    t = run_scenario("honest")

    def strip(records):
        del records[-1]["sessions"][0]["deposits"]

    with pytest.raises(MalformedTranscript):
        check_claims(corrupt(t, strip))


@pytest.mark.parametrize("text", [
    "", "garbage\n", '{"type": "header"}\n', '{"type":"final"}\n{"type":"header"}\n',
])
def test_garbage_transcripts(text):
    with pytest.raises(MalformedTranscript):
        Transcript.from_jsonl(text)


def test_out_of_order_events_rejected():
    t = run_scenario("honest")
    records = copy.deepcopy(t.records)
    records[1], records[2] = records[2], records[1]
    with pytest.raises(MalformedTranscript):
        Transcript(records).validate()


def test_check_claims_on_directories(tmp_path):
    sweep("honest", notifiers=["honest", "wrong-key"], receivers=["honest"], out=tmp_path)
    report = check_claims(tmp_path)
    assert report.passed and report.transcripts == 2
    with pytest.raises(MalformedTranscript):
        check_claims(tmp_path / "missing")


def test_report_lines():
    report = check_claims(run_scenario("honest"))
    lines = report.lines()
    assert len(lines) == len(ALL_CHECKS) + 1
    assert all(line.startswith("PASS") for line in lines[:-1])
    with pytest.raises(KeyError):
        check_claims(run_scenario("honest"), ["claim9"])


def test_rejected_late_key_would_leak_if_rejections_were_public(corpus):
    # the late key is refused on chain; its payload only counts as public if rejected txs are relayed
    t = corpus.transcripts["honest__late-key__honest"]
    v = TranscriptView(t)
    assert states(t) == ["Refunded"]
    everything = t.events("pubbc", "pubbc-timeout")
    assert leaks(v, everything)
    assert not leaks(v, public_records(v))


def test_aborted_runs_leak_nothing(corpus):
    aborted = [t for t in corpus.transcripts.values() if "Aborted" in states(t)]
    assert aborted
    for t in aborted:
        v = TranscriptView(t)
        assert not leaks(v, t.events("pubbc", "pubbc-timeout")), t.name


def test_honest_transcript_leaks_after_key():
    # sanity check that the oracle can find a delivery at all
    t = run_scenario("honest")
    v = TranscriptView(t)
    assert leaks(v, public_records(v)) == ["kyc/alice@1"]


# -- sweep -------------------------------------------------------------------------------


def test_sweep_counts():
    from etlc.actors import NOTIFIER_STRATEGIES
    receivers = ["honest", "withhold-signature", "invalid-signature", "false-challenge"]
    corpus = sweep("honest", receivers=receivers)
    assert len(corpus) == len(NOTIFIER_STRATEGIES) * 4 == 40


def test_empty_sweep():
    assert len(sweep("honest", notifiers=[])) == 0
    assert len(sweep("honest", receivers=[])) == 0


def test_sweep_hash_stable_and_written(tmp_path):
    a = sweep("honest", notifiers=["honest", "stale-version"], receivers=["honest"], out=tmp_path)
    b = sweep("honest", notifiers=["honest", "stale-version"], receivers=["honest"])
    assert a.content_hash == b.content_hash
    index = json.loads((tmp_path / "corpus.json").read_text())
    assert index["corpus_hash"] == a.content_hash and len(index["transcripts"]) == 2


def test_parallel_sweep_matches_serial():
    kw = dict(notifiers=["honest", "wrong-key", "late-key"], receivers=["honest", "false-challenge"])
    assert sweep("honest", jobs=2, **kw).content_hash == sweep("honest", **kw).content_hash


def test_full_corpus_passes_everything(corpus):
    assert len(corpus) == 50
    report = check_claims(list(corpus.transcripts.values()))
    assert report.passed, "\n".join(report.lines())


@pytest.mark.slow
def test_deferred_corpus_passes_everything():
    corpus = sweep("honest", defer_proof_check=True, jobs=4)
    report = check_claims(list(corpus.transcripts.values()))
    assert report.passed, "\n".join(report.lines())


# -- explain ----------------------------------------------------------------------------


def test_explain_narrates_stages():
    t = run_scenario("stale")
    sid = t.final["sessions"][0]["session_id"]
    text = "\n".join(explain(t, sid[:6]))
    for stage in ("[Bootstrap]", "[Generation]", "[Key transfer]", "[Verification]"):
        assert stage in text
    assert "Penalized" in text
