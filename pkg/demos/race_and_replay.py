"""Two notifiers race for one session; the replayed run hashes the same.

Run with ``python3 demos/race_and_replay.py``.
"""

from etlc.harness import run_scenario
from etlc.harness.explain import explain


def main():
    first = run_scenario("race")
    for r in first.events("pubbc"):
        if r["op"] == "record_ciphertext_hash_proof":
            rc = r["receipt"]
            print(f"{r['sender']:<8} -> {rc['result'].get('state') if rc['ok'] else rc['error']}")

    second = run_scenario("race")
    print("replay identical:", first.content_hash == second.content_hash, first.content_hash[:16])

    sid = first.final["sessions"][0]["session_id"]
    print()
    print("\n".join(explain(first, sid)))


if __name__ == "__main__":
    main()
