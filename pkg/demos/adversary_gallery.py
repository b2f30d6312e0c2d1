"""Every catalogued strategy against an honest counterparty, one line each.

Run with ``python3 demos/adversary_gallery.py [--defer-proof-check]``.
"""

import sys

from etlc.actors import NOTIFIER_STRATEGIES, RECEIVER_STRATEGIES
from etlc.harness import check_claims, sweep


def main(defer=False):
    pairs = [(n, "honest") for n in NOTIFIER_STRATEGIES] + [("honest", r) for r in RECEIVER_STRATEGIES if r != "honest"]
    rows = []
    for n, r in pairs:
        corpus = sweep("honest", notifiers=[n], receivers=[r], defer_proof_check=defer)
        t = next(iter(corpus.transcripts.values()))
        s = t.final["sessions"][-1]
        delta = {k: v - t.final["initial_balances"][k] for k, v in t.final["balances"].items()}
        rows.append((n, r, s["state"], s["reason"] or "", delta["bank-a"], delta["insurer"]))
        ok = check_claims(t).passed
        rows[-1] += ("ok" if ok else "VIOLATION",)

    print(f"{'notifier':<28}{'receiver':<26}{'state':<11}{'N':>5}{'R':>6}  claims  reason")
    for n, r, state, reason, dn, dr, ok in rows:
        print(f"{n:<28}{r:<26}{state:<11}{dn:>5}{dr:>6}  {ok:<7} {reason}")


if __name__ == "__main__":
    main(defer="--defer-proof-check" in sys.argv)
