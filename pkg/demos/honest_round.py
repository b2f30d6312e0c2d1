"""Walk one notification round stage by stage and watch the money move.

Run with ``python3 demos/honest_round.py``.
"""

from etlc.actors import MemberSpec, Network, get_strategy
from etlc.privbc import EndorsedLedgerData

KEY = "kyc/alice"


def show(net, label):
    bal = net.pubbc.balances()
    delta = {k: v - net.initial_balances[k] for k, v in bal.items()}
    held = {k: v for k, v in net.pubbc.escrow.items() if v}
    print(f"{label:<28} height={net.pubbc.height:<3} deltas={delta} escrow={held}")


def main():
    net = Network([MemberSpec("bank-a"), MemberSpec("bank-b"), MemberSpec("bank-c")],
                  recipient_id="insurer", quorum=2, seed=1)
    insurer = net.add_receiver(get_strategy("receiver", "honest"))
    notifier = net.add_notifier("bank-a", get_strategy("notifier", "honest"))
    net.co_owner("bank-b").update(KEY, b"risk=low")
    show(net, "start")

    sid = net.run_bootstrap(insurer, KEY)
    print(f"  VRS confirmed version {insurer.confirmations[-1].eld.data.version}; session {sid}")
    show(net, "bootstrap (reward locked)")

    net.co_owner("bank-b").update(KEY, b"risk=high")
    net.run_generation(notifier, sid)
    show(net, "generation (penalty locked)")

    net.run_key_transfer(notifier, insurer, sid)
    eld = EndorsedLedgerData.from_bytes(insurer.plaintexts[sid])
    print(f"  insurer decrypted {eld.data.key}@{eld.data.version} = {eld.data.value!r} "
          f"with {len(eld.endorsements)} endorsements")
    show(net, "key transfer (A-flow nets 0)")

    state = net.run_verification(notifier, insurer, sid)
    show(net, f"verification -> {state.value}")


if __name__ == "__main__":
    main()
