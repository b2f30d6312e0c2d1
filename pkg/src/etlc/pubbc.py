"""Deterministic public-chain model.

Accounts hold integer balances, contracts hold escrow, and a logical block
height is the only clock.  Transactions run in submission order inside the
current block; a failing transaction is rolled back completely and shows up
in the log as a rejection receipt.  :meth:`PublicChain.tick` seals the
current block, lets contracts run their timeout branches, and opens the next
block.
"""

from __future__ import annotations

import copy
import json
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from etlc.errors import (
    ETLCError,
    InsufficientFunds,
    NonPositiveAmount,
    UnknownAccount,
    UnknownContract,
    UnknownOperation,
)

log = logging.getLogger(__name__)

SYSTEM = "<system>"
NATIVE = "native"


@dataclass
class Account:
    id: str
    pk: Any
    balance: int


@dataclass(frozen=True)
class Transaction:
    sender: str
    contract: str
    op: str
    payload: Dict[str, Any] = field(default_factory=dict)
    submitted_at: int = -1

    def payload_bytes(self) -> bytes:
        return json.dumps(to_wire(self.payload), sort_keys=True, separators=(",", ":")).encode()


@dataclass
class Receipt:
    ok: bool
    height: int
    index: int
    result: Dict[str, Any] = field(default_factory=dict)
    error: Optional[str] = None
    detail: str = ""


@dataclass
class Block:
    height: int
    entries: List[dict] = field(default_factory=list)


def to_wire(value):
    """JSON-safe view of a payload: bytes become hex strings."""
    if isinstance(value, (bytes, bytearray)):
        return bytes(value).hex()
    if isinstance(value, dict):
        return {k: to_wire(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_wire(v) for v in value]
    return value


class Contract:
    """Base for contracts hosted on :class:`PublicChain`.

    Mutable contract data must live in ``self.state`` so the chain can roll
    it back.  Operations are methods named ``op_<name>(ctx, payload)``.
    """

    name = "contract"

    def __init__(self):
        self.state: Any = {}

    def call(self, ctx: "CallContext", op: str, payload: Dict[str, Any]) -> Dict[str, Any]:
        handler = getattr(self, f"op_{op}", None)
        if handler is None:
            raise UnknownOperation(f"{self.name} has no operation {op!r}")
        return handler(ctx, payload) or {}

    def on_tick(self, ctx: "CallContext") -> List[Dict[str, Any]]:
        return []


@dataclass
class CallContext:
    chain: "PublicChain"
    sender: str
    height: int
    contract: str

    def lock(self, amount: int, account: Optional[str] = None) -> None:
        self.chain._lock(account or self.sender, self.contract, amount)

    def pay(self, account: str, amount: int) -> None:
        self.chain._release(self.contract, account, amount)

    def for_contract(self, name: str) -> "CallContext":
        return CallContext(self.chain, self.sender, self.height, name)


class PublicChain:
    def __init__(self):
        self.accounts: Dict[str, Account] = {}
        self.contracts: Dict[str, Contract] = {}
        self.escrow: Dict[str, int] = {}
        self.height = 0
        self.blocks: List[Block] = [Block(0)]
        self.sequencer = None

    # -- accounts ------------------------------------------------------------

    def create_account(self, account_id: str, pk: Any = None, balance: int = 0) -> Account:
        if account_id in self.accounts or account_id in (SYSTEM, NATIVE):
            raise ValueError(f"account {account_id!r} already exists")
        if balance < 0:
            raise ValueError("initial balance must be non-negative")
        acct = Account(account_id, pk, balance)
        self.accounts[account_id] = acct
        return acct

    def balance(self, account_id: str) -> int:
        return self._account(account_id).balance

    def balances(self) -> Dict[str, int]:
        return {k: a.balance for k, a in self.accounts.items()}

    def total_supply(self) -> int:
        return sum(a.balance for a in self.accounts.values()) + sum(self.escrow.values())

    def _account(self, account_id: str) -> Account:
        try:
            return self.accounts[account_id]
        except KeyError:
            raise UnknownAccount(f"no account {account_id!r}") from None

    # -- money movement (contract-internal) --------------------------------

    def _move(self, src: Account, dst: Account, amount: int) -> None:
        if amount <= 0:
            raise NonPositiveAmount("amount must be positive")
        if src.balance < amount:
            raise InsufficientFunds(f"{src.id} holds {src.balance}, needs {amount}")
        src.balance -= amount
        dst.balance += amount

    def _lock(self, account_id: str, contract: str, amount: int) -> None:
        acct = self._account(account_id)
        if amount <= 0:
            raise NonPositiveAmount("escrow amount must be positive")
        if acct.balance < amount:
            raise InsufficientFunds(f"{acct.id} holds {acct.balance}, needs {amount}")
        acct.balance -= amount
        self.escrow[contract] = self.escrow.get(contract, 0) + amount

    def _release(self, contract: str, account_id: str, amount: int) -> None:
        acct = self._account(account_id)
        if amount <= 0:
            raise NonPositiveAmount("payout must be positive")
        held = self.escrow.get(contract, 0)
        if held < amount:
            raise InsufficientFunds(f"{contract} escrow holds {held}, owes {amount}")
        self.escrow[contract] = held - amount
        acct.balance += amount

    # -- contracts -----------------------------------------------------------

    def deploy(self, contract: Contract) -> Contract:
        if contract.name in self.contracts:
            raise ValueError(f"contract {contract.name!r} already deployed")
        self.contracts[contract.name] = contract
        self.escrow.setdefault(contract.name, 0)
        return contract

    def _snapshot(self):
        return copy.deepcopy((self.accounts, self.escrow, [c.state for c in self.contracts.values()]))

    def _restore(self, snap) -> None:
        self.accounts, self.escrow, states = snap
        for c, s in zip(self.contracts.values(), states):
            c.state = s

    # -- transactions --------------------------------------------------------

    def submit(self, tx: Transaction) -> Receipt:
        block = self.blocks[-1]
        receipt = Receipt(ok=False, height=self.height, index=len(block.entries))
        if tx.submitted_at != self.height:
            tx = Transaction(tx.sender, tx.contract, tx.op, tx.payload, self.height)
        snap = self._snapshot()
        try:
            self._account(tx.sender)
            if tx.contract == NATIVE:
                receipt.result = self._native(tx)
            else:
                contract = self.contracts.get(tx.contract)
                if contract is None:
                    raise UnknownContract(f"no contract {tx.contract!r}")
                ctx = CallContext(self, tx.sender, self.height, contract.name)
                receipt.result = contract.call(ctx, tx.op, tx.payload)
            receipt.ok = True
        except ETLCError as exc:
            self._restore(snap)
            receipt.error = exc.code
            receipt.detail = str(exc)
        log.debug("h=%d %s.%s by %s -> %s", self.height, tx.contract, tx.op, tx.sender,
                  "ok" if receipt.ok else receipt.error)
        block.entries.append(self._entry({"kind": "tx", "tx": tx, "receipt": receipt}))
        return receipt

    def _native(self, tx: Transaction) -> Dict[str, Any]:
        if tx.op != "transfer":
            raise UnknownOperation(f"native has no operation {tx.op!r}")
        amount = tx.payload.get("amount")
        if not isinstance(amount, int) or isinstance(amount, bool):
            raise NonPositiveAmount("amount must be an integer")
        self._move(self._account(tx.sender), self._account(tx.payload.get("to")), amount)
        return {"amount": amount}

    def transfer(self, src: str, dst: str, amount: int) -> Receipt:
        return self.submit(Transaction(src, NATIVE, "transfer", {"to": dst, "amount": amount}, self.height))

    def call(self, sender: str, contract: str, op: str, **payload) -> Receipt:
        return self.submit(Transaction(sender, contract, op, payload, self.height))

    def tick(self) -> int:
        """Seal the current block, run timeout branches, open the next block."""
        block = self.blocks[-1]
        for contract in self.contracts.values():
            ctx = CallContext(self, SYSTEM, self.height, contract.name)
            for event in contract.on_tick(ctx):
                block.entries.append(self._entry({"kind": "timeout", "contract": contract.name, "event": event}))
        self.height += 1
        self.blocks.append(Block(self.height))
        return self.height

    def _entry(self, entry: dict) -> dict:
        if self.sequencer is not None:
            entry["seq"] = next(self.sequencer)
        return entry

    def run_until(self, height: int) -> None:
        while self.height < height:
            self.tick()

    # -- export --------------------------------------------------------------

    def block_log(self) -> List[dict]:
        """One JSON-ready record per transaction or timeout event, in order."""
        out = []
        for block in self.blocks:
            for e in block.entries:
                if e["kind"] == "tx":
                    tx, r = e["tx"], e["receipt"]
                    rec = {
                        "type": "pubbc",
                        "height": block.height,
                        "index": r.index,
                        "sender": tx.sender,
                        "contract": tx.contract,
                        "op": tx.op,
                        "payload": to_wire(tx.payload),
                        "receipt": {"ok": r.ok, "error": r.error, "detail": r.detail,
                                    "result": to_wire(r.result)},
                    }
                else:
                    rec = {"type": "pubbc-timeout", "height": block.height,
                           "contract": e["contract"], "event": to_wire(e["event"])}
                if "seq" in e:
                    rec["seq"] = e["seq"]
                out.append(rec)
        return out

    def block_log_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n" for r in self.block_log())
