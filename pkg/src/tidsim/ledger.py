"""Deterministic single-chain ledger.

Accounts and balances are integer wei; every contract call charges a flat
per-function gas amount (variable-size calls charge per unit, e.g. per
identity revealed). Gas leaves the economy into a sink and burns into a
second sink, so the audit invariant is

    sum(balances) + gas_sink + burn_sink == total minted

after every transaction. USD figures are exact rationals; the published
per-function USD price list is carried alongside because the cost model's
headline numbers are quoted from that list rather than recomputed.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from math import floor
from random import Random
from typing import Any, Callable, Optional

from .crypto import hash256

WEI_PER_ETHER = 10**18
SLOTS_PER_DAY = 24

# Allowed epoch transitions of the delivery state machine. Epoch 0 is the
# pending phase; 1 lightweight reveal; 2 mode switch; 3 on-chain reveal;
# 4 absent/fake reporting; 5 second receipt chance; 6 settlement.
EPOCH_GRAPH: dict[int, frozenset[int]] = {
    0: frozenset({1, 2}),
    1: frozenset({2, 6}),
    2: frozenset({3, 6}),
    3: frozenset({4}),
    4: frozenset({5}),
    5: frozenset({6}),
    6: frozenset(),
}

# Stable string-keyed contract ABI. Traces refer to functions by these ids.
FN_DEPLOY_AGENT = "deployAgent"
FN_DEPLOY_SWITCH = "deploySwitch"
FN_DEPLOY_STRAWMAN = "deployStrawman"
FN_NEW_MAILMAN = "newMailman"
FN_NEW_SERVICE = "newService"
FN_DEPLOY_SUPPLEMENTARY = "deploySupplementary"
FN_REPORT_PREMATURE = "reportPremature"
FN_RECIPIENT_RECEIPT = "recipientReceipt"
FN_REVEAL_IDENTITY = "revealIdentity"
FN_REVEAL_PRIVKEY = "revealPrivkey"
FN_REPORT_ABSENT = "reportAbsent"
FN_REPORT_FAKE = "reportFake"
FN_INFORM_AGENT = "informAgent"
FN_PROVE_AGREEMENT = "proveAgreement"
FN_WITHDRAW = "withdraw"
FN_STRAWMAN_NEW_SERVICE = "strawmanNewService"
FN_STRAWMAN_REPORT_PREMATURE = "strawmanReportPremature"
FN_STRAWMAN_REVEAL_SHARE = "strawmanRevealShare"
FN_STRAWMAN_REVEAL_RECEIPT = "strawmanRevealReceipt"

# Functions whose gas counts toward the published per-service cost figures.
# Registration (newMailman) and marketplace bootstrap (deployAgent /
# deployStrawman) are mailman- and operator-side; settlement withdrawals are
# optional and excluded from the per-service totals the price table covers.
SERVICE_FUNCTIONS = frozenset(
    {
        FN_DEPLOY_SWITCH,
        FN_NEW_SERVICE,
        FN_DEPLOY_SUPPLEMENTARY,
        FN_REPORT_PREMATURE,
        FN_RECIPIENT_RECEIPT,
        FN_REVEAL_IDENTITY,
        FN_REVEAL_PRIVKEY,
        FN_REPORT_ABSENT,
        FN_REPORT_FAKE,
        FN_INFORM_AGENT,
    }
)

STRAWMAN_SERVICE_FUNCTIONS = frozenset(
    {
        FN_STRAWMAN_NEW_SERVICE,
        FN_STRAWMAN_REPORT_PREMATURE,
        FN_STRAWMAN_REVEAL_SHARE,
        FN_STRAWMAN_REVEAL_RECEIPT,
    }
)


class LedgerError(Exception):
    """Transaction rejected before execution (no receipt, no state change)."""


class ContractRevert(Exception):
    """Raised inside a contract handler; charges gas, rolls back state."""


@dataclass(frozen=True, order=True)
class TimeFrame:
    """A (day, slot) point on the clock; slot granularity is one tick."""

    day: int
    slot: int

    def __post_init__(self):
        if self.day < 0 or not 0 <= self.slot < SLOTS_PER_DAY:
            raise LedgerError(f"invalid time frame {self.day},{self.slot}")

    @property
    def tick(self) -> int:
        return self.day * SLOTS_PER_DAY + self.slot

    @classmethod
    def from_tick(cls, tick: int) -> "TimeFrame":
        return cls(tick // SLOTS_PER_DAY, tick % SLOTS_PER_DAY)


def round_usd_cents(amount: Fraction) -> Fraction:
    """Round half-up to whole cents (display only; books stay exact)."""
    return Fraction(floor(amount * 100 + Fraction(1, 2)), 100)


def fmt_usd(amount: Fraction) -> str:
    cents = round_usd_cents(amount) * 100
    return f"{int(cents) // 100}.{int(cents) % 100:02d}"


@dataclass
class GasSchedule:
    """Per-function gas prices plus the published USD price list.

    `usd_display` carries the per-function USD figures exactly as published
    (they are not bit-reproducible from the gas*rate product, which lands a
    cent lower for three functions), so cost summaries can quote them.
    """

    gas: dict[str, int]
    gas_per_unit: dict[str, int] = field(default_factory=dict)
    usd_display: dict[str, Fraction] = field(default_factory=dict)
    gas_to_ether: Fraction = Fraction(167, 10**10)
    ether_to_usd: Fraction = Fraction(175)

    def __post_init__(self):
        for fn in set(self.gas) | set(self.gas_per_unit):
            base = self.gas.get(fn, 0)
            per_unit = self.gas_per_unit.get(fn, 0)
            if base < 0 or per_unit < 0 or base + per_unit <= 0:
                raise LedgerError(f"non-positive gas entry for {fn}")
        wei = self.gas_to_ether * WEI_PER_ETHER
        if wei.denominator != 1:
            raise LedgerError("gas price must be a whole number of wei")

    @property
    def wei_per_gas(self) -> int:
        return int(self.gas_to_ether * WEI_PER_ETHER)

    def gas_for(self, fn: str, units: int = 1) -> int:
        if fn not in self.gas:
            raise LedgerError(f"unknown function in gas schedule: {fn}")
        return self.gas[fn] + self.gas_per_unit.get(fn, 0) * units

    def usd_exact(self, gas: int) -> Fraction:
        return gas * self.gas_to_ether * self.ether_to_usd

    def usd_quoted(self, fn: str, units: int = 1) -> Fraction:
        """Published USD price of one call; falls back to rounded exact cost."""
        if fn in self.usd_display:
            per_call = self.usd_display[fn]
            if fn in self.gas_per_unit:
                return per_call * units
            return per_call
        return round_usd_cents(self.usd_exact(self.gas_for(fn, units)))

    @classmethod
    def default(cls) -> "GasSchedule":
        published = {
            FN_DEPLOY_SWITCH: "1.81",
            FN_NEW_SERVICE: "0.24",
            FN_DEPLOY_SUPPLEMENTARY: "7.10",
            FN_REPORT_PREMATURE: "0.19",
            FN_RECIPIENT_RECEIPT: "0.16",
            FN_REVEAL_IDENTITY: "0.21",
            FN_REVEAL_PRIVKEY: "0.27",
            FN_REPORT_ABSENT: "0.19",
            FN_REPORT_FAKE: "3.75",
            FN_INFORM_AGENT: "0.17",
        }
        return cls(
            gas={
                FN_DEPLOY_AGENT: 1_500_000,
                FN_DEPLOY_STRAWMAN: 1_500_000,
                FN_DEPLOY_SWITCH: 616_666,
                FN_NEW_MAILMAN: 128_000,
                FN_NEW_SERVICE: 83_121,
                FN_DEPLOY_SUPPLEMENTARY: 2_425_356,
                FN_REPORT_PREMATURE: 65_317,
                FN_RECIPIENT_RECEIPT: 54_291,
                FN_REVEAL_IDENTITY: 0,
                FN_REVEAL_PRIVKEY: 90_689,
                FN_REPORT_ABSENT: 65_343,
                FN_REPORT_FAKE: 1_280_723,
                FN_INFORM_AGENT: 57_042,
                FN_PROVE_AGREEMENT: 72_678,
                FN_WITHDRAW: 45_000,
                FN_STRAWMAN_NEW_SERVICE: 83_121,
                FN_STRAWMAN_REPORT_PREMATURE: 65_317,
                FN_STRAWMAN_REVEAL_SHARE: 90_689,
                FN_STRAWMAN_REVEAL_RECEIPT: 54_291,
            },
            gas_per_unit={
                FN_REVEAL_IDENTITY: 72_678,
                FN_STRAWMAN_NEW_SERVICE: 42_000,
            },
            usd_display={fn: Fraction(v) for fn, v in published.items()},
        )

    @classmethod
    def from_file(cls, path: str) -> "GasSchedule":
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        base = cls.default()
        gas = dict(base.gas)
        gas.update({k: int(v) for k, v in raw.get("gas", {}).items()})
        per_unit = dict(base.gas_per_unit)
        per_unit.update({k: int(v) for k, v in raw.get("gas_per_unit", {}).items()})
        display = dict(base.usd_display)
        display.update({k: Fraction(str(v)) for k, v in raw.get("usd_display", {}).items()})
        return cls(
            gas=gas,
            gas_per_unit=per_unit,
            usd_display=display,
            gas_to_ether=Fraction(str(raw.get("gas_to_ether", "1.67e-8"))),
            ether_to_usd=Fraction(str(raw.get("ether_to_usd", "175"))),
        )


class AccountKind(Enum):
    EOA = "eoa"
    CA = "ca"


@dataclass
class Account:
    address: bytes
    kind: AccountKind
    balance: int = 0


@dataclass
class TxReceipt:
    seq: int
    tick: int
    caller: bytes
    target: bytes
    function: str
    units: int
    gas_used: int
    usd_cost: Fraction
    success: bool
    error: Optional[str] = None
    events: list = field(default_factory=list)

    def to_record(self, include_caller: bool = True) -> dict:
        rec = {
            "type": "receipt",
            "seq": self.seq,
            "tick": self.tick,
            "target": self.target.hex(),
            "function": self.function,
            "units": self.units,
            "gas_used": self.gas_used,
            "usd_cost": str(self.usd_cost),
            "usd_display": fmt_usd(self.usd_cost),
            "success": self.success,
            "error": self.error,
            "events": self.events,
        }
        if include_caller:
            rec["caller"] = self.caller.hex()
        return rec


class TxContext:
    """Execution context handed to a contract function.

    Outgoing value moves are queued and applied only if the call succeeds.
    """

    def __init__(self, ledger: "Ledger", contract_address: bytes, caller: bytes, value: int):
        self.ledger = ledger
        self.contract_address = contract_address
        self.caller = caller
        self.value = value
        self.tick = ledger.tick
        self.events: list[dict] = []
        self._payouts: list[tuple[bytes, int]] = []
        self._burns = 0

    def emit(self, name: str, **fields):
        self.events.append({"event": name, **{k: _jsonable(v) for k, v in fields.items()}})

    def pay_out(self, to: bytes, amount: int):
        if amount < 0:
            raise ContractRevert("negative payout")
        self._payouts.append((to, amount))

    def burn(self, amount: int):
        if amount < 0:
            raise ContractRevert("negative burn")
        self._burns += amount

    def contract_at(self, address: bytes):
        contract = self.ledger.contracts.get(address)
        if contract is None:
            raise ContractRevert("no contract at target address")
        return contract


def _jsonable(value):
    if isinstance(value, bytes):
        return value.hex()
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, Enum):
        return value.value
    return value


class Contract:
    """Base class: state lives in `self.state` (plain data, snapshot-able)."""

    code_id = "contract"
    deploy_fn = FN_DEPLOY_AGENT

    def __init__(self, ledger: "Ledger", address: bytes, creator: bytes, **ctor):
        self.ledger = ledger
        self.address = address
        self.creator = creator
        self.state: dict[str, Any] = {}
        self.init_state(**ctor)

    def init_state(self, **ctor):
        pass

    def gas_units(self, fn: str, args: dict) -> int:
        return 1

    def handle(self, fn: str, ctx: TxContext, args: dict):
        handler: Optional[Callable] = getattr(self, "fn_" + fn, None)
        if handler is None:
            raise ContractRevert(f"unknown function {fn}")
        return handler(ctx, **args)

    def on_tick(self, tick: int):
        pass

    def state_dump(self) -> dict:
        return _jsonable(self.state)


class Ledger:
    def __init__(self, schedule: Optional[GasSchedule] = None):
        self.schedule = schedule or GasSchedule.default()
        self.accounts: dict[bytes, Account] = {}
        self.contracts: dict[bytes, Contract] = {}
        self.receipts: list[TxReceipt] = []
        self.tick = 0
        self.gas_sink = 0
        self.burn_sink = 0
        self.minted = 0
        self._nonces: dict[bytes, int] = {}

    # -- accounts ----------------------------------------------------------

    def create_eoa(self, rng: Random) -> Account:
        address = rng.getrandbits(160).to_bytes(20, "big")
        return self.register_eoa(address)

    def register_eoa(self, address: bytes) -> Account:
        if address in self.accounts:
            raise LedgerError("address already registered")
        account = Account(address, AccountKind.EOA)
        self.accounts[address] = account
        return account

    def fund(self, address: bytes, amount: int):
        account = self.accounts.get(address)
        if account is None:
            raise LedgerError("cannot fund unknown address")
        if amount < 0:
            raise LedgerError("cannot fund a negative amount")
        account.balance += amount
        self.minted += amount

    def balance(self, address: bytes) -> int:
        account = self.accounts.get(address)
        if account is None:
            raise LedgerError("unknown address")
        return account.balance

    # -- deployment --------------------------------------------------------

    def predict_address(self, creator: bytes, nonce: int) -> bytes:
        return hash256(creator + nonce.to_bytes(8, "big"))[-20:]

    def deploy_contract(self, creator: bytes, contract_cls: type[Contract], **ctor) -> Contract:
        """Deploy from an EOA, charging the contract kind's deploy gas."""
        caller = self.accounts.get(creator)
        if caller is None or caller.kind is not AccountKind.EOA:
            raise LedgerError("creator must be an existing EOA")
        fn = contract_cls.deploy_fn
        gas = self.schedule.gas_for(fn)
        fee = gas * self.schedule.wei_per_gas
        if caller.balance < fee:
            raise LedgerError("insufficient balance for deployment gas")
        contract = self._instantiate(creator, contract_cls, **ctor)
        caller.balance -= fee
        self.gas_sink += fee
        self._record(caller.address, contract.address, fn, 1, gas, True, None, [])
        return contract

    def deploy_contract_internal(self, creator: bytes, contract_cls: type[Contract], **ctor) -> Contract:
        """Deployment initiated by another contract; gas is the outer call's."""
        return self._instantiate(creator, contract_cls, **ctor)

    def _instantiate(self, creator: bytes, contract_cls: type[Contract], **ctor) -> Contract:
        nonce = self._nonces.get(creator, 0)
        address = self.predict_address(creator, nonce)
        if address in self.accounts:
            raise LedgerError("contract address collision")
        self._nonces[creator] = nonce + 1
        self.accounts[address] = Account(address, AccountKind.CA)
        contract = contract_cls(self, address, creator, **ctor)
        self.contracts[address] = contract
        return contract

    # -- transactions ------------------------------------------------------

    def submit_tx(self, caller: bytes, target: bytes, function: str, args: Optional[dict] = None, value: int = 0) -> TxReceipt:
        args = args or {}
        account = self.accounts.get(caller)
        if account is None or account.kind is not AccountKind.EOA:
            raise LedgerError("caller must be an existing EOA")
        contract = self.contracts.get(target)
        if contract is None:
            raise LedgerError("unknown target contract")
        units = contract.gas_units(function, args)
        gas = self.schedule.gas_for(function, units)
        fee = gas * self.schedule.wei_per_gas
        if account.balance < fee + value:
            raise LedgerError("insufficient balance for gas and value")

        account.balance -= fee
        self.gas_sink += fee
        account.balance -= value
        self.accounts[target].balance += value

        snapshot = {addr: copy.deepcopy(c.state) for addr, c in self.contracts.items()}
        ctx = TxContext(self, target, caller, value)
        try:
            contract.handle(function, ctx, args)
        except ContractRevert as exc:
            for addr, state in snapshot.items():
                self.contracts[addr].state = state
            self.accounts[target].balance -= value
            account.balance += value
            return self._record(caller, target, function, units, gas, False, str(exc), [])

        contract_account = self.accounts[target]
        total_out = sum(amount for _, amount in ctx._payouts) + ctx._burns
        if total_out > contract_account.balance:
            # treat as a programming error in the contract, not user input
            for addr, state in snapshot.items():
                self.contracts[addr].state = state
            self.accounts[target].balance -= value
            account.balance += value
            return self._record(caller, target, function, units, gas, False, "contract overdraw", [])
        for to, amount in ctx._payouts:
            contract_account.balance -= amount
            dest = self.accounts.get(to)
            if dest is None:
                dest = Account(to, AccountKind.EOA)
                self.accounts[to] = dest
            dest.balance += amount
        contract_account.balance -= ctx._burns
        self.burn_sink += ctx._burns
        return self._record(caller, target, function, units, gas, True, None, ctx.events)

    def _record(self, caller, target, function, units, gas, success, error, events) -> TxReceipt:
        receipt = TxReceipt(
            seq=len(self.receipts),
            tick=self.tick,
            caller=caller,
            target=target,
            function=function,
            units=units,
            gas_used=gas,
            usd_cost=self.schedule.usd_exact(gas),
            success=success,
            error=error,
            events=events,
        )
        self.receipts.append(receipt)
        return receipt

    # -- clock -------------------------------------------------------------

    def current_time(self) -> TimeFrame:
        return TimeFrame.from_tick(self.tick)

    def advance_time(self, to: TimeFrame | int):
        target = to.tick if isinstance(to, TimeFrame) else int(to)
        if target < self.tick:
            raise LedgerError("clock cannot move backwards")
        while self.tick < target:
            self.tick += 1
            for contract in list(self.contracts.values()):
                contract.on_tick(self.tick)

    # -- bookkeeping hooks for settlement ------------------------------------

    def hook_burn(self, contract_address: bytes, amount: int):
        """Burn escrow during an epoch-boundary hook (no transaction)."""
        account = self.accounts[contract_address]
        if amount < 0 or amount > account.balance:
            raise LedgerError("invalid hook burn")
        account.balance -= amount
        self.burn_sink += amount

    # -- audit and export ----------------------------------------------------

    def audit(self):
        total = sum(acc.balance for acc in self.accounts.values())
        if total + self.gas_sink + self.burn_sink != self.minted:
            raise LedgerError(
                f"conservation violated: balances={total} gas={self.gas_sink} "
                f"burn={self.burn_sink} minted={self.minted}"
            )

    def gas_total(self) -> int:
        return sum(r.gas_used for r in self.receipts)

    def onchain_state(self, include_callers: bool = True) -> dict:
        return {
            "contracts": {addr.hex(): c.state_dump() for addr, c in sorted(self.contracts.items())},
            "receipts": [r.to_record(include_caller=include_callers) for r in self.receipts],
        }

    def state_digest(self, include_callers: bool = True) -> bytes:
        blob = json.dumps(self.onchain_state(include_callers), sort_keys=True).encode()
        return hash256(blob)
