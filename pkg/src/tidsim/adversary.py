"""Attack strategies, fault injection, and the adversary's observation API.

Bribery is modeled the way its cost bound counts it: the adversary escrows
one bait contract per (share, layer) purchase, and a rational courier sells
a key only for strictly more than the deposit it forfeits when the sale is
reported. Where the group size permits, targets are chosen with disjoint
holder windows, so a successful run buys exactly t*l keys.

Sybil runs reuse the sender's real selection and layer-assignment logic: a
share is captured only when all l of its holders are adversary accounts.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from random import Random
from typing import Optional

import numpy as np

from .actors import POLICY_BRIBERABLE, peel_with_keys
from .crypto import ss_restore
from .scenario import ConfigError, FAULT_POLICIES, ScenarioConfig, ScenarioRunner, ScenarioTrace


@dataclass(frozen=True)
class AttackParams:
    v: int  # innocent registered couriers
    x: int  # adversary-controlled registrations
    d: float  # deposit per courier
    budget: Optional[float] = None
    bribe_per_key: Optional[float] = None

    @property
    def p_m(self) -> float:
        return self.x / (self.x + self.v)


@dataclass
class AttackOutcome:
    shares_obtained: int
    key_recovered: bool
    total_spent: float
    deposits_forfeited: float
    trace: dict = field(default_factory=dict)


def disjoint_targets(t: int, l: int, n: int) -> list[int]:
    """Pick t share indices whose holder windows overlap as little as
    possible; fully disjoint picks exist whenever n >= t*l."""
    targets: list[int] = []
    covered: set[int] = set()
    for index in range(1, n + 1):
        window = {(index - 1 + j) % n for j in range(l)}
        if not window & covered:
            targets.append(index)
            covered |= window
        if len(targets) == t:
            return targets
    for index in range(1, n + 1):
        if index not in targets:
            targets.append(index)
        if len(targets) == t:
            break
    return targets


def run_bribery(
    config: ScenarioConfig,
    bribe_per_key: int,
    know_identities: bool = True,
    max_purchases: Optional[int] = None,
) -> AttackOutcome:
    """Buy timeframe keys during the pending phase and try to restore the key.

    `bribe_per_key` is in wei. With identity knowledge (the side-channel
    flag) the adversary targets t shares with disjoint layer windows and
    pays per (share, layer) bait contract; blind, it bribes uniformly
    random registrants until it runs out of attempts.
    """
    runner = ScenarioRunner(config)
    runner.build_marketplace()
    runner.sender.setup()
    runner.sender.recruit(
        runner.pool,
        list(config.selection_override) if config.selection_override is not None else None,
    )
    cfg = runner.config
    d = cfg.deposit_wei

    purchases: list[tuple[int, str]] = []  # (share index or 0, seller)
    keys: dict[bytes, bool] = {}
    sellers: set[bytes] = set()

    def try_buy(mailman, share_index: int) -> bool:
        threshold = mailman.bribe_threshold if mailman.bribe_threshold is not None else d
        if mailman.policy != POLICY_BRIBERABLE or bribe_per_key <= threshold:
            return False
        purchases.append((share_index, mailman.address.hex()))
        sellers.add(mailman.address)
        keys[mailman.timeframe_keys[cfg.timeframe_tick].privkey] = True
        mailman.sold_key = True
        return True

    if know_identities:
        for share_index in disjoint_targets(cfg.t, cfg.l, cfg.n):
            for holder in runner.sender.layer_holders(share_index):
                try_buy(holder, share_index)
    else:
        order = list(runner.pool)
        runner.rng.shuffle(order)
        limit = max_purchases if max_purchases is not None else len(order)
        for mailman in order[:limit]:
            try_buy(mailman, 0)
            shares = peel_with_keys(runner.sender.onions, list(keys))
            if len(shares) >= cfg.t:
                break

    shares = peel_with_keys(runner.sender.onions, list(keys))
    recovered = False
    if len(shares) >= cfg.t:
        recovered = ss_restore(list(shares.values()), cfg.t) == runner.sender.key
    return AttackOutcome(
        shares_obtained=len(shares),
        key_recovered=recovered,
        total_spent=len(purchases) * bribe_per_key,
        deposits_forfeited=len(sellers) * d,
        trace={
            "purchases": purchases,
            "selected": [m.address.hex() for m in runner.sender.selected],
            "know_identities": know_identities,
        },
    )


def blind_bribery_trials(
    l: int, t: int, n: int, pool_size: int, trials: int, seed: int = 0
) -> np.ndarray:
    """Purchases needed per trial when bribing uniformly without identity
    knowledge (combinatorial model: a share unlocks when its l consecutive
    holders have all sold)."""
    rng = np.random.default_rng(seed)
    counts = np.zeros(trials, dtype=np.int64)
    for trial in range(trials):
        recruited = rng.choice(pool_size, size=n, replace=False)
        holder_of = {int(m): pos for pos, m in enumerate(recruited)}
        bought_positions: set[int] = set()
        purchases = 0
        for target in rng.permutation(pool_size):
            purchases += 1
            pos = holder_of.get(int(target))
            if pos is not None:
                bought_positions.add(pos)
            unlocked = sum(
                1
                for i in range(n)
                if all((i + j) % n in bought_positions for j in range(l))
            )
            if unlocked >= t:
                break
        counts[trial] = purchases
    return counts


def run_sybil(config: ScenarioConfig, x: int, seed: Optional[int] = None) -> AttackOutcome:
    """Register x sybil couriers next to the configured pool and count how
    many shares land entirely on adversary accounts."""
    if x < 0:
        raise ConfigError("sybil count must be non-negative")
    v = config.pool_size
    rng = Random(config.seed if seed is None else seed)
    pool = v + x
    selected = rng.sample(range(pool), config.n)
    adversarial = [i >= v for i in selected]  # sybils occupy indices v..v+x-1
    captured = 0
    for i in range(config.n):
        if all(adversarial[(i + j) % config.n] for j in range(config.l)):
            captured += 1
    return AttackOutcome(
        shares_obtained=captured,
        key_recovered=captured >= config.t,
        total_spent=x * config.deposit_wei,
        deposits_forfeited=0,
        trace={"x": x, "v": v, "p_m": x / pool if pool else 0.0},
    )


def sybil_capture_trials(
    l: int, v: int, x: int, t: int, n: int, trials: int, seed: int = 0
) -> np.ndarray:
    """Captured-share counts across trials (vectorized selection model)."""
    rng = np.random.default_rng(seed)
    pool = v + x
    keys = rng.random((trials, pool))
    # per trial, the n smallest keys are the selected couriers
    selected = np.argsort(keys, axis=1)[:, :n]
    adversarial = selected >= v
    captured = np.ones((trials, n), dtype=bool)
    for j in range(l):
        captured &= np.roll(adversarial, -j, axis=1)
    return captured.sum(axis=1)


def inject_fault(config: ScenarioConfig, mailman: int, kind: str, when: Optional[int] = None) -> ScenarioConfig:
    """Override one courier's honesty policy for a run (returns a new config)."""
    if not 0 <= mailman < config.pool_size:
        raise ConfigError(f"unknown mailman index {mailman}")
    if kind not in FAULT_POLICIES:
        raise ConfigError(f"unknown fault kind {kind!r}")
    faults = dict(config.fault_policies)
    faults[mailman] = kind
    return replace(config, fault_policies=faults).validate()


@dataclass
class ObservationSet:
    """Everything the adversary can see of one run, per the visibility flags."""

    receipts: list[dict]
    contracts: dict
    broadcasts: list[dict]
    private_meta: Optional[list[dict]]

    def recruitment_bindings(self) -> set[str]:
        """Courier addresses provably bound to a service by visible state."""
        bound: set[str] = set()
        for dump in self.contracts.values():
            for svc in dump.get("services", {}).values():
                bound.update(svc.get("identities", {}).values())
                for entry in svc.get("entries", {}).values():
                    bound.add(entry["mailman"])
            for identity in dump.get("identities", {}).values():
                bound.add(identity["mailman"])
        return bound


def adversary_view(trace: ScenarioTrace, metadata_visible: Optional[bool] = None) -> ObservationSet:
    """Assemble the observation set from a finished run's trace.

    On-chain bytes (receipts and pre-settlement contract state) and
    broadcast payloads are always visible; private-channel metadata only
    when the scenario ran with metadata visibility on.
    """
    visible = trace.config.get("metadata_visible", True) if metadata_visible is None else metadata_visible
    broadcasts = [m for m in trace.messages if m["to"] == "broadcast" and m["delivered"]]
    private = None
    if visible:
        private = [
            {k: m[k] for k in ("from", "to", "size", "tick")}
            for m in trace.messages
            if m["to"] != "broadcast"
        ]
    return ObservationSet(
        receipts=trace.receipts,
        contracts=trace.pre_settlement_state.get("contracts", {}),
        broadcasts=broadcasts,
        private_meta=private,
    )
