#!/usr/bin/env python3
"""Dispute paths: mode switching, enforcement, and slashing.

First run: every courier withholds its private reveal, so the recipient
cannot restore the key in epoch 1. Any courier can then deploy the
supplementary contract, identities are revealed from the decrypted
agreement bundle, keys go on-chain, and the delivery completes in
heavyweight mode at O(n) cost.

Second run: one courier leaks its timeframe key during the pending phase.
An honest courier reports it, the leaker's deposit is slashed (half to the
reporter, half toward the mode-switch gas), and the delivery still lands.
"""

from tidsim import ScenarioConfig, cost_report, run_scenario
from tidsim.ledger import WEI_PER_ETHER, fmt_usd

n = 6
withheld = ScenarioConfig(
    seed=2,
    pool_size=n + 2,
    l=2,
    t=3,
    n=n,
    fault_policies={i: "withhold_light" for i in range(n + 2)},
)
trace = run_scenario(withheld)
breakdown = cost_report(trace=trace)
print("— withheld lightweight reveals —")
print("terminal status :", trace.status)
print("epoch path      :", " -> ".join(str(e) for e in trace.epoch_sequence))
print("service cost    : $%s (formula: 9.31 + 0.48*%d = $%.2f)"
      % (fmt_usd(breakdown.service_usd_quoted), n, 9.31 + 0.48 * n))
print()

leaky = ScenarioConfig(
    seed=3,
    pool_size=8,
    l=2,
    t=2,
    n=4,
    selection_override=(0, 1, 2, 3),
    fault_policies={0: "premature"},
)
trace = run_scenario(leaky)
print("— premature disclosure —")
print("terminal status :", trace.status)
print("epoch path      :", " -> ".join(str(e) for e in trace.epoch_sequence))
for slash in trace.slashes:
    print(
        "slash           : %s, accused %s…, %.2f ether (award %.2f, gas comp %.2f, burned %.2f)"
        % (
            slash["kind"],
            slash["accused"][:8],
            slash["amount"] / WEI_PER_ETHER,
            slash["award"] / WEI_PER_ETHER,
            slash["compensation"] / WEI_PER_ETHER,
            slash["burned"] / WEI_PER_ETHER,
        )
    )
