#!/usr/bin/env python3
"""An all-honest delivery, start to finish.

Ten couriers are recruited silently: the only on-chain traffic the whole
run produces is the switch-contract deployment, the service commitment,
and the recipient's receipt, which is why the sender-side cost is flat
regardless of how many couriers hold shares.
"""

from tidsim import ScenarioConfig, adversary_view, cost_report, run_scenario
from tidsim.ledger import fmt_usd

config = ScenarioConfig(seed=1, pool_size=14, l=3, t=4, n=10)
trace = run_scenario(config)

print("terminal status :", trace.status)
print("epoch path      :", " -> ".join(str(e) for e in trace.epoch_sequence))
print("shares recovered:", trace.shares_recovered_light, "of", config.n)
print("info delivered  :", trace.info_delivered)
print()

print("on-chain service calls:")
breakdown = cost_report(trace=trace)
for row in breakdown.table():
    if row["function"] in ("deploySwitch", "newService", "recipientReceipt"):
        print(f"  {row['function']:<18} {row['gas']:>8} gas   ${row['usd_quoted']}")
print(f"  {'total':<18} {trace.service_gas:>8} gas   ${fmt_usd(breakdown.service_usd_quoted)}")
print()

# the registry lists the whole pool, but nothing visible before settlement
# binds any courier to this service
bindings = adversary_view(trace).recruitment_bindings()
print("couriers bound to the service by observable state:", sorted(bindings) or "none")
