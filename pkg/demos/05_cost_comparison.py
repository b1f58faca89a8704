#!/usr/bin/env python3
"""Gas cost versus group size for the three execution modes.

The lightweight path never touches the chain per courier, so its column is
constant; the heavyweight path pays per identity and per key reveal; the
strawman design, which names couriers and commits share hashes at setup,
is linear from the start. Empirical columns come from full simulation runs,
analytic columns from the published per-function price list.
"""

from tidsim import ScenarioConfig, cost_report, run_scenario
from tidsim.ledger import fmt_usd

print(f"{'n':>3}  {'light gas':>10}  {'light $':>8}  {'heavy gas':>10}  {'heavy $':>8}  "
      f"{'straw gas':>10}  {'9.31+0.48n':>10}")

for n in (5, 10, 20, 30):
    light = run_scenario(
        ScenarioConfig(seed=6, pool_size=n + 2, l=3, t=4, n=n, withdraw_at_end=False)
    )
    heavy = run_scenario(
        ScenarioConfig(
            seed=6,
            pool_size=n + 2,
            l=3,
            t=4,
            n=n,
            fault_policies={i: "withhold_light" for i in range(n + 2)},
            withdraw_at_end=False,
        )
    )
    straw = run_scenario(
        ScenarioConfig(seed=6, pool_size=n + 2, l=1, t=4, n=n, mode="strawman", withdraw_at_end=False)
    )
    light_usd = fmt_usd(cost_report(trace=light).service_usd_quoted)
    heavy_usd = fmt_usd(cost_report(trace=heavy).service_usd_quoted)
    print(
        f"{n:>3}  {light.service_gas:>10}  {light_usd:>8}  {heavy.service_gas:>10}  "
        f"{heavy_usd:>8}  {straw.service_gas:>10}  {9.31 + 0.48 * n:>10.2f}"
    )

print()
print("analytic check at n=10:")
for mode in ("lightweight", "heavyweight", "strawman"):
    report = cost_report(mode=mode, n=10)
    print(f"  {mode:<12} {report.total_gas:>9} gas  ${fmt_usd(report.service_usd_quoted)}")
