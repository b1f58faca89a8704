#!/usr/bin/env python3
"""What attacks cost: bribery and sybil registration.

Bribery: a rational courier sells a timeframe key only for more than the
deposit d it forfeits once the sale is reported, and one share takes l
keys, so t shares cost t*l*d. The simulated market reproduces the bound at
a 1% bribe premium, and blind bribery (no side channel identifying the
recruited group) wastes most of its budget on couriers holding nothing.

Sybil: capturing a share needs all l of its holders to be adversary
registrations; the deposit outlay is minimized at a malicious fraction of
(l-1)/l, i.e. x = (l-1)*v accounts, costing (l-1)*v*d.
"""

from tidsim import ScenarioConfig, bribery_cost, run_bribery, sybil_capture_trials
from tidsim.adversary import blind_bribery_trials
from tidsim.ledger import WEI_PER_ETHER

ETHER = WEI_PER_ETHER

print("— bribery with a side channel (targets known) —")
for t, l in ((2, 2), (4, 3)):
    n = t * l
    cfg = ScenarioConfig(
        seed=4,
        pool_size=n + 2,
        l=l,
        t=t,
        n=n,
        fault_policies={i: "briberable" for i in range(n + 2)},
    )
    outcome = run_bribery(cfg, bribe_per_key=int(1.01 * ETHER))
    print(
        "  t=%d l=%d: recovered=%s, spent %.2f ether (bound t*l*d = %.1f)"
        % (t, l, outcome.key_recovered, outcome.total_spent / ETHER, bribery_cost(t, l, 1.0))
    )

print()
print("— bribery without the side channel —")
t, l, n, pool = 2, 2, 4, 40
purchases = blind_bribery_trials(l, t, n, pool_size=pool, trials=2000, seed=5)
print(
    "  pool of %d, %d recruited: %.1f keys bought on average vs %d targeted"
    % (pool, n, purchases.mean(), t * l)
)

print()
print("— sybil sweep (l=3, v=100 innocents, d=1) —")
l, v, d, t, n, trials = 3, 100, 1.0, 4, 10, 20_000
print(f"  {'x':>4}  {'p_m':>6}  {'capture p':>10}  {'p_m^l':>8}  {'expected deposit':>16}")
best = (None, None)
for x in range(120, 301, 20):
    counts = sybil_capture_trials(l, v, x, t, n, trials, seed=x)
    rate = counts.mean() / n
    cost = x * d * t / (n * rate) if rate else float("inf")
    p_m = x / (x + v)
    if best[0] is None or cost < best[0]:
        best = (cost, x)
    print(f"  {x:>4}  {p_m:>6.3f}  {rate:>10.4f}  {p_m**l:>8.4f}  {cost:>16.1f}")
print(
    "  empirical minimum at x=%d; closed-form argmin x=(l-1)v=%d, where the "
    "deposit outlay x*d is %.0f" % (best[1], (l - 1) * v, (l - 1) * v * d)
)
