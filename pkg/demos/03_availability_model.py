#!/usr/bin/env python3
"""Service availability vs onion depth, closed form against Monte Carlo.

A share survives a reveal round only when all l of its layer holders show
up, so deeper onions trade availability for attack resilience. At 95%
courier availability and [t,n]=[4,10], depth 3 still gives four nines.
"""

from tidsim import availability, availability_mc

COURIER_AVAILABILITY = 0.95
TRIALS = 200_000

for t, n in ((2, 5), (4, 10)):
    print(f"[t,n] = [{t},{n}], courier availability {COURIER_AVAILABILITY:.0%}")
    print(f"  {'l':>2}  {'closed form':>12}  {'monte carlo':>12}")
    for l in range(1, 6):
        closed = availability(l, t, n, COURIER_AVAILABILITY)
        mc = availability_mc(l, t, n, COURIER_AVAILABILITY, TRIALS, seed=l)
        print(f"  {l:>2}  {closed:>12.6f}  {mc:>12.6f}")
    print()

print("nines at [4,10]:")
for l in (3, 4):
    a = availability(l, 4, 10, COURIER_AVAILABILITY)
    nines = 0
    while a < 1 and round(a, nines + 1) >= 1 - 10 ** -(nines + 1):
        nines += 1
    print(f"  l={l}: {a:.6f}  (~{nines} nines)")
