"""Closed-form security and cost evaluators, with Monte Carlo cross-checks.

Availability: with onion depth l and per-courier availability a, a share
survives a reveal round only if all l of its layer holders show up, so the
per-share loss probability is p = 1 - a**l and the service succeeds when at
most n - t shares are lost:

    A_s = 1 - sum_{i=n-t+1..n} C(n,i) p**i (1-p)**(n-i)

Attack economics: buying one share via bribery costs l bribes, each just
above the deposit d a seller forfeits, so t shares cost t*l*d. A sybil
registrant controlling fraction p of the pool captures a share with
probability p**l; the expected deposit outlay to cover t captures,

    (v d t / n) * p**(1-l) / (1 - p),

is minimized at p* = (l-1)/l. The quoted minimum (l-1) v d is the raw
deposit x*d at that optimum: substituting x = (l-1) v sets the expected
captures n p***l to exactly cover t, which cancels the t/n factor.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Optional

import numpy as np

from .ledger import (
    FN_DEPLOY_SUPPLEMENTARY,
    FN_DEPLOY_SWITCH,
    FN_NEW_SERVICE,
    FN_RECIPIENT_RECEIPT,
    FN_REVEAL_IDENTITY,
    FN_REVEAL_PRIVKEY,
    FN_STRAWMAN_NEW_SERVICE,
    FN_STRAWMAN_REVEAL_RECEIPT,
    FN_STRAWMAN_REVEAL_SHARE,
    GasSchedule,
    SERVICE_FUNCTIONS,
    STRAWMAN_SERVICE_FUNCTIONS,
    fmt_usd,
)

MODE_LIGHTWEIGHT = "lightweight"
MODE_HEAVYWEIGHT = "heavyweight"
MODE_STRAWMAN = "strawman"


class AnalysisError(ValueError):
    pass


def _check_group(l: int, t: int, n: int):
    if l < 1:
        raise AnalysisError("onion depth must be at least 1")
    if not 1 <= t <= n:
        raise AnalysisError(f"invalid threshold t={t} for n={n}")


def share_loss_probability(l: int, a_t: float) -> float:
    if not 0.0 <= a_t <= 1.0:
        raise AnalysisError("availability must lie in [0, 1]")
    return float(1 - Fraction(a_t) ** l)


def availability(l: int, t: int, n: int, a_t: float) -> float:
    """Probability that at least t shares survive one reveal round."""
    _check_group(l, t, n)
    if not 0.0 <= a_t <= 1.0:
        raise AnalysisError("availability must lie in [0, 1]")
    p = 1 - Fraction(a_t) ** l
    tail = sum(
        comb(n, i) * p**i * (1 - p) ** (n - i) for i in range(n - t + 1, n + 1)
    )
    return float(1 - tail)


def availability_mc(l: int, t: int, n: int, a_t: float, trials: int, seed: int = 0) -> float:
    """Empirical check of the availability formula under its own loss model
    (every layer reveal is an independent coin)."""
    _check_group(l, t, n)
    if trials < 1:
        raise AnalysisError("need a positive trial count")
    rng = np.random.default_rng(seed)
    surviving = np.zeros(trials, dtype=np.int64)
    chunk = 200_000
    done = 0
    while done < trials:
        size = min(chunk, trials - done)
        draws = rng.random((size, n, l)) < a_t
        surviving[done : done + size] = draws.all(axis=2).sum(axis=1)
        done += size
    return float((surviving >= t).mean())


def bribery_cost(t: int, l: int, d: float) -> float:
    """Deposit-denominated cost of buying t shares, l keys each."""
    if t < 1 or l < 1 or d <= 0:
        raise AnalysisError("bribery cost needs positive parameters")
    return t * l * d


def sybil_expected_deposit(l: int, v: int, d: float, t: int, n: int, p_m: float) -> float:
    """Expected deposit to capture t shares with a malicious fraction p_m."""
    if not 0 < p_m < 1:
        raise AnalysisError("malicious fraction must lie strictly inside (0, 1)")
    if l < 1 or v < 1 or d <= 0:
        raise AnalysisError("invalid sybil parameters")
    _check_group(l, t, n)
    return (v * d * t / n) * p_m ** (1 - l) / (1 - p_m)


def optimal_sybil_fraction(l: int) -> Fraction:
    """The malicious fraction minimizing the expected deposit: (l-1)/l."""
    if l < 2:
        # with a single layer the objective decreases toward p -> 0: no
        # interior optimum exists
        raise AnalysisError("optimal fraction is degenerate for l=1")
    return Fraction(l - 1, l)


def sybil_min_deposit(l: int, v: int, d: float) -> float:
    """Deposit outlay x*d at the optimal fraction: x = (l-1) v accounts."""
    if l < 2 or v < 1 or d <= 0:
        raise AnalysisError("invalid sybil parameters")
    return (l - 1) * v * d


@dataclass
class CostBreakdown:
    """Per-function and total cost of a run or of an analytic mode.

    `usd_quoted` columns use the published per-function USD prices, which is
    what the headline figures (2.21 lightweight, 9.31 + 0.48n heavyweight)
    are quoted in; `usd_exact` is the exact gas*rate product.
    """

    mode: str
    n: Optional[int]
    rows: dict  # fn -> {calls, units, gas, usd_exact, usd_quoted}
    total_gas: int
    total_usd_exact: Fraction
    service_gas: int
    service_usd_quoted: Fraction
    fixed_usd_quoted: Optional[Fraction] = None
    per_mailman_usd_quoted: Optional[Fraction] = None

    def service_usd_display(self) -> str:
        return fmt_usd(self.service_usd_quoted)

    def table(self) -> list[dict]:
        out = []
        for fn in sorted(self.rows):
            row = self.rows[fn]
            out.append(
                {
                    "function": fn,
                    "calls": row["calls"],
                    "units": row["units"],
                    "gas": row["gas"],
                    "usd_exact": str(row["usd_exact"]),
                    "usd_quoted": fmt_usd(row["usd_quoted"]),
                }
            )
        return out


def _empty_rows():
    return {}


def _add_row(rows, fn, units, gas, usd_exact, usd_quoted):
    row = rows.setdefault(
        fn, {"calls": 0, "units": 0, "gas": 0, "usd_exact": Fraction(0), "usd_quoted": Fraction(0)}
    )
    row["calls"] += 1
    row["units"] += units
    row["gas"] += gas
    row["usd_exact"] += usd_exact
    row["usd_quoted"] += usd_quoted


def cost_report(
    trace=None,
    mode: Optional[str] = None,
    n: Optional[int] = None,
    schedule: Optional[GasSchedule] = None,
) -> CostBreakdown:
    """Cost breakdown of a recorded trace, or the analytic cost of a mode.

    Pass either a ScenarioTrace (or its receipt record list) or a
    (mode, n) pair with mode in {lightweight, heavyweight, strawman}.
    """
    schedule = schedule or GasSchedule.default()
    if (trace is None) == (mode is None):
        raise AnalysisError("pass exactly one of trace / mode")
    if trace is not None:
        return _cost_from_trace(trace, schedule)
    if mode not in (MODE_LIGHTWEIGHT, MODE_HEAVYWEIGHT, MODE_STRAWMAN):
        raise AnalysisError(f"unknown mode {mode!r}")
    if n is None or n < 1:
        raise AnalysisError("analytic cost needs the group size n")
    return _cost_from_mode(mode, n, schedule)


def _cost_from_trace(trace, schedule: GasSchedule) -> CostBreakdown:
    receipts = trace.receipts if hasattr(trace, "receipts") else trace
    mode = getattr(trace, "mode", "trace")
    rows = _empty_rows()
    for receipt in receipts:
        fn = receipt["function"]
        units = receipt.get("units", 1)
        gas = receipt["gas_used"]
        if fn not in schedule.gas:
            raise AnalysisError(f"unknown function in trace: {fn}")
        _add_row(
            rows,
            fn,
            units,
            gas,
            schedule.usd_exact(gas),
            schedule.usd_quoted(fn, units),
        )
    service_fns = SERVICE_FUNCTIONS | STRAWMAN_SERVICE_FUNCTIONS
    total_gas = sum(r["gas"] for r in rows.values())
    return CostBreakdown(
        mode=mode,
        n=None,
        rows=rows,
        total_gas=total_gas,
        total_usd_exact=sum((r["usd_exact"] for r in rows.values()), Fraction(0)),
        service_gas=sum(r["gas"] for fn, r in rows.items() if fn in service_fns),
        service_usd_quoted=sum(
            (r["usd_quoted"] for fn, r in rows.items() if fn in service_fns), Fraction(0)
        ),
    )


def _cost_from_mode(mode: str, n: int, schedule: GasSchedule) -> CostBreakdown:
    rows = _empty_rows()

    def add(fn, units=1, calls=1):
        for _ in range(calls):
            gas = schedule.gas_for(fn, units)
            _add_row(rows, fn, units, gas, schedule.usd_exact(gas), schedule.usd_quoted(fn, units))

    if mode == MODE_LIGHTWEIGHT:
        add(FN_DEPLOY_SWITCH)
        add(FN_NEW_SERVICE)
        add(FN_RECIPIENT_RECEIPT)
        fixed = sum((r["usd_quoted"] for r in rows.values()), Fraction(0))
        per_mailman = Fraction(0)
    elif mode == MODE_HEAVYWEIGHT:
        add(FN_DEPLOY_SWITCH)
        add(FN_NEW_SERVICE)
        add(FN_DEPLOY_SUPPLEMENTARY)
        add(FN_RECIPIENT_RECEIPT)
        fixed = sum((r["usd_quoted"] for r in rows.values()), Fraction(0))
        add(FN_REVEAL_IDENTITY, units=n)
        add(FN_REVEAL_PRIVKEY, calls=n)
        per_mailman = schedule.usd_quoted(FN_REVEAL_IDENTITY, 1) + schedule.usd_quoted(
            FN_REVEAL_PRIVKEY
        )
    else:
        add(FN_STRAWMAN_NEW_SERVICE, units=n)
        add(FN_STRAWMAN_REVEAL_SHARE, calls=n)
        add(FN_STRAWMAN_REVEAL_RECEIPT)
        fixed = None
        per_mailman = None

    total_gas = sum(r["gas"] for r in rows.values())
    service = sum((r["usd_quoted"] for r in rows.values()), Fraction(0))
    return CostBreakdown(
        mode=mode,
        n=n,
        rows=rows,
        total_gas=total_gas,
        total_usd_exact=sum((r["usd_exact"] for r in rows.values()), Fraction(0)),
        service_gas=total_gas,
        service_usd_quoted=service,
        fixed_usd_quoted=fixed,
        per_mailman_usd_quoted=per_mailman,
    )
