"""Ledger tests: accounts, gas metering, clock, conservation."""

from fractions import Fraction
from random import Random

import pytest

from tidsim.ledger import (
    Contract,
    ContractRevert,
    FN_DEPLOY_SUPPLEMENTARY,
    FN_DEPLOY_SWITCH,
    FN_NEW_SERVICE,
    FN_RECIPIENT_RECEIPT,
    GasSchedule,
    Ledger,
    LedgerError,
    TimeFrame,
    WEI_PER_ETHER,
    fmt_usd,
    round_usd_cents,
)

ETHER = WEI_PER_ETHER


class PingContract(Contract):
    code_id = "ping"
    deploy_fn = FN_DEPLOY_SWITCH  # borrow a scheduled function for tests

    def init_state(self):
        self.state = {"count": 0, "ticks": []}

    def gas_units(self, fn, args):
        return len(args.get("items", [])) or 1

    def fn_newService(self, ctx, items=None, fail=False, send_back=0):
        self.state["count"] += 1
        if send_back:
            ctx.pay_out(ctx.caller, send_back)
        if fail:
            raise ContractRevert("requested failure")

    def on_tick(self, tick):
        self.state["ticks"].append(tick)


@pytest.fixture
def ledger():
    return Ledger()


@pytest.fixture
def funded(ledger):
    account = ledger.create_eoa(Random(1))
    ledger.fund(account.address, 100 * ETHER)
    return account


def deploy_ping(ledger, account):
    return ledger.deploy_contract(account.address, PingContract)


class TestAccounts:
    def test_create_then_fund(self, ledger):
        account = ledger.create_eoa(Random(5))
        ledger.fund(account.address, 100)
        assert ledger.balance(account.address) == 100

    def test_fund_unknown_address(self, ledger):
        with pytest.raises(LedgerError):
            ledger.fund(b"\x00" * 20, 1)

    def test_distinct_addresses_from_one_stream(self, ledger):
        rng = Random(9)
        seen = {ledger.create_eoa(rng).address for _ in range(500)}
        assert len(seen) == 500


class TestDeployment:
    def test_predicted_address_matches(self, ledger, funded):
        predicted = ledger.predict_address(funded.address, 0)
        contract = deploy_ping(ledger, funded)
        assert contract.address == predicted
        # second deploy bumps the nonce
        assert ledger.deploy_contract(funded.address, PingContract).address == ledger.predict_address(
            funded.address, 1
        )

    def test_switch_deploy_gas(self, ledger, funded):
        deploy_ping(ledger, funded)
        assert ledger.receipts[-1].gas_used == 616_666

    def test_supplementary_gas_constant(self):
        assert GasSchedule.default().gas_for(FN_DEPLOY_SUPPLEMENTARY) == 2_425_356

    def test_deploy_needs_balance(self, ledger):
        poor = ledger.create_eoa(Random(2))
        with pytest.raises(LedgerError):
            deploy_ping(ledger, poor)


class TestTransactions:
    def test_new_service_gas(self, ledger, funded):
        contract = deploy_ping(ledger, funded)
        receipt = ledger.submit_tx(funded.address, contract.address, FN_NEW_SERVICE)
        assert receipt.gas_used == 83_121
        assert receipt.success

    def test_recipient_receipt_usd(self):
        schedule = GasSchedule.default()
        exact = schedule.usd_exact(schedule.gas_for(FN_RECIPIENT_RECEIPT))
        assert fmt_usd(exact) == "0.16"
        assert schedule.usd_quoted(FN_RECIPIENT_RECEIPT) == Fraction("0.16")

    def test_unfunded_caller_rejected(self, ledger, funded):
        contract = deploy_ping(ledger, funded)
        poor = ledger.create_eoa(Random(3))
        before = contract.state["count"]
        with pytest.raises(LedgerError):
            ledger.submit_tx(poor.address, contract.address, FN_NEW_SERVICE)
        assert contract.state["count"] == before
        assert not any(r.caller == poor.address for r in ledger.receipts)

    def test_revert_charges_gas_and_rolls_back(self, ledger, funded):
        contract = deploy_ping(ledger, funded)
        sink_before = ledger.gas_sink
        receipt = ledger.submit_tx(
            funded.address, contract.address, FN_NEW_SERVICE, {"fail": True}, value=5
        )
        assert not receipt.success
        assert receipt.error == "requested failure"
        assert contract.state["count"] == 0
        assert ledger.gas_sink > sink_before
        assert ledger.balance(contract.address) == 0
        ledger.audit()

    def test_unknown_target(self, ledger, funded):
        with pytest.raises(LedgerError):
            ledger.submit_tx(funded.address, b"\x01" * 20, FN_NEW_SERVICE)

    def test_unit_priced_call(self, ledger, funded):
        schedule = ledger.schedule
        contract = deploy_ping(ledger, funded)
        receipt = ledger.submit_tx(
            funded.address, contract.address, FN_NEW_SERVICE, {"items": [1, 2, 3]}
        )
        assert receipt.units == 3
        assert receipt.gas_used == schedule.gas_for(FN_NEW_SERVICE, 3)

    def test_value_escrow_and_payout(self, ledger, funded):
        contract = deploy_ping(ledger, funded)
        ledger.submit_tx(funded.address, contract.address, FN_NEW_SERVICE, value=10)
        assert ledger.balance(contract.address) == 10
        ledger.submit_tx(
            funded.address, contract.address, FN_NEW_SERVICE, {"send_back": 10}
        )
        assert ledger.balance(contract.address) == 0
        ledger.audit()


class TestClock:
    def test_advance_to_same_time_is_noop(self, ledger):
        ledger.advance_time(TimeFrame(0, 0))
        assert ledger.tick == 0

    def test_epoch_boundary_hooks_fire(self, ledger, funded):
        contract = deploy_ping(ledger, funded)
        ledger.advance_time(TimeFrame(0, 3))
        assert contract.state["ticks"] == [1, 2, 3]

    def test_regression_rejected(self, ledger):
        ledger.advance_time(5)
        with pytest.raises(LedgerError):
            ledger.advance_time(4)

    def test_timeframe_tick_round_trip(self):
        tf = TimeFrame(3, 7)
        assert TimeFrame.from_tick(tf.tick) == tf
        assert TimeFrame(1, 0).tick == 24


class TestMoney:
    def test_usd_cost_is_exact_rational(self, ledger, funded):
        contract = deploy_ping(ledger, funded)
        receipt = ledger.submit_tx(funded.address, contract.address, FN_NEW_SERVICE)
        expected = Fraction(83_121) * Fraction(167, 10**10) * 175
        assert receipt.usd_cost == expected

    def test_round_half_up(self):
        assert round_usd_cents(Fraction("2.204")) == Fraction("2.20")
        assert round_usd_cents(Fraction("2.205")) == Fraction("2.21")
        assert fmt_usd(Fraction("9.305")) == "9.31"

    def test_published_prices_match_table(self):
        schedule = GasSchedule.default()
        assert schedule.usd_quoted(FN_DEPLOY_SWITCH) == Fraction("1.81")
        assert schedule.usd_quoted(FN_DEPLOY_SUPPLEMENTARY) == Fraction("7.10")

    def test_conservation_across_random_activity(self, ledger, funded):
        rng = Random(17)
        contract = deploy_ping(ledger, funded)
        for _ in range(50):
            action = rng.randrange(3)
            if action == 0:
                ledger.submit_tx(
                    funded.address, contract.address, FN_NEW_SERVICE, value=rng.randrange(100)
                )
            elif action == 1:
                ledger.submit_tx(
                    funded.address,
                    contract.address,
                    FN_NEW_SERVICE,
                    {"fail": rng.random() < 0.5},
                )
            else:
                ledger.advance_time(ledger.tick + 1)
            ledger.audit()


class TestDeterminism:
    def test_state_digest_stable(self):
        def run():
            ledger = Ledger()
            account = ledger.create_eoa(Random(4))
            ledger.fund(account.address, ETHER)
            contract = ledger.deploy_contract(account.address, PingContract)
            ledger.submit_tx(account.address, contract.address, FN_NEW_SERVICE)
            ledger.advance_time(3)
            return ledger.state_digest()

        assert run() == run()

    def test_caller_exclusion_changes_digest_scope(self, ledger, funded):
        contract = deploy_ping(ledger, funded)
        ledger.submit_tx(funded.address, contract.address, FN_NEW_SERVICE)
        full = ledger.onchain_state(include_callers=True)
        redacted = ledger.onchain_state(include_callers=False)
        assert "caller" in full["receipts"][-1]
        assert "caller" not in redacted["receipts"][-1]
