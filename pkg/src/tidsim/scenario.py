"""Scenario configuration, the simulation driver, and run traces.

A scenario builds one marketplace (ledger + agent + registered pool), sets
up one delivery service, and drives it through the pending phase and the
delivery epochs until settlement. Everything is a deterministic function of
(config, seed): actor steps run in fixed order, availability coin flips come
from the single injected random stream, and the trace hash is reproducible
byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from random import Random
from typing import Optional

from .actors import (
    FAULT_POLICIES,
    MailmanActor,
    POLICY_ABSENT,
    POLICY_FAKE,
    POLICY_HONEST,
    POLICY_PREMATURE,
    POLICY_WITHHOLD_LIGHT,
    ProtocolError,
    RecipientActor,
    SenderActor,
    TAG_BUNDLE,
    TAG_KEY,
    TAG_PACKAGE,
    TOPIC,
    body_of,
    peel_with_keys,
    tag_of,
)
from .channels import BROADCAST, MessageBus
from .contracts import (
    AgentContract,
    MAILMAN_ACTIVE,
    STATUS_DELIVERED_LIGHT,
    StrawmanContract,
)
from .crypto import (
    Share,
    decode_parts,
    encode_parts,
    hash256,
    keypair_gen,
    new_secret_key,
    ss_restore,
    ss_split,
    sym_decrypt,
    sym_encrypt,
)
from .ledger import (
    FN_DEPLOY_SUPPLEMENTARY,
    FN_INFORM_AGENT,
    FN_PROVE_AGREEMENT,
    FN_RECIPIENT_RECEIPT,
    FN_REPORT_ABSENT,
    FN_REPORT_FAKE,
    FN_REPORT_PREMATURE,
    FN_REVEAL_IDENTITY,
    FN_REVEAL_PRIVKEY,
    FN_STRAWMAN_NEW_SERVICE,
    FN_STRAWMAN_REPORT_PREMATURE,
    FN_STRAWMAN_REVEAL_RECEIPT,
    FN_STRAWMAN_REVEAL_SHARE,
    FN_WITHDRAW,
    GasSchedule,
    Ledger,
    SERVICE_FUNCTIONS,
    STRAWMAN_SERVICE_FUNCTIONS,
    WEI_PER_ETHER,
)

MODE_SILENT = "silent"
MODE_STRAWMAN = "strawman"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated knobs for one simulation run (see README for the schema)."""

    seed: int = 0
    pool_size: int = 12
    l: int = 3
    t: int = 4
    n: int = 10
    deposit_wei: int = WEI_PER_ETHER
    remuneration_wei: int = WEI_PER_ETHER // 2
    min_deposit_wei: Optional[int] = None
    availability: float = 1.0
    epoch_ticks: int = 1
    day: int = 0
    slot: int = 8
    fault_policies: dict = field(default_factory=dict)  # pool index -> policy
    refusals: tuple = ()  # pool indices that refuse recruitment
    selection_override: Optional[tuple] = None  # pool indices, length n
    withdraw_at_end: bool = True
    mode: str = MODE_SILENT
    metadata_visible: bool = True
    drop_prob: float = 0.0
    tamper_package: bool = False

    @property
    def timeframe_tick(self) -> int:
        return self.day * 24 + self.slot

    def validate(self) -> "ScenarioConfig":
        if self.pool_size < self.n:
            raise ConfigError(f"pool_size {self.pool_size} below group size n={self.n}")
        if not 1 <= self.t <= self.n:
            raise ConfigError(f"invalid threshold t={self.t} for n={self.n}")
        if not 1 <= self.l <= self.n:
            raise ConfigError(f"onion depth l={self.l} must be within 1..n")
        if not 0.0 <= self.availability <= 1.0:
            raise ConfigError("availability must lie in [0, 1]")
        if not 0.0 <= self.drop_prob < 1.0:
            raise ConfigError("drop_prob must lie in [0, 1)")
        if self.epoch_ticks < 1:
            raise ConfigError("epoch_ticks must be at least 1")
        if self.timeframe_tick < 3:
            raise ConfigError("time frame too early: setup and pending need ticks 0..2")
        if self.mode not in (MODE_SILENT, MODE_STRAWMAN):
            raise ConfigError(f"unknown mode {self.mode!r}")
        for index, policy in self.fault_policies.items():
            if not 0 <= int(index) < self.pool_size:
                raise ConfigError(f"fault policy names unknown mailman {index}")
            if policy not in FAULT_POLICIES:
                raise ConfigError(f"unknown fault policy {policy!r}")
        for index in self.refusals:
            if not 0 <= index < self.pool_size:
                raise ConfigError(f"refusal names unknown mailman {index}")
        if self.selection_override is not None:
            chosen = list(self.selection_override)
            if len(chosen) != self.n or len(set(chosen)) != self.n:
                raise ConfigError("selection_override must list n distinct pool indices")
            if any(not 0 <= i < self.pool_size for i in chosen):
                raise ConfigError("selection_override names unknown mailmen")
        if self.deposit_wei <= 0 or self.remuneration_wei <= 0:
            raise ConfigError("deposit and remuneration must be positive")
        return self

    def to_dict(self) -> dict:
        raw = asdict(self)
        raw["fault_policies"] = {str(k): v for k, v in self.fault_policies.items()}
        raw["refusals"] = list(self.refusals)
        raw["selection_override"] = (
            list(self.selection_override) if self.selection_override is not None else None
        )
        return raw

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        data = dict(raw)
        if "fault_policies" in data:
            data["fault_policies"] = {int(k): v for k, v in data["fault_policies"].items()}
        if "refusals" in data:
            data["refusals"] = tuple(data["refusals"])
        if data.get("selection_override") is not None:
            data["selection_override"] = tuple(data["selection_override"])
        return cls(**data).validate()

    @classmethod
    def from_json_file(cls, path: str) -> "ScenarioConfig":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from exc
        return cls.from_dict(raw)


@dataclass
class ScenarioTrace:
    config: dict
    mode: str
    status: str
    epoch_sequence: list[int]
    receipts: list[dict]
    messages: list[dict]
    slashes: list[dict]
    selected: list[int]
    selected_addresses: list[str]
    balances: dict[str, int]
    roles: dict[str, str]
    total_gas: int
    service_gas: int
    shares_recovered_light: int
    shares_recovered_heavy: int
    info_delivered: bool
    pre_settlement_state: dict
    pre_settlement_digest: str
    final_digest: str

    def trace_hash(self) -> str:
        blob = json.dumps(
            {
                "config": self.config,
                "status": self.status,
                "epochs": self.epoch_sequence,
                "receipts": self.receipts,
                "messages": self.messages,
                "balances": self.balances,
                "digest": self.final_digest,
            },
            sort_keys=True,
        ).encode()
        return hash256(blob).hex()

    def summary(self) -> dict:
        return {
            "type": "summary",
            "mode": self.mode,
            "status": self.status,
            "epochs": self.epoch_sequence,
            "total_gas": self.total_gas,
            "service_gas": self.service_gas,
            "info_delivered": self.info_delivered,
            "slashes": len(self.slashes),
            "trace_hash": self.trace_hash(),
        }

    def to_jsonl(self) -> str:
        lines = [json.dumps(self.summary(), sort_keys=True)]
        lines += [json.dumps(r, sort_keys=True) for r in self.receipts]
        lines += [json.dumps(m, sort_keys=True) for m in self.messages]
        return "\n".join(lines) + "\n"


class ScenarioRunner:
    """Builds one marketplace and drives one service run to settlement."""

    def __init__(self, config: ScenarioConfig, schedule: Optional[GasSchedule] = None):
        self.config = config.validate()
        self.rng = Random(config.seed)
        self.ledger = Ledger(schedule)
        self.bus = MessageBus(drop_prob=config.drop_prob, rng=self.rng)
        self.agent: Optional[AgentContract] = None
        self.strawman: Optional[StrawmanContract] = None
        self.operator = None
        self.sender: Optional[SenderActor] = None
        self.recipient: Optional[RecipientActor] = None
        self.pool: list[MailmanActor] = []
        self.key_pool: dict[int, int] = {}  # scalars seen on public broadcasts
        self.shares_light = 0
        self.shares_heavy = 0

    # -- marketplace -----------------------------------------------------------

    def build_marketplace(self):
        cfg = self.config
        fund = 10_000 * WEI_PER_ETHER

        operator_kp = keypair_gen(self.rng)
        self.ledger.register_eoa(operator_kp.address)
        self.ledger.fund(operator_kp.address, fund)
        self.operator = operator_kp

        if cfg.mode == MODE_SILENT:
            self.agent = self.ledger.deploy_contract(
                operator_kp.address,
                AgentContract,
                min_deposit=cfg.min_deposit_wei if cfg.min_deposit_wei is not None else cfg.deposit_wei,
                epoch_ticks=cfg.epoch_ticks,
            )
        else:
            self.strawman = self.ledger.deploy_contract(
                operator_kp.address,
                StrawmanContract,
                min_deposit=cfg.min_deposit_wei if cfg.min_deposit_wei is not None else cfg.deposit_wei,
                settle_ticks=2 * cfg.epoch_ticks,
            )

        sender_kp = keypair_gen(self.rng)
        sender_channel = keypair_gen(self.rng)
        recipient_kp = keypair_gen(self.rng)
        recipient_channel = keypair_gen(self.rng)
        for kp in (sender_kp, recipient_kp):
            self.ledger.register_eoa(kp.address)
            self.ledger.fund(kp.address, fund)
        self.bus.register_channel_key(sender_kp.address, sender_channel.pubkey)

        registry = self.agent if self.agent is not None else self.strawman
        for i in range(cfg.pool_size):
            mailman = MailmanActor(
                keypair=keypair_gen(self.rng),
                channel_keys=keypair_gen(self.rng),
                rng=self.rng,
                ledger=self.ledger,
                bus=self.bus,
                agent=registry,
                deposit=cfg.deposit_wei,
                policy=cfg.fault_policies.get(i, POLICY_HONEST),
                refuse_service=i in cfg.refusals,
            )
            self.ledger.register_eoa(mailman.address)
            self.ledger.fund(mailman.address, fund)
            mailman.register([cfg.timeframe_tick])
            self.pool.append(mailman)

        self.recipient = RecipientActor(
            keypair=recipient_kp,
            channel_keys=recipient_channel,
            rng=self.rng,
            ledger=self.ledger,
            bus=self.bus,
            agent=registry,
        )
        self.recipient.join()

        self.sender = SenderActor(
            keypair=sender_kp,
            rng=self.rng,
            ledger=self.ledger,
            bus=self.bus,
            agent=registry,
            recipient_addr=recipient_kp.address,
            info=b"pending-information-%d" % cfg.seed,
            l=cfg.l,
            t=cfg.t,
            n=cfg.n,
            timeframe_tick=cfg.timeframe_tick,
            remuneration=cfg.remuneration_wei,
            tamper_package=cfg.tamper_package,
        )
        self.ledger.audit()

    # -- helpers ---------------------------------------------------------------

    def _available(self) -> bool:
        return self.rng.random() < self.config.availability

    def _service(self) -> dict:
        return self.agent.state["services"][self.sender.service_id]

    def _recruited(self) -> list[MailmanActor]:
        return self.sender.selected

    def _drain_broadcast_keys(self):
        """Route public key reveals to the shared pool and the recipient."""
        self.bus.deliver_pending(self.ledger.tick)
        for listener in [m.address for m in self.pool] + [self.recipient.address]:
            for msg in self.bus.recv(listener):
                if msg.to != BROADCAST or tag_of(msg.payload) != TAG_KEY:
                    continue
                scalar = int.from_bytes(body_of(msg.payload)[0], "big")
                if listener == self.recipient.address:
                    self.recipient.note_key(scalar)
                else:
                    self.key_pool[scalar] = msg.seq

    def _broadcast_key(self, mailman: MailmanActor):
        scalar = mailman.reveal_scalar(self.config.timeframe_tick)
        self.bus.broadcast(mailman.address, TOPIC, TAG_KEY + encode_parts(scalar))

    def _sup_contract(self):
        sup_addr = bytes.fromhex(self._service()["sup_addr"])
        return self.ledger.contracts.get(sup_addr)

    def _first_honest(self, available_ok: set) -> Optional[MailmanActor]:
        for m in self._recruited():
            if m.policy in (POLICY_HONEST, POLICY_WITHHOLD_LIGHT) and m.address in available_ok:
                return m
        return None

    # -- the run -----------------------------------------------------------------

    def run(self) -> ScenarioTrace:
        self.build_marketplace()
        if self.config.mode == MODE_STRAWMAN:
            return self._run_strawman()
        return self._run_silent()

    def _run_silent(self) -> ScenarioTrace:
        cfg = self.config
        override = list(cfg.selection_override) if cfg.selection_override is not None else None
        self.sender.setup()
        self.sender.recruit(self.pool, override)
        self._deliver_recruitment_messages()

        # pending phase: deliberate disclosures, observation, mode switch
        self.ledger.advance_time(cfg.timeframe_tick - 2)
        self._pend_phase()
        self.ledger.audit()

        svc = self._service()
        self.ledger.advance_time(cfg.timeframe_tick)
        guard = 0
        while svc["epoch"] != 6:
            guard += 1
            if guard > 20:
                raise ProtocolError("epoch state machine failed to terminate")
            epoch = svc["epoch"]
            if epoch == 1:
                self._epoch1_lightweight()
            elif epoch == 2:
                self._epoch2_switch()
            elif epoch == 3:
                self._epoch3_reveal_onchain()
            elif epoch == 4:
                self._epoch4_reporting()
            elif epoch == 5:
                self._epoch5_second_receipt()
            if svc["epoch"] == epoch:
                self.ledger.advance_time(self.ledger.tick + cfg.epoch_ticks)
            self.ledger.audit()

        pre_state = self.ledger.onchain_state(include_callers=False)
        pre_digest = self.ledger.state_digest(include_callers=False)
        if cfg.withdraw_at_end:
            self._settlement_phase()
        self.ledger.audit()
        return self._build_trace(pre_state, pre_digest)

    def _deliver_recruitment_messages(self):
        """Bundle/onion/package fan-out, including the resend path."""
        self.bus.deliver_pending(self.ledger.tick)
        for mailman in self._recruited():
            for msg in self.bus.recv(mailman.address):
                if tag_of(msg.payload) == TAG_BUNDLE:
                    accepted = mailman.accept_bundle(self.sender.address, body_of(msg.payload))
                    if not accepted:
                        raise ProtocolError("mailman rejected a signed bundle")
        package_ok = False
        for msg in self.bus.recv(self.recipient.address):
            if tag_of(msg.payload) == TAG_PACKAGE:
                package_ok = self.recipient.accept_package(self.sender.address, msg.payload)
        for _ in range(3):
            if package_ok:
                break
            # drain any resend request; a lost package produces none and the
            # sender retries after a timeout either way
            self.bus.deliver_pending(self.ledger.tick)
            self.bus.recv(self.sender.address)
            self.sender.resend_package()
            self.bus.deliver_pending(self.ledger.tick)
            for msg in self.bus.recv(self.recipient.address):
                if tag_of(msg.payload) == TAG_PACKAGE:
                    package_ok = self.recipient.accept_package(self.sender.address, msg.payload)
        # a recipient that never received the package simply cannot restore;
        # the run then terminates as a failed delivery rather than an error

    def _pend_phase(self):
        disclosers = [m for m in self._recruited() if m.policy == POLICY_PREMATURE]
        disclosers += [
            m
            for m in self.pool
            if m.policy == POLICY_PREMATURE and not m.is_recruited()
        ]
        if not disclosers:
            return
        for mailman in disclosers:
            scalar = int.from_bytes(
                mailman.timeframe_keys[self.config.timeframe_tick].privkey, "big"
            )
            self.bus.broadcast(mailman.address, TOPIC, TAG_KEY + encode_parts(scalar))
        self._drain_broadcast_keys()
        self.ledger.advance_time(self.config.timeframe_tick - 1)

        observer = self._first_honest({m.address for m in self._recruited()})
        if observer is None:
            return
        svc = self._service()
        if not svc["heavyweight"]:
            self.ledger.submit_tx(
                observer.address,
                self.sender.switch.address,
                FN_DEPLOY_SUPPLEMENTARY,
                {"sup_code": observer.sup_code, "vrs_sup": observer.vrs_sup},
            )
        sup = self._sup_contract()
        for scalar in sorted(self.key_pool):
            self.ledger.submit_tx(
                observer.address,
                sup.address,
                FN_REPORT_PREMATURE,
                {"index": 0, "privkey": scalar},
            )

    def _epoch1_lightweight(self):
        cfg = self.config
        for mailman in self._recruited():
            if mailman.policy in (POLICY_ABSENT, POLICY_PREMATURE, POLICY_WITHHOLD_LIGHT):
                continue
            if not self._available():
                continue
            scalar = mailman.reveal_scalar(cfg.timeframe_tick)
            self.bus.send_private(
                mailman.address, self.recipient.address, TAG_KEY + encode_parts(scalar)
            )
        self.bus.deliver_pending(self.ledger.tick)
        for msg in self.bus.recv(self.recipient.address):
            if tag_of(msg.payload) == TAG_KEY:
                self.recipient.note_key(int.from_bytes(body_of(msg.payload)[0], "big"))
        if self.recipient.try_restore(cfg.t):
            self.shares_light = self.recipient.shares_recovered
            self._submit_receipt()
        else:
            self.shares_light = self.recipient.shares_recovered

    def _submit_receipt(self):
        if self.recipient.receipt_submitted:
            return
        receipt = self.ledger.submit_tx(
            self.recipient.address,
            self.agent.address,
            FN_RECIPIENT_RECEIPT,
            {
                "receipt": self.recipient.receipt_secret,
                "sender_addr": self.sender.address,
                "switch_addr": self.sender.switch.address,
            },
        )
        if receipt.success:
            self.recipient.receipt_submitted = True

    def _epoch2_switch(self):
        cfg = self.config
        available = {m.address for m in self._recruited() if self._available()}
        svc = self._service()
        deployer = self._first_honest(available)
        if not svc["heavyweight"]:
            if deployer is None:
                return  # nobody switches; the window will expire into failure
            self.ledger.submit_tx(
                deployer.address,
                self.sender.switch.address,
                FN_DEPLOY_SUPPLEMENTARY,
                {"sup_code": deployer.sup_code, "vrs_sup": deployer.vrs_sup},
            )
        for mailman in self._recruited():
            if mailman.policy in (POLICY_ABSENT, POLICY_PREMATURE):
                continue
            if mailman.address not in available:
                continue
            self._broadcast_key(mailman)
        self._drain_broadcast_keys()
        if deployer is None:
            return
        keys = [s.to_bytes(32, "big") for s in sorted(self.key_pool) if s < 2**256]
        shares = peel_with_keys(deployer.onions, keys)
        self.shares_heavy = len(shares)
        if len(shares) < cfg.t:
            return
        key = ss_restore(list(shares.values()), cfg.t)
        agreements = deployer.decrypt_all_agreements(key)
        self.ledger.submit_tx(
            deployer.address,
            self._sup_contract().address,
            FN_REVEAL_IDENTITY,
            {"agreements": agreements},
        )

    def _epoch3_reveal_onchain(self):
        cfg = self.config
        sup = self._sup_contract()
        for mailman in self._recruited():
            if mailman.policy in (POLICY_ABSENT, POLICY_PREMATURE):
                continue
            if not self._available():
                continue
            self.ledger.submit_tx(
                mailman.address,
                sup.address,
                FN_REVEAL_PRIVKEY,
                {"index": mailman.index, "privkey": mailman.reveal_scalar(cfg.timeframe_tick)},
            )

    def _epoch4_reporting(self):
        sup = self._sup_contract()
        if sup is None:
            return
        reporter = self._first_honest({m.address for m in self._recruited()})
        if reporter is None:
            return
        reported = False
        for index in sorted(sup.state["identities"], key=int):
            if index not in sup.state["revealed_privkeys"]:
                receipt = self.ledger.submit_tx(
                    reporter.address, sup.address, FN_REPORT_ABSENT, {"index": int(index)}
                )
                reported = reported or receipt.success
            elif sup.state["fake_marks"].get(index):
                receipt = self.ledger.submit_tx(
                    reporter.address, sup.address, FN_REPORT_FAKE, {"index": int(index)}
                )
                reported = reported or receipt.success
        if reported or sup.state["premature_reports"]:
            self.ledger.submit_tx(reporter.address, sup.address, FN_INFORM_AGENT)

    def _epoch5_second_receipt(self):
        sup = self._sup_contract()
        if sup is not None:
            for index, scalar_hex in sup.state["revealed_privkeys"].items():
                if not sup.state["fake_marks"].get(index):
                    self.recipient.note_key(int(scalar_hex, 16))
        if self.recipient.try_restore(self.config.t):
            self._submit_receipt()

    # -- settlement --------------------------------------------------------------

    def _settlement_phase(self):
        svc = self._service()
        recruited = self._recruited()
        if svc["status"] == STATUS_DELIVERED_LIGHT:
            self._prove_agreements_after_light_delivery()
        for mailman in recruited:
            record = self.agent.state["mailmen"][mailman.address.hex()]
            claim = self.agent.state["claimable"].get(mailman.address.hex(), 0)
            if record["status"] == MAILMAN_ACTIVE or claim > 0 or self._light_share_due(svc, mailman):
                self.ledger.submit_tx(mailman.address, self.agent.address, FN_WITHDRAW)
        if self.agent.state["claimable"].get(self.sender.address.hex(), 0) > 0:
            self.ledger.submit_tx(self.sender.address, self.agent.address, FN_WITHDRAW)

    def _light_share_due(self, svc: dict, mailman: MailmanActor) -> bool:
        return (
            svc["status"] == STATUS_DELIVERED_LIGHT
            and mailman.address.hex() in svc["identities"].values()
            and mailman.address.hex() not in svc["shares_paid"]
        )

    def _prove_agreements_after_light_delivery(self):
        """After a lightweight success, mailmen publish their keys, restore
        the delivery key collectively, and prove their agreements on-chain."""
        cfg = self.config
        for mailman in self._recruited():
            if mailman.policy in (POLICY_ABSENT, POLICY_PREMATURE):
                continue
            self._broadcast_key(mailman)
        self._drain_broadcast_keys()
        sample = self._recruited()[0]
        keys = [s.to_bytes(32, "big") for s in sorted(self.key_pool) if s < 2**256]
        shares = peel_with_keys(sample.onions, keys)
        if len(shares) < cfg.t:
            return
        key = ss_restore(list(shares.values()), cfg.t)
        for mailman in self._recruited():
            record = self.agent.state["mailmen"][mailman.address.hex()]
            if record["status"] != MAILMAN_ACTIVE:
                continue
            agreement = mailman.decrypt_own_agreement(key)
            if agreement is None:
                continue
            index, vrs_s, vrs_m = agreement
            self.ledger.submit_tx(
                mailman.address,
                self.agent.address,
                FN_PROVE_AGREEMENT,
                {
                    "switch_addr": self.sender.switch.address,
                    "index": index,
                    "vrs_m": vrs_m,
                    "vrs_s": vrs_s,
                },
            )

    # -- strawman ------------------------------------------------------------------

    def _run_strawman(self) -> ScenarioTrace:
        cfg = self.config
        sender = self.sender
        sender.key = new_secret_key(self.rng)
        sender.receipt_secret = new_secret_key(self.rng)
        drawn = self.rng.sample(range(cfg.pool_size), cfg.n)
        chosen = list(cfg.selection_override) if cfg.selection_override is not None else drawn
        sender.selected = [self.pool[i] for i in chosen]
        shares = ss_split(sender.key, cfg.t, cfg.n, self.rng)
        sender.shares = shares
        commitments = [
            (sender.selected[i].address, hash256(shares[i].to_bytes())) for i in range(cfg.n)
        ]
        self.ledger.submit_tx(
            sender.address,
            self.strawman.address,
            FN_STRAWMAN_NEW_SERVICE,
            {
                "timeframe_tick": cfg.timeframe_tick,
                "t": cfg.t,
                "n": cfg.n,
                "recipient": self.recipient.address,
                "mailman_commitments": commitments,
                "receipt_commitment": hash256(sender.receipt_secret),
            },
            value=cfg.remuneration_wei,
        )
        sid = next(iter(self.strawman.state["services"]))
        for i, mailman in enumerate(sender.selected):
            self.bus.send_private(sender.address, mailman.address, b"SHR" + shares[i].to_bytes())
        ct = sym_encrypt(sender.key, encode_parts(sender.info, sender.receipt_secret), self.rng)
        self.bus.send_private(sender.address, self.recipient.address, TAG_PACKAGE + encode_parts(ct))
        self.bus.deliver_pending(self.ledger.tick)
        held: dict[bytes, Share] = {}
        for mailman in sender.selected:
            for msg in self.bus.recv(mailman.address):
                if msg.payload[:3] == b"SHR":
                    held[mailman.address] = Share.from_bytes(msg.payload[3:])
        recipient_ct = b""
        for msg in self.bus.recv(self.recipient.address):
            if tag_of(msg.payload) == TAG_PACKAGE:
                recipient_ct = body_of(msg.payload)[0]

        # pending phase: premature shares are broadcast and reported
        self.ledger.advance_time(cfg.timeframe_tick - 2)
        disclosers = [m for m in sender.selected if m.policy == POLICY_PREMATURE]
        if disclosers:
            for mailman in disclosers:
                self.bus.broadcast(mailman.address, TOPIC, b"SHR" + held[mailman.address].to_bytes())
            self.bus.deliver_pending(self.ledger.tick)
            observer = next(
                (m for m in sender.selected if m.policy == POLICY_HONEST), None
            )
            if observer is not None:
                for mailman in disclosers:
                    self.ledger.submit_tx(
                        observer.address,
                        self.strawman.address,
                        FN_STRAWMAN_REPORT_PREMATURE,
                        {"sid": sid, "share": held[mailman.address].to_bytes()},
                    )
        self.ledger.audit()

        # delivery window
        self.ledger.advance_time(cfg.timeframe_tick)
        for mailman in sender.selected:
            if mailman.policy in (POLICY_ABSENT, POLICY_PREMATURE, POLICY_WITHHOLD_LIGHT):
                continue
            if not self._available():
                continue
            share = held[mailman.address]
            if mailman.policy == POLICY_FAKE:
                continue  # a fake share fails the hash check; modeled as absence
            self.ledger.submit_tx(
                mailman.address,
                self.strawman.address,
                FN_STRAWMAN_REVEAL_SHARE,
                {"sid": sid, "share": share.to_bytes()},
            )
        svc = self.strawman.state["services"][sid]
        revealed = [Share.from_bytes(bytes.fromhex(s)) for s in svc["revealed_shares"].values()]
        self.shares_heavy = len(revealed)
        if len(revealed) >= cfg.t:
            key = ss_restore(revealed, cfg.t)
            fields = decode_parts(sym_decrypt(key, recipient_ct))
            self.recipient.info = fields[0]
            self.recipient.receipt_secret = fields[1]
            self.recipient.restored_key = key
            self.ledger.submit_tx(
                self.recipient.address,
                self.strawman.address,
                FN_STRAWMAN_REVEAL_RECEIPT,
                {"sid": sid, "receipt": self.recipient.receipt_secret},
            )
        self.ledger.advance_time(cfg.timeframe_tick + 2 * cfg.epoch_ticks)
        self.ledger.audit()

        pre_state = self.ledger.onchain_state(include_callers=False)
        pre_digest = self.ledger.state_digest(include_callers=False)
        if cfg.withdraw_at_end:
            for mailman in sender.selected:
                record = self.strawman.state["mailmen"][mailman.address.hex()]
                claim = self.strawman.state["claimable"].get(mailman.address.hex(), 0)
                if record["status"] == MAILMAN_ACTIVE or claim > 0:
                    self.ledger.submit_tx(mailman.address, self.strawman.address, FN_WITHDRAW)
            if self.strawman.state["claimable"].get(sender.address.hex(), 0) > 0:
                self.ledger.submit_tx(sender.address, self.strawman.address, FN_WITHDRAW)
        self.ledger.audit()
        return self._build_trace(pre_state, pre_digest, strawman_sid=sid)

    # -- trace --------------------------------------------------------------------

    def _build_trace(self, pre_state, pre_digest, strawman_sid=None) -> ScenarioTrace:
        cfg = self.config
        if cfg.mode == MODE_SILENT:
            svc = self._service()
            status = svc["status"]
            epochs = [e for _, e in svc["epoch_history"]]
            slashes = svc["slashes"]
            service_fns = SERVICE_FUNCTIONS
        else:
            svc = self.strawman.state["services"][strawman_sid]
            status = svc["status"]
            epochs = []
            slashes = svc["slashes"]
            service_fns = STRAWMAN_SERVICE_FUNCTIONS

        selected = [self.pool.index(m) for m in self.sender.selected]
        roles = {"sender": self.sender.address.hex(), "recipient": self.recipient.address.hex()}
        for i, mailman in enumerate(self.pool):
            roles[f"mailman_{i}"] = mailman.address.hex()
        balances = {
            addr.hex(): acc.balance
            for addr, acc in self.ledger.accounts.items()
        }
        service_gas = sum(
            r.gas_used for r in self.ledger.receipts if r.function in service_fns
        )
        delivered = (
            self.recipient.info == self.sender.info
            and self.recipient.info is not None
        )
        return ScenarioTrace(
            config=cfg.to_dict(),
            mode=cfg.mode,
            status=status,
            epoch_sequence=epochs,
            receipts=[r.to_record() for r in self.ledger.receipts],
            messages=self.bus.meta_records(),
            slashes=slashes,
            selected=selected,
            selected_addresses=[m.address.hex() for m in self.sender.selected],
            balances=balances,
            roles=roles,
            total_gas=self.ledger.gas_total(),
            service_gas=service_gas,
            shares_recovered_light=self.shares_light,
            shares_recovered_heavy=self.shares_heavy,
            info_delivered=delivered,
            pre_settlement_state=pre_state,
            pre_settlement_digest=pre_digest.hex(),
            final_digest=self.ledger.state_digest().hex(),
        )


def run_scenario(config: ScenarioConfig, schedule: Optional[GasSchedule] = None) -> ScenarioTrace:
    return ScenarioRunner(config, schedule).run()
