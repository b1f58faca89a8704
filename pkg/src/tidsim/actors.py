"""Sender, mailman, and recipient roles.

The sender runs the silent three-way handshake entirely off-chain: it hands
each candidate an index plus the signed supplementary-code authorization,
collects the candidate's acceptance signature, counter-signs it, and only
then splits the delivery key into onion-wrapped shares. Nothing about the
recruited group touches the chain until (and unless) heavyweight mode needs
it.

Wire payloads on the message bus carry a 3-byte tag followed by a canonical
length-prefixed tuple; onion broadcasts never include layer-holder hints, so
unwrapping them is trial decryption against whatever keys a party has
collected.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from random import Random
from typing import Optional

from .channels import MessageBus
from .contracts import (
    AgentContract,
    SwitchContract,
    agreement_digest_mailman,
    agreement_digest_sender,
    sup_auth_digest,
)
from .crypto import (
    AuthenticationError,
    KeyPair,
    Onion,
    Share,
    Signature,
    decode_parts,
    encode_parts,
    hash256,
    keypair_gen,
    new_secret_key,
    onion_peel,
    onion_wrap,
    recover_signer,
    sign,
    ss_restore,
    ss_split,
    sym_decrypt,
    sym_encrypt,
)
from .ledger import (
    FN_NEW_MAILMAN,
    FN_NEW_SERVICE,
    Ledger,
)

TOPIC = b"tids"

TAG_INVITE = b"INV"
TAG_ACCEPT = b"ACC"
TAG_REFUSE = b"REF"
TAG_ONIONS = b"ONS"
TAG_BUNDLE = b"BND"
TAG_PACKAGE = b"PKG"
TAG_RESEND = b"RSD"
TAG_KEY = b"KEY"

POLICY_HONEST = "honest"
POLICY_PREMATURE = "premature"
POLICY_ABSENT = "absent"
POLICY_FAKE = "fake"
POLICY_WITHHOLD_LIGHT = "withhold_light"
POLICY_BRIBERABLE = "briberable"

FAULT_POLICIES = (
    POLICY_HONEST,
    POLICY_PREMATURE,
    POLICY_ABSENT,
    POLICY_FAKE,
    POLICY_WITHHOLD_LIGHT,
    POLICY_BRIBERABLE,
)


class ProtocolError(Exception):
    pass


def tag_of(payload: bytes) -> bytes:
    return payload[:3]


def body_of(payload: bytes) -> list[bytes]:
    return decode_parts(payload[3:])


def peel_with_keys(onions: list[Onion], privkeys: list[bytes]) -> dict[int, Share]:
    """Trial-decrypt onions layer by layer with every key on hand."""
    recovered: dict[int, Share] = {}
    for onion in onions:
        current = onion
        progress = True
        while current.layers_remaining and progress:
            progress = False
            for key in privkeys:
                try:
                    current = onion_peel(current, key)
                    progress = True
                    break
                except AuthenticationError:
                    continue
        if current.layers_remaining == 0:
            share = current.share()
            recovered[share.index] = share
    return recovered


@dataclass
class MailmanActor:
    """A registered courier; honesty is a policy knob consulted per epoch."""

    keypair: KeyPair
    channel_keys: KeyPair
    rng: Random
    ledger: Ledger
    bus: MessageBus
    agent: AgentContract
    deposit: int
    policy: str = POLICY_HONEST
    refuse_service: bool = False
    bribe_threshold: Optional[int] = None
    timeframe_keys: dict[int, KeyPair] = field(default_factory=dict)
    # per-service assignment, filled by the handshake
    index: Optional[int] = None
    switch_addr: Optional[bytes] = None
    sup_code: Optional[bytes] = None
    vrs_sup: Optional[Signature] = None
    vrs_m: Optional[Signature] = None
    bundle: list = field(default_factory=list)
    onions: list = field(default_factory=list)
    sold_key: bool = False

    @property
    def address(self) -> bytes:
        return self.keypair.address

    def ensure_timeframe_key(self, tick: int) -> KeyPair:
        if tick not in self.timeframe_keys:
            self.timeframe_keys[tick] = keypair_gen(self.rng)
        return self.timeframe_keys[tick]

    def register(self, timeframe_ticks: list[int]):
        for tick in timeframe_ticks:
            self.ensure_timeframe_key(tick)
        self.bus.register_channel_key(self.address, self.channel_keys.pubkey)
        self.bus.subscribe(self.address, TOPIC)
        self.ledger.submit_tx(
            self.address,
            self.agent.address,
            FN_NEW_MAILMAN,
            {
                "channel_pub": self.channel_keys.pubkey,
                "timeframe_pubkeys": {t: kp.pubkey for t, kp in self.timeframe_keys.items()},
            },
            value=self.deposit,
        )

    def is_recruited(self) -> bool:
        return self.index is not None

    # -- handshake (mailman side) ---------------------------------------------

    def handle_invite(self, sender_addr: bytes, body: list[bytes]) -> bytes:
        index = int.from_bytes(body[0], "big")
        switch_addr = body[1]
        sup_code = body[2]
        vrs_sup = Signature.from_bytes(body[3])
        if self.refuse_service or not self._invite_checks_out(
            sender_addr, index, switch_addr, sup_code, vrs_sup
        ):
            return TAG_REFUSE + encode_parts(index)
        self.index = index
        self.switch_addr = switch_addr
        self.sup_code = sup_code
        self.vrs_sup = vrs_sup
        self.vrs_m = sign(self.keypair.privkey, agreement_digest_mailman(switch_addr, index))
        return TAG_ACCEPT + encode_parts(index, self.vrs_m)

    def _invite_checks_out(self, sender_addr, index, switch_addr, sup_code, vrs_sup) -> bool:
        switch = self.ledger.contracts.get(switch_addr)
        if not isinstance(switch, SwitchContract):
            return False
        if switch.state["sender"] != sender_addr.hex():
            return False
        if sup_code.hex() != switch.state["sup_code"]:
            return False
        try:
            signer = recover_signer(sup_auth_digest(switch_addr, sup_code), vrs_sup)
        except Exception:
            return False
        if signer != sender_addr:
            return False
        svc = self.agent.state["services"].get(switch_addr.hex())
        if svc is None or not 1 <= index <= svc["n"]:
            return False
        return str(svc["timeframe_tick"]) in self.agent.state["mailmen"][self.address.hex()][
            "timeframe_pubkeys"
        ]

    def accept_bundle(self, sender_addr: bytes, body: list[bytes]) -> bool:
        bundle_blob, onions_blob, vrs_sm_raw = body
        vrs_sm = Signature.from_bytes(vrs_sm_raw)
        digest = hash256(encode_parts(bundle_blob, onions_blob))
        try:
            if recover_signer(digest, vrs_sm) != sender_addr:
                return False
        except Exception:
            return False
        self.bundle = decode_parts(bundle_blob)
        self.onions = [Onion.from_wire(raw) for raw in decode_parts(onions_blob)]
        return True

    # -- reveals ---------------------------------------------------------------

    def reveal_scalar(self, timeframe_tick: int) -> int:
        """The scalar this mailman publishes, honest or faked per policy."""
        true_key = int.from_bytes(self.timeframe_keys[timeframe_tick].privkey, "big")
        if self.policy == POLICY_FAKE:
            return (true_key * 2 + 1) % 2**255 + 1
        return true_key

    def decrypt_own_agreement(self, key: bytes) -> Optional[tuple[int, Signature, Signature]]:
        for blob in self.bundle:
            try:
                fields = decode_parts(sym_decrypt(key, blob))
            except AuthenticationError:
                continue
            index = int.from_bytes(fields[0], "big")
            if index == self.index:
                return index, Signature.from_bytes(fields[1]), Signature.from_bytes(fields[2])
        return None

    def decrypt_all_agreements(self, key: bytes) -> list[dict]:
        out = []
        for blob in self.bundle:
            fields = decode_parts(sym_decrypt(key, blob))
            out.append(
                {
                    "index": int.from_bytes(fields[0], "big"),
                    "vrs_s": Signature.from_bytes(fields[1]),
                    "vrs_m": Signature.from_bytes(fields[2]),
                }
            )
        return sorted(out, key=lambda a: a["index"])


@dataclass
class SenderActor:
    keypair: KeyPair
    rng: Random
    ledger: Ledger
    bus: MessageBus
    agent: AgentContract
    recipient_addr: bytes
    info: bytes
    l: int
    t: int
    n: int
    timeframe_tick: int
    remuneration: int
    sup_code: bytes = b"supplementary-code-v1"
    key: bytes = b""
    receipt_secret: bytes = b""
    switch: Optional[SwitchContract] = None
    service_id: Optional[str] = None
    selected: list[MailmanActor] = field(default_factory=list)
    agreements: dict[int, dict] = field(default_factory=dict)
    shares: list[Share] = field(default_factory=list)
    onions: list[Onion] = field(default_factory=list)
    package_blob: bytes = b""
    tamper_package: bool = False

    @property
    def address(self) -> bytes:
        return self.keypair.address

    # -- on-chain setup -------------------------------------------------------

    def setup(self):
        """Deploy the switch, commit the service; zero recruitment bytes on chain."""
        self.key = new_secret_key(self.rng)
        self.receipt_secret = new_secret_key(self.rng)
        self.switch = self.ledger.deploy_contract(
            self.address,
            SwitchContract,
            agent_addr=self.agent.address,
            sender=self.address,
            sup_code=self.sup_code,
        )
        sup_addr = self.ledger.predict_address(self.switch.address, 0)
        self.ledger.submit_tx(
            self.address,
            self.agent.address,
            FN_NEW_SERVICE,
            {
                "timeframe_tick": self.timeframe_tick,
                "l": self.l,
                "t": self.t,
                "n": self.n,
                "switch_addr": self.switch.address,
                "sup_addr": sup_addr,
                "recipient": self.recipient_addr,
                "receipt_commitment": hash256(self.receipt_secret),
            },
            value=self.remuneration,
        )
        self.service_id = self.switch.address.hex()

    def vrs_sup(self) -> Signature:
        return sign(self.keypair.privkey, sup_auth_digest(self.switch.address, self.sup_code))

    # -- recruitment ------------------------------------------------------------

    def select_mailmen(self, pool: list[MailmanActor], override: Optional[list[int]] = None) -> list[MailmanActor]:
        """Uniform selection without replacement; an override replaces the
        outcome but consumes the same number of random draws."""
        if len(pool) < self.n:
            raise ProtocolError("registered pool smaller than the group size")
        drawn = self.rng.sample(range(len(pool)), self.n)
        chosen = override if override is not None else drawn
        if len(set(chosen)) != self.n:
            raise ProtocolError("selection override must name n distinct mailmen")
        return [pool[i] for i in chosen]

    def recruit(self, pool: list[MailmanActor], override: Optional[list[int]] = None):
        """Three-way handshake with every selected mailman, retrying lost
        messages and re-selecting replacements for refusals until n
        agreements are signed."""
        candidates = self.select_mailmen(pool, override)
        remaining = [m for m in pool if m not in candidates]
        vrs_sup = self.vrs_sup()
        self.selected = []
        for index in range(1, self.n + 1):
            while True:
                if not candidates:
                    raise ProtocolError("pool exhausted during recruitment")
                mailman = candidates.pop(0)
                outcome = None
                for _ in range(4):  # retry on message loss, not on refusal
                    outcome = self._handshake(mailman, index, vrs_sup)
                    if outcome is not None:
                        break
                if outcome:
                    self.selected.append(mailman)
                    break
                if remaining:
                    candidates.append(remaining.pop(self.rng.randrange(len(remaining))))
        self._finish_recruitment()

    def _handshake(self, mailman: MailmanActor, index: int, vrs_sup: Signature) -> Optional[bool]:
        """One handshake round trip: True accept, False refuse, None lost."""
        invite = TAG_INVITE + encode_parts(index, self.switch.address, self.sup_code, vrs_sup)
        self.bus.send_private(self.address, mailman.address, invite)
        self.bus.deliver_pending()
        msgs = self.bus.recv(mailman.address)
        if not msgs:
            return None
        reply = mailman.handle_invite(self.address, body_of(msgs[-1].payload))
        self.bus.send_private(mailman.address, self.address, reply)
        self.bus.deliver_pending()
        answers = self.bus.recv(self.address)
        if not answers:
            return None
        answer = answers[-1].payload
        if tag_of(answer) != TAG_ACCEPT:
            return False
        fields = body_of(answer)
        vrs_m = Signature.from_bytes(fields[1])
        if recover_signer(agreement_digest_mailman(self.switch.address, index), vrs_m) != mailman.address:
            return False
        vrs_s = sign(
            self.keypair.privkey, agreement_digest_sender(self.switch.address, index, vrs_m)
        )
        self.agreements[index] = {"mailman": mailman, "vrs_m": vrs_m, "vrs_s": vrs_s}
        return True

    def layer_holders(self, share_index: int) -> list[MailmanActor]:
        """Share i is wrapped by the l mailmen at positions i-1 .. i+l-2 of the
        selection (cyclic); the last listed key is the outermost layer."""
        return [self.selected[(share_index - 1 + j) % self.n] for j in range(self.l)]

    def _finish_recruitment(self):
        self.shares = ss_split(self.key, self.t, self.n, self.rng)
        self.onions = []
        for share in self.shares:
            holders = self.layer_holders(share.index)
            pubkeys = [m.timeframe_keys[self.timeframe_tick].pubkey for m in holders]
            self.onions.append(onion_wrap(share, pubkeys, self.rng))

        onions_blob = encode_parts(*[o.wire_bytes() for o in self.onions])
        self.bus.broadcast(self.address, TOPIC, TAG_ONIONS + onions_blob)

        tuples = []
        for index in sorted(self.agreements):
            record = self.agreements[index]
            plain = encode_parts(index, record["vrs_s"], record["vrs_m"])
            tuples.append(sym_encrypt(self.key, plain, self.rng))
        bundle_blob = encode_parts(*tuples)
        vrs_sm = sign(self.keypair.privkey, hash256(encode_parts(bundle_blob, onions_blob)))
        for index in sorted(self.agreements):
            mailman = self.agreements[index]["mailman"]
            self.bus.send_private(
                self.address, mailman.address, TAG_BUNDLE + encode_parts(bundle_blob, onions_blob, vrs_sm)
            )

        ct = sym_encrypt(self.key, encode_parts(self.info, self.receipt_secret), self.rng)
        vrs_st = sign(self.keypair.privkey, hash256(encode_parts(ct, onions_blob)))
        self.package_blob = TAG_PACKAGE + encode_parts(ct, onions_blob, vrs_st)
        first = self.package_blob
        if self.tamper_package:
            first = bytearray(self.package_blob)
            first[-1] ^= 0xFF
            first = bytes(first)
        self.bus.send_private(self.address, self.recipient_addr, first)

    def resend_package(self):
        self.bus.send_private(self.address, self.recipient_addr, self.package_blob)


@dataclass
class RecipientActor:
    keypair: KeyPair
    channel_keys: KeyPair
    rng: Random
    ledger: Ledger
    bus: MessageBus
    agent: AgentContract
    sender_addr: Optional[bytes] = None
    ciphertext: bytes = b""
    onions: list[Onion] = field(default_factory=list)
    collected_keys: dict[bytes, int] = field(default_factory=dict)
    restored_key: Optional[bytes] = None
    info: Optional[bytes] = None
    receipt_secret: Optional[bytes] = None
    receipt_submitted: bool = False
    shares_recovered: int = 0

    @property
    def address(self) -> bytes:
        return self.keypair.address

    def join(self):
        self.bus.register_channel_key(self.address, self.channel_keys.pubkey)
        self.bus.subscribe(self.address, TOPIC)

    def accept_package(self, sender_addr: bytes, payload: bytes) -> bool:
        """Verify the sender's signature over the package; ask for a resend
        when it does not check out."""
        ct, onions_blob, vrs_st_raw = body_of(payload)
        try:
            vrs_st = Signature.from_bytes(vrs_st_raw)
            signer = recover_signer(hash256(encode_parts(ct, onions_blob)), vrs_st)
        except Exception:
            signer = None
        if signer != sender_addr:
            self.bus.send_private(self.address, sender_addr, TAG_RESEND + encode_parts(b"bad-signature"))
            return False
        self.sender_addr = sender_addr
        self.ciphertext = ct
        self.onions = [Onion.from_wire(raw) for raw in decode_parts(onions_blob)]
        return True

    def note_key(self, scalar: int):
        try:
            privkey = scalar.to_bytes(32, "big")
        except OverflowError:
            return
        self.collected_keys[privkey] = scalar

    def try_restore(self, t: int) -> bool:
        if self.restored_key is not None:
            return True
        shares = peel_with_keys(self.onions, list(self.collected_keys))
        self.shares_recovered = len(shares)
        if len(shares) < t:
            return False
        key = ss_restore(list(shares.values()), t)
        try:
            fields = decode_parts(sym_decrypt(key, self.ciphertext))
        except AuthenticationError:
            return False
        self.restored_key = key
        self.info, self.receipt_secret = fields[0], fields[1]
        return True
