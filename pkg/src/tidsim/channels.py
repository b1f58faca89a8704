"""In-process model of whisper-style off-chain messaging.

Two primitives: topic broadcast (everyone with a matching filter receives)
and private channels keyed by a registered channel public key. Messages cost
no gas and never touch ledger state. Payload confidentiality is a property
of the observer API, not of wire encryption: the adversary view exposes
broadcast payloads and private-message metadata only.

Delivery is deterministic: messages queue when sent and move to inboxes at
tick boundaries, ordered by (sender address, send sequence).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from random import Random
from typing import Optional

BROADCAST = b"\xff" * 20  # destination marker for topic messages


class ChannelError(Exception):
    pass


@dataclass
class ChannelMsg:
    seq: int
    sent_tick: int
    sender: bytes
    to: bytes  # BROADCAST for topic messages
    topic: Optional[bytes]  # 4-byte tag, broadcasts only
    payload: bytes
    delivered: bool = True  # false when the fault injector dropped it

    def size(self) -> int:
        return len(self.payload)

    def meta_record(self) -> dict:
        rec = {
            "type": "message",
            "seq": self.seq,
            "tick": self.sent_tick,
            "from": self.sender.hex(),
            "to": "broadcast" if self.to == BROADCAST else self.to.hex(),
            "topic": self.topic.hex() if self.topic else None,
            "size": self.size(),
            "delivered": self.delivered,
        }
        if self.to == BROADCAST:
            # broadcast payloads are public; private payloads never leave the bus
            rec["payload"] = self.payload.hex()
        return rec


@dataclass
class MessageBus:
    drop_prob: float = 0.0
    rng: Optional[Random] = None
    log: list[ChannelMsg] = field(default_factory=list)
    _channel_keys: dict[bytes, bytes] = field(default_factory=dict)
    _subscriptions: dict[bytes, set[bytes]] = field(default_factory=dict)
    _pending: list[ChannelMsg] = field(default_factory=list)
    _inboxes: dict[bytes, list[ChannelMsg]] = field(default_factory=dict)
    _tick: int = 0

    def register_channel_key(self, owner: bytes, channel_pub: bytes):
        self._channel_keys[owner] = channel_pub
        self._inboxes.setdefault(owner, [])

    def subscribe(self, owner: bytes, topic: bytes):
        if len(topic) != 4:
            raise ChannelError("topic tags are 4 bytes")
        self._subscriptions.setdefault(owner, set()).add(topic)
        self._inboxes.setdefault(owner, [])

    def _dropped(self) -> bool:
        return self.drop_prob > 0 and self.rng is not None and self.rng.random() < self.drop_prob

    def send_private(self, sender: bytes, to: bytes, payload: bytes):
        if to not in self._channel_keys:
            raise ChannelError("recipient has no registered channel key")
        msg = ChannelMsg(
            seq=len(self.log),
            sent_tick=self._tick,
            sender=sender,
            to=to,
            topic=None,
            payload=payload,
            delivered=not self._dropped(),
        )
        self.log.append(msg)
        if msg.delivered:
            self._pending.append(msg)

    def broadcast(self, sender: bytes, topic: bytes, payload: bytes):
        if len(topic) != 4:
            raise ChannelError("topic tags are 4 bytes")
        msg = ChannelMsg(
            seq=len(self.log),
            sent_tick=self._tick,
            sender=sender,
            to=BROADCAST,
            topic=topic,
            payload=payload,
            delivered=not self._dropped(),
        )
        self.log.append(msg)
        if msg.delivered:
            self._pending.append(msg)

    def deliver_pending(self, tick: Optional[int] = None):
        """Move queued messages into inboxes in deterministic order."""
        if tick is not None:
            self._tick = tick
        for msg in sorted(self._pending, key=lambda m: (m.sender, m.seq)):
            if msg.to == BROADCAST:
                for owner, topics in self._subscriptions.items():
                    if msg.topic in topics:
                        self._inboxes.setdefault(owner, []).append(msg)
            else:
                self._inboxes.setdefault(msg.to, []).append(msg)
        self._pending.clear()

    def recv(self, owner: bytes) -> list[ChannelMsg]:
        """Drain the owner's inbox (delivery order preserved)."""
        inbox = self._inboxes.get(owner, [])
        self._inboxes[owner] = []
        return inbox

    def broadcast_log(self) -> list[ChannelMsg]:
        return [m for m in self.log if m.to == BROADCAST and m.delivered]

    def meta_records(self) -> list[dict]:
        return [m.meta_record() for m in self.log]
