"""Consent bookkeeping and the symmetric delivery rule for signal frames.

A participant's vital-sign frames reach a peer only while BOTH sides share
that channel; one's own frames always flow back to oneself. Consent
defaults to off: sharing bodily data takes an affirmative act. Every
mutation bumps a version counter so each delivery decision can be audited
against the exact consent snapshot it used.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from .errors import UnknownParticipantError
from .signals import SignalChannel, SignalFrame


class DeliveryReason(str, Enum):
    SELF = "SELF"
    MUTUAL = "MUTUAL"
    SENDER_NOT_SHARING = "SENDER_NOT_SHARING"
    RECEIVER_NOT_SHARING = "RECEIVER_NOT_SHARING"


@dataclass(frozen=True)
class DeliveryDecision:
    allowed: bool
    reason: DeliveryReason


class ConsentState:
    """Per-participant, per-channel sharing flags with a version counter.

    Unknown (participant, channel) pairs read as not sharing. The version
    strictly increases on every mutation, including writes that repeat the
    current value.
    """

    def __init__(self, members: Iterable[str] = ()) -> None:
        self._members: set[str] = set(members)
        self._flags: dict[tuple[str, SignalChannel], bool] = {}
        self.version = 0

    @property
    def members(self) -> frozenset[str]:
        return frozenset(self._members)

    def add_member(self, participant: str) -> None:
        self._members.add(participant)

    def remove_member(self, participant: str) -> None:
        """Drop a participant from the roster; their flags stay until revoked."""
        self._members.discard(participant)

    def is_member(self, participant: str) -> bool:
        return participant in self._members

    def get(self, participant: str, channel: SignalChannel) -> bool:
        return self._flags.get((participant, channel), False)

    def set(self, participant: str, channel: SignalChannel, share: bool) -> "ConsentState":
        if participant not in self._members:
            raise UnknownParticipantError(f"{participant!r} is not a session member")
        self._flags[(participant, channel)] = bool(share)
        self.version += 1
        return self

    def shared_channels(self, participant: str) -> list[SignalChannel]:
        return [ch for ch in SignalChannel if self.get(participant, ch)]

    def flags_snapshot(self) -> dict[str, dict[str, bool]]:
        """Wire-shaped flags: {participant: {channel: bool}} for all members."""
        return {
            pid: {ch.value: self.get(pid, ch) for ch in SignalChannel}
            for pid in sorted(self._members)
        }

    def copy(self) -> "ConsentState":
        dup = ConsentState(self._members)
        dup._flags = dict(self._flags)
        dup.version = self.version
        return dup


def set_consent(state: ConsentState, participant: str, channel: SignalChannel, share: bool) -> ConsentState:
    """Update one sharing flag; the version increments on every call."""
    return state.set(participant, channel, share)


def may_deliver(state: ConsentState, sender: str, receiver: str, channel: SignalChannel) -> DeliveryDecision:
    """Decide whether sender's frames on a channel may reach receiver.

    Self-delivery is always allowed; otherwise both sides must share the
    channel. The sender's flag is checked first when naming the blocker.
    """
    if sender == receiver:
        return DeliveryDecision(True, DeliveryReason.SELF)
    if not state.get(sender, channel):
        return DeliveryDecision(False, DeliveryReason.SENDER_NOT_SHARING)
    if not state.get(receiver, channel):
        return DeliveryDecision(False, DeliveryReason.RECEIVER_NOT_SHARING)
    return DeliveryDecision(True, DeliveryReason.MUTUAL)


def filter_frame(state: ConsentState, frame: SignalFrame, recipients: Iterable[str]) -> list[str]:
    """Keep exactly the recipients the delivery rule permits for this frame."""
    return [
        r for r in recipients
        if may_deliver(state, frame.participant_id, r, frame.channel).allowed
    ]
