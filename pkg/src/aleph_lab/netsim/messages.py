"""Payloads exchanged between simulated nodes (besides RBC messages)."""

from dataclasses import dataclass

from ..rbc import RbcMessage


@dataclass(frozen=True)
class UnitMsg:
    units: tuple
    reply: bool = False  # answer to a parent request

    @property
    def size(self) -> int:
        return 5 + sum(4 + len(u.encoding) for u in self.units)


@dataclass(frozen=True)
class ParentRequest:
    hashes: tuple

    @property
    def size(self) -> int:
        return 4 + 32 * len(self.hashes)


@dataclass(frozen=True)
class GossipMsg:
    session: tuple  # (initiator, counter)
    leg: int  # 1: info, 2: units + info, 3: units
    info: bytes = b""
    units: tuple = ()

    @property
    def size(self) -> int:
        return 12 + len(self.info) + sum(4 + len(u.encoding) for u in self.units)


@dataclass(frozen=True)
class TossShareMsg:
    nonce: bytes
    share: object
    element_len: int = 32

    @property
    def size(self) -> int:
        return 4 + len(self.nonce) + 2 + 3 * self.element_len


def msg_kind(payload) -> str:
    if isinstance(payload, RbcMessage):
        return f"rbc_{payload.kind}"
    if isinstance(payload, UnitMsg):
        return "unit_reply" if payload.reply else "unit"
    if isinstance(payload, ParentRequest):
        return "request"
    if isinstance(payload, GossipMsg):
        return "gossip"
    if isinstance(payload, TossShareMsg):
        return "toss"
    return type(payload).__name__.lower()
