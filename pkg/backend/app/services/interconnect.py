"""
Active Hub and Network Interface units.

The hub is a four-slot TDM round robin: slot ``s`` belongs to NI ``s mod 4``
and at most one message crosses the hub per tick. Outbound queues hold one
message (freshest wins); each mailbox keeps the latest message per source.
"""

import logging
from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

from pydantic import BaseModel, Field

logger = logging.getLogger(__name__)

CORE_COUNT = 4
DISTANCE_MAX_RAW = (1 << 11) - 1


class HubParams(BaseModel):
    ticks_per_step: int = Field(default=4, ge=0)


@dataclass(frozen=True, slots=True)
class NIMessage:
    """Sensor-derived distance only; cores never exchange commands."""

    src_core: int
    fused_distance_raw: int
    seq: int

    def __post_init__(self):
        if not 0 <= self.src_core < CORE_COUNT:
            raise ValueError(f"src_core {self.src_core} outside 0..{CORE_COUNT - 1}")
        if not 0 <= self.fused_distance_raw <= DISTANCE_MAX_RAW:
            raise ValueError(f"fused distance {self.fused_distance_raw} does not fit 11 bits")
        if self.seq < 0:
            raise ValueError("seq must be non-negative")


Mailbox = Tuple[Optional[NIMessage], ...]


def _empty_mailboxes() -> Tuple[Mailbox, ...]:
    return tuple((None,) * CORE_COUNT for _ in range(CORE_COUNT))


@dataclass(frozen=True, slots=True)
class HubState:
    slot_counter: int = 0
    outbound: Tuple[Optional[NIMessage], ...] = (None,) * CORE_COUNT
    mailboxes: Tuple[Mailbox, ...] = _empty_mailboxes()


@dataclass(frozen=True, slots=True)
class Broadcast:
    tick: int
    slot: int
    message: NIMessage
    delivered_mask: int


def ni_post(hub: HubState, msg: NIMessage) -> HubState:
    """Queue ``msg`` at its source NI, replacing any unsent older message."""
    outbound = list(hub.outbound)
    outbound[msg.src_core] = msg
    return replace(hub, outbound=tuple(outbound))


def hub_tick(hub: HubState) -> Tuple[HubState, Optional[Broadcast]]:
    """Serve the slot owner; returns the new state and the broadcast, if any."""
    slot = hub.slot_counter % CORE_COUNT
    msg = hub.outbound[slot]
    if msg is None:
        return replace(hub, slot_counter=hub.slot_counter + 1), None

    mailboxes = list(hub.mailboxes)
    mask = 0
    for dst in range(CORE_COUNT):
        if dst == slot:
            continue
        held = mailboxes[dst][slot]
        # per-source order: a mailbox never goes back in seq
        if held is not None and held.seq > msg.seq:
            continue
        box = list(mailboxes[dst])
        box[slot] = msg
        mailboxes[dst] = tuple(box)
        mask |= 1 << dst

    outbound = list(hub.outbound)
    outbound[slot] = None
    new_hub = HubState(hub.slot_counter + 1, tuple(outbound), tuple(mailboxes))
    return new_hub, Broadcast(hub.slot_counter, slot, msg, mask)


def ni_collect(hub: HubState, dst_core: int, current_step: int) -> List[Tuple[NIMessage, int]]:
    """Up to three neighbour messages for ``dst_core`` with their staleness in steps."""
    return [
        (msg, current_step - msg.seq)
        for src, msg in enumerate(hub.mailboxes[dst_core])
        if msg is not None and src != dst_core
    ]


def exchange(hub: HubState, posts: List[NIMessage], ticks: int) -> Tuple[HubState, List[Tuple[int, Optional[Broadcast]]]]:
    """Post a batch of messages then run ``ticks`` hub slots.

    Returns the new state and (tick index, broadcast or None) per slot.
    """
    for msg in posts:
        hub = ni_post(hub, msg)
    log: List[Tuple[int, Optional[Broadcast]]] = []
    for _ in range(ticks):
        tick = hub.slot_counter
        hub, broadcast = hub_tick(hub)
        if broadcast is None:
            logger.debug(f"Hub tick {tick} idle")
        log.append((tick, broadcast))
    return hub, log
