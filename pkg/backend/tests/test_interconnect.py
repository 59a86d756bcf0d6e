import numpy as np
import pytest

from app.services.interconnect import (
    CORE_COUNT,
    HubState,
    NIMessage,
    exchange,
    hub_tick,
    ni_collect,
    ni_post,
)


def test_message_validation():
    with pytest.raises(ValueError):
        NIMessage(4, 10, 0)
    with pytest.raises(ValueError):
        NIMessage(0, 2048, 0)
    with pytest.raises(ValueError):
        NIMessage(0, 10, -1)


def test_round_robin_slots_and_idle_ticks():
    hub = ni_post(HubState(), NIMessage(2, 500, 0))
    hub, b0 = hub_tick(hub)
    hub, b1 = hub_tick(hub)
    hub, b2 = hub_tick(hub)
    assert b0 is None and b1 is None
    assert b2.slot == 2 and b2.tick == 2
    assert b2.delivered_mask == 0b1011
    assert hub.slot_counter == 3


def test_broadcast_reaches_every_other_mailbox():
    hub = ni_post(HubState(), NIMessage(0, 321, 5))
    hub, broadcast = hub_tick(hub)
    assert broadcast.message.fused_distance_raw == 321
    for dst in range(1, CORE_COUNT):
        assert ni_collect(hub, dst, 6) == [(broadcast.message, 1)]
    assert ni_collect(hub, 0, 6) == []


def test_newer_post_replaces_unsent_message():
    hub = ni_post(HubState(), NIMessage(1, 100, 0))
    hub = ni_post(hub, NIMessage(1, 90, 1))
    hub, log = exchange(hub, [], 4)
    sent = [b for _, b in log if b is not None]
    assert len(sent) == 1 and sent[0].message.seq == 1


def test_mailbox_never_goes_back_in_sequence():
    hub = ni_post(HubState(), NIMessage(0, 100, 7))
    hub, _ = exchange(hub, [], 4)
    hub, log = exchange(hub, [NIMessage(0, 50, 3)], 4)
    delivered = [b for _, b in log if b is not None]
    assert delivered[0].delivered_mask == 0
    assert ni_collect(hub, 1, 8)[0][0].seq == 7


def test_collect_returns_staleness_in_steps():
    hub, _ = exchange(HubState(), [NIMessage(i, 100 + i, 10) for i in range(CORE_COUNT)], 4)
    inbox = ni_collect(hub, 3, 11)
    assert [(m.src_core, s) for m, s in inbox] == [(0, 1), (1, 1), (2, 1)]


def test_random_schedules_keep_hub_properties():
    rng = np.random.default_rng(11)
    hub = HubState()
    last_seq = [[-1] * CORE_COUNT for _ in range(CORE_COUNT)]
    seq = [0] * CORE_COUNT
    for _ in range(10000):
        for src in range(CORE_COUNT):
            if rng.random() < 0.3:
                hub = ni_post(hub, NIMessage(src, int(rng.integers(0, 2048)), seq[src]))
                seq[src] += int(rng.integers(0, 3))
        tick = hub.slot_counter
        hub, broadcast = hub_tick(hub)
        # one slot per tick, at most one broadcast
        assert hub.slot_counter == tick + 1
        if broadcast is not None:
            assert broadcast.slot == tick % CORE_COUNT
            assert broadcast.message.src_core == broadcast.slot
        for dst in range(CORE_COUNT):
            for src, msg in enumerate(hub.mailboxes[dst]):
                if msg is not None:
                    assert msg.seq >= last_seq[dst][src]
                    last_seq[dst][src] = msg.seq


def test_full_posting_keeps_staleness_within_one_step():
    hub = HubState()
    for step in range(200):
        posts = [NIMessage(i, (step * 7 + i) % 2048, step) for i in range(CORE_COUNT)]
        hub, log = exchange(hub, posts, 4)
        assert sum(b is not None for _, b in log) == CORE_COUNT
        for dst in range(CORE_COUNT):
            inbox = ni_collect(hub, dst, step + 1)
            assert len(inbox) == CORE_COUNT - 1
            assert all(staleness <= 1 for _, staleness in inbox)


def test_zero_ticks_delivers_nothing():
    hub, log = exchange(HubState(), [NIMessage(0, 1, 0)], 0)
    assert log == []
    assert ni_collect(hub, 1, 0) == []
