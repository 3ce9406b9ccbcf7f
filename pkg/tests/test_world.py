from random import Random

import pytest

from oracles import enumerate_firings, tree_is_valid
from pervadia import journal as jrn
from pervadia.errors import (
    CorruptSnapshotError,
    InvalidKindPlacementError,
    PermissionDeniedError,
    UnknownEntityError,
    UnknownParentError,
)
from pervadia.geo import GeoPoint
from pervadia.world import ROOT_ID, World


def test_first_entity_in_fresh_world():
    w = World()
    eid = w.create_entity(kind="place", parent=ROOT_ID)
    assert eid == 1
    assert w.entities[eid].parent == ROOT_ID


def test_role_profile_under_roles_group():
    w = World()
    roles_group = w.create_entity(kind="group", props={"name": "roles"})
    gm = w.create_entity(kind="role-profile", parent=roles_group, props={"name": "game_master"})
    assert w.entities[gm].kind == "role-profile"
    assert w.entities[gm].props["name"] == "game_master"


def test_unknown_parent_rejected():
    w = World()
    with pytest.raises(UnknownParentError):
        w.create_entity(kind="thing", parent=999)


def test_place_under_item_rejected():
    w = World()
    item = w.create_entity(kind="item")
    with pytest.raises(InvalidKindPlacementError):
        w.create_entity(kind="place", parent=item)


def test_thousand_random_creations_keep_tree_valid():
    rng = Random(42)
    w = World()
    ids = [ROOT_ID]
    for _ in range(1000):
        parent = rng.choice(ids)
        kind = rng.choice(["thing", "item", "group", "agent"])
        ids.append(w.create_entity(kind=kind, parent=parent))
    assert ids[1:] == list(range(1, 1001))
    assert tree_is_valid(w.entities)


def test_entity_ids_not_reused_across_restore():
    w = World()
    w.create_entity(kind="thing")
    snap = w.snapshot()
    w2 = World.restore(snap, [])
    assert w2.create_entity(kind="thing") == 2


# -- ticks and timers ------------------------------------------------------


def test_tick_with_no_timers():
    w = World()
    assert w.advance_tick() == []
    assert w.virtual_tick == 1
    assert w.sim_time == w.tick_period


def test_periodic_timer_schedule_matches_enumeration():
    w = World()
    agent = w.create_entity(kind="agent")
    tid = w.create_timer(agent, fire_at=3, period=3, action="x")
    fired_at = []
    for _ in range(10):
        for f in w.advance_tick():
            fired_at.append((w.virtual_tick, f.timer_id))
    expected = enumerate_firings([(tid, 3, 3)], 10)
    assert fired_at == [(t + 1, tid) for t, due in enumerate(expected) for tid in due]
    assert [t for t, _ in fired_at] == [3, 6, 9]


def test_equal_fire_at_breaks_ties_by_timer_id():
    w = World()
    agent = w.create_entity(kind="agent")
    t2 = w.create_timer(agent, fire_at=2, period=0, action="b")
    t1 = w.create_timer(agent, fire_at=2, period=0, action="a")
    w.advance_tick()
    fired = w.advance_tick()
    assert [f.timer_id for f in fired] == sorted([t1, t2])


def test_timer_in_past_rejected():
    w = World()
    agent = w.create_entity(kind="agent")
    w.advance_tick()
    w.advance_tick()
    with pytest.raises(ValueError):
        w.create_timer(agent, fire_at=1, period=0, action="x")


def test_agents_fire_with_zero_connected_sessions():
    # Non-pausable world: the schedule runs regardless of sessions.
    w = World()
    agent = w.create_entity(kind="agent")
    w.create_timer(agent, fire_at=1, period=1, action="act")
    count = sum(len(w.advance_tick()) for _ in range(50))
    expected = enumerate_firings([(1, 1, 1)], 50)
    assert count == sum(len(due) for due in expected) == 50


# -- properties and moves --------------------------------------------------


def test_set_then_get():
    w = World()
    e = w.create_entity(kind="thing")
    assert w.set_property(e, "color", "red") is None
    assert w.entities[e].props["color"] == "red"
    assert w.set_property(e, "color", "blue") == "red"


def test_move_records_event():
    seen = []
    w = World()
    w.subscribe(seen.append)
    e = w.create_entity(kind="avatar")
    w.move_entity(e, geo_anchor=GeoPoint(59.0, 18.0))
    moves = [ev for ev in seen if ev.change == "move"]
    assert len(moves) == 1
    assert moves[0].fix == GeoPoint(59.0, 18.0)


def test_permission_hook_enforced():
    w = World()
    w.permission_check = lambda actor, entity, key: False
    e = w.create_entity(kind="thing")
    with pytest.raises(PermissionDeniedError):
        w.set_property(e, "x", 1, actor=e)
    # System calls (no actor) bypass the hook.
    w.set_property(e, "x", 1)


def test_unknown_entity_errors():
    w = World()
    with pytest.raises(UnknownEntityError):
        w.set_property(404, "x", 1)
    with pytest.raises(UnknownEntityError):
        w.move_entity(404)


def test_root_is_indestructible():
    w = World()
    with pytest.raises(PermissionDeniedError):
        w.despawn(ROOT_ID)


# -- persistence -----------------------------------------------------------


def test_snapshot_restore_empty_world():
    w = World()
    w.advance_tick()
    restored = World.restore(w.snapshot(), [])
    assert restored.snapshot() == w.snapshot()
    assert restored.virtual_tick == 1


def test_corrupt_snapshot_detected():
    w = World()
    blob = bytearray(w.snapshot())
    blob[-1] ^= 0xFF
    with pytest.raises(CorruptSnapshotError):
        World.restore(bytes(blob), [])
    with pytest.raises(CorruptSnapshotError):
        World.restore(b"XXXX" + bytes(blob[4:]), [])


def test_journal_gap_detected():
    w = World()
    w.create_entity(kind="thing")
    snap = w.snapshot()
    w.create_entity(kind="thing")
    w.create_entity(kind="thing")
    suffix = w.records[-1:]  # skips one record
    with pytest.raises(jrn.JournalGapError):
        World.restore(snap, suffix)


def _random_mutation(rng, w, ids):
    op = rng.randrange(5)
    if op == 0 or len(ids) < 2:
        ids.append(w.create_entity(kind=rng.choice(["thing", "agent", "item"]),
                                   parent=rng.choice(ids)))
    elif op == 1:
        w.set_property(rng.choice(ids[1:]), f"k{rng.randrange(5)}", rng.randrange(100))
    elif op == 2:
        w.move_entity(rng.choice(ids[1:]),
                      geo_anchor=GeoPoint(rng.uniform(-80, 80), rng.uniform(-170, 170)))
    elif op == 3:
        w.advance_tick()
    else:
        owner = rng.choice(ids[1:])
        w.create_timer(owner, w.virtual_tick + rng.randrange(1, 5), rng.randrange(3), "t")


def test_crash_restore_equals_shadow_world():
    """500 random mutations, snapshot at a random point, crash at the end:
    restore(snapshot, suffix) equals a shadow copy maintained alongside."""
    rng = Random(99)
    w = World()
    ids = [ROOT_ID]
    snap_point = rng.randrange(100, 400)
    snap = None
    for i in range(500):
        _random_mutation(rng, w, ids)
        if i == snap_point:
            snap = w.snapshot()
            snap_seq = w.last_seq
    shadow_state = w.snapshot()
    suffix = [r for r in w.records if r.seq > snap_seq]
    restored = World.restore(snap, suffix)
    assert restored.snapshot() == shadow_state


def test_restore_from_every_journal_prefix():
    """For every prefix of the journal, replay equals the shadow at that point."""
    rng = Random(7)
    w = World()
    ids = [ROOT_ID]
    shadows = []
    for _ in range(60):
        _random_mutation(rng, w, ids)
        shadows.append((w.last_seq, w.snapshot()))
    empty_snap = World().snapshot()
    for last_seq, shadow in shadows[::7]:
        prefix = [r for r in w.records if r.seq <= last_seq]
        replayed = World.restore(empty_snap, prefix)
        assert replayed.snapshot() == shadow


def test_tick_monotone_across_restore_and_timer_straddles_crash():
    w = World()
    agent = w.create_entity(kind="agent")
    w.create_timer(agent, fire_at=3, period=3, action="x")
    for _ in range(4):  # fires once at tick 3
        w.advance_tick()
    snap = w.snapshot()
    pre_crash_tick = w.virtual_tick
    restored = World.restore(snap, [])
    assert restored.virtual_tick >= pre_crash_tick
    fired_at = []
    for _ in range(6):  # ticks 5..10
        for f in restored.advance_tick():
            fired_at.append(restored.virtual_tick)
    expected = enumerate_firings([(1, 3, 3)], 10)
    expected_ticks = [t + 1 for t, due in enumerate(expected) if due and t + 1 > 4]
    assert fired_at == expected_ticks == [6, 9]


def test_journal_binary_roundtrip():
    w = World()
    w.create_entity(kind="thing", props={"name": "x"})
    w.advance_tick()
    blob = jrn.encode_records(w.records)
    assert jrn.decode_records(blob) == w.records


def test_journal_crc_detected():
    w = World()
    w.create_entity(kind="thing")
    blob = bytearray(jrn.encode_records(w.records))
    blob[10] ^= 0x01
    with pytest.raises(jrn.JournalGapError):
        jrn.decode_records(bytes(blob))
