"""The persistent, non-pausable, one-shard virtual world.

All mutations serialize through a single command path (one lock, one journal);
reads are served from the committed state. Every mutation is journaled, and
replaying snapshot + journal suffix reproduces the live state exactly.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

from pervadia import journal as jrn
from pervadia.errors import (
    InvalidKindPlacementError,
    PermissionDeniedError,
    UnknownEntityError,
    UnknownParentError,
)
from pervadia.geo import GeoPoint
from pervadia.triad import EntityId, TriadEvent

KINDS = ("avatar", "agent", "thing", "place", "item", "group", "role-profile")

ROOT_ID: EntityId = 0

DEFAULT_TICK_PERIOD_MS = 1000  # one-second data updates
DEFAULT_SNAPSHOT_EVERY = 1000  # journal records between snapshots


@dataclass
class Entity:
    id: EntityId
    kind: str
    parent: EntityId
    owner: EntityId
    props: dict = field(default_factory=dict)
    geo_anchor: Optional[GeoPoint] = None
    created_at: int = 0

    def to_state(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "parent": self.parent,
            "owner": self.owner,
            "props": self.props,
            "geo": [self.geo_anchor.lat, self.geo_anchor.lon] if self.geo_anchor else None,
            "created_at": self.created_at,
        }

    @classmethod
    def from_state(cls, d: dict) -> Entity:
        geo = GeoPoint(*d["geo"]) if d["geo"] else None
        return cls(d["id"], d["kind"], d["parent"], d["owner"], dict(d["props"]), geo, d["created_at"])


@dataclass
class Timer:
    id: int
    owner: EntityId
    fire_at: int  # virtual tick
    period: int  # ticks, 0 = one-shot
    action: str  # opaque rule/behavior reference

    def to_state(self) -> dict:
        return {"id": self.id, "owner": self.owner, "fire_at": self.fire_at,
                "period": self.period, "action": self.action}

    @classmethod
    def from_state(cls, d: dict) -> Timer:
        return cls(d["id"], d["owner"], d["fire_at"], d["period"], d["action"])


@dataclass(frozen=True)
class FiredTimer:
    timer_id: int
    owner: EntityId
    action: str


# Returns True if `actor` may write `key` on `entity`; None actor = system.
PermissionCheck = Callable[[Optional[EntityId], EntityId, str], bool]


class World:
    def __init__(self, tick_period: int = DEFAULT_TICK_PERIOD_MS):
        self._lock = threading.RLock()
        self.entities: dict[EntityId, Entity] = {
            ROOT_ID: Entity(ROOT_ID, "place", ROOT_ID, ROOT_ID, {"name": "root"})
        }
        self.timers: dict[int, Timer] = {}
        self.sim_time = 0
        self.virtual_tick = 0
        self.tick_period = tick_period
        self.next_entity_id = 1
        self.next_timer_id = 1
        self.last_seq = -1
        self.records: list[jrn.JournalRecord] = []
        self.permission_check: Optional[PermissionCheck] = None
        self._listeners: list[Callable[[TriadEvent], None]] = []

    # -- wiring ------------------------------------------------------------

    def subscribe(self, listener: Callable[[TriadEvent], None]) -> None:
        self._listeners.append(listener)

    def _emit(self, what: EntityId, where, change: str, payload: dict) -> None:
        event = TriadEvent(what, where, (self.sim_time, self.virtual_tick), change, payload)
        for listener in self._listeners:
            listener(event)

    # -- mutations (the single-writer command path) ------------------------

    def create_entity(
        self,
        kind: str,
        parent: EntityId = ROOT_ID,
        owner: EntityId = ROOT_ID,
        props: Optional[dict] = None,
        geo_anchor: Optional[GeoPoint] = None,
    ) -> EntityId:
        with self._lock:
            if kind not in KINDS:
                raise InvalidKindPlacementError(f"unknown kind: {kind}")
            parent_entity = self.entities.get(parent)
            if parent_entity is None:
                raise UnknownParentError(f"no such parent: {parent}")
            if kind == "place" and parent_entity.kind == "item":
                raise InvalidKindPlacementError("places may not be children of items")
            payload = {
                "kind": kind,
                "parent": parent,
                "owner": owner,
                "props": dict(props or {}),
                "geo": [geo_anchor.lat, geo_anchor.lon] if geo_anchor else None,
            }
            record = self._append(jrn.KIND_CREATE_ENTITY, payload)
            return self._apply(record)

    def set_property(self, entity: EntityId, key: str, value, actor: Optional[EntityId] = None):
        with self._lock:
            ent = self._require(entity)
            self._check_write(actor, entity, key)
            previous = ent.props.get(key)
            record = self._append(jrn.KIND_SET_PROPERTY, {"entity": entity, "key": key, "value": value})
            self._apply(record)
            return previous

    def move_entity(
        self,
        entity: EntityId,
        place: Optional[EntityId] = None,
        geo_anchor: Optional[GeoPoint] = None,
        actor: Optional[EntityId] = None,
        payload: Optional[dict] = None,
    ) -> None:
        with self._lock:
            self._require(entity)
            self._check_write(actor, entity, "@move")
            if place is not None and place not in self.entities:
                raise UnknownEntityError(f"no such place: {place}")
            record = self._append(
                jrn.KIND_MOVE_ENTITY,
                {
                    "entity": entity,
                    "place": place,
                    "geo": [geo_anchor.lat, geo_anchor.lon] if geo_anchor else None,
                    "payload": dict(payload or {}),
                },
            )
            self._apply(record)

    def despawn(self, entity: EntityId, actor: Optional[EntityId] = None) -> None:
        with self._lock:
            if entity == ROOT_ID:
                raise PermissionDeniedError("root entity is indestructible")
            self._require(entity)
            self._check_write(actor, entity, "@despawn")
            record = self._append(jrn.KIND_DESPAWN, {"entity": entity})
            self._apply(record)

    def create_timer(self, owner: EntityId, fire_at: int, period: int, action: str) -> int:
        with self._lock:
            self._require(owner)
            if fire_at < self.virtual_tick:
                raise ValueError(f"fire_at {fire_at} is in the past (tick {self.virtual_tick})")
            record = self._append(
                jrn.KIND_CREATE_TIMER,
                {"owner": owner, "fire_at": fire_at, "period": period, "action": action},
            )
            return self._apply(record)

    def cancel_timer(self, timer_id: int) -> None:
        with self._lock:
            if timer_id not in self.timers:
                raise UnknownEntityError(f"no such timer: {timer_id}")
            record = self._append(jrn.KIND_CANCEL_TIMER, {"timer": timer_id})
            self._apply(record)

    def advance_tick(self) -> list[FiredTimer]:
        """Advance virtual time by one tick; fire due timers in (fire_at, id) order."""
        with self._lock:
            record = self._append(jrn.KIND_TICK, {"dt": self.tick_period})
            return self._apply(record)

    # -- journal application (shared by live path and replay) --------------

    def _append(self, kind: int, payload: dict) -> jrn.JournalRecord:
        record = jrn.JournalRecord(self.last_seq + 1, self.sim_time, self.virtual_tick, kind, payload)
        self.last_seq += 1
        self.records.append(record)
        return record

    def _apply(self, record: jrn.JournalRecord):
        p = record.payload
        if record.kind == jrn.KIND_CREATE_ENTITY:
            eid = self.next_entity_id
            self.next_entity_id += 1
            geo = GeoPoint(*p["geo"]) if p["geo"] else None
            self.entities[eid] = Entity(
                eid, p["kind"], p["parent"], p["owner"], dict(p["props"]), geo, self.sim_time
            )
            self._emit(eid, geo, "appear", {"kind": p["kind"]})
            return eid
        if record.kind == jrn.KIND_SET_PROPERTY:
            ent = self.entities[p["entity"]]
            ent.props[p["key"]] = p["value"]
            self._emit(ent.id, ent.geo_anchor, "property-change", {"key": p["key"], "value": p["value"]})
            return None
        if record.kind == jrn.KIND_MOVE_ENTITY:
            ent = self.entities[p["entity"]]
            if p["geo"] is not None:
                ent.geo_anchor = GeoPoint(*p["geo"])
                where = ent.geo_anchor
            else:
                ent.parent = p["place"]
                where = p["place"]
            self._emit(ent.id, where, "move", dict(p["payload"]))
            return None
        if record.kind == jrn.KIND_DESPAWN:
            ent = self.entities.pop(p["entity"])
            self.timers = {tid: t for tid, t in self.timers.items() if t.owner != ent.id}
            self._emit(ent.id, ent.geo_anchor, "disappear", {})
            return None
        if record.kind == jrn.KIND_CREATE_TIMER:
            tid = self.next_timer_id
            self.next_timer_id += 1
            self.timers[tid] = Timer(tid, p["owner"], p["fire_at"], p["period"], p["action"])
            return tid
        if record.kind == jrn.KIND_CANCEL_TIMER:
            self.timers.pop(p["timer"], None)
            return None
        if record.kind == jrn.KIND_TICK:
            self.virtual_tick += 1
            self.sim_time += p["dt"]
            fired = [
                FiredTimer(t.id, t.owner, t.action)
                for t in sorted(self.timers.values(), key=lambda t: (t.fire_at, t.id))
                if t.fire_at == self.virtual_tick
            ]
            for f in fired:
                timer = self.timers[f.timer_id]
                if timer.period > 0:
                    timer.fire_at += timer.period
                else:
                    del self.timers[timer.id]
            return fired
        raise ValueError(f"unknown record kind: {record.kind}")

    # -- persistence -------------------------------------------------------

    def snapshot(self) -> bytes:
        with self._lock:
            return jrn.encode_snapshot(self.last_seq, self._state())

    def _state(self) -> dict:
        return {
            "next_entity_id": self.next_entity_id,
            "next_timer_id": self.next_timer_id,
            "sim_time": self.sim_time,
            "virtual_tick": self.virtual_tick,
            "tick_period": self.tick_period,
            "entities": [self.entities[k].to_state() for k in sorted(self.entities)],
            "timers": [self.timers[k].to_state() for k in sorted(self.timers)],
        }

    @classmethod
    def restore(cls, snapshot: bytes, journal_suffix: list[jrn.JournalRecord]) -> World:
        """Rebuild a world from a snapshot plus the journal records after it."""
        journal_pos, state = jrn.decode_snapshot(snapshot)
        world = cls(tick_period=state["tick_period"])
        world.entities = {e["id"]: Entity.from_state(e) for e in state["entities"]}
        world.timers = {t["id"]: Timer.from_state(t) for t in state["timers"]}
        world.sim_time = state["sim_time"]
        world.virtual_tick = state["virtual_tick"]
        world.next_entity_id = state["next_entity_id"]
        world.next_timer_id = state["next_timer_id"]
        world.last_seq = journal_pos
        if journal_suffix:
            if journal_suffix[0].seq != journal_pos + 1:
                raise jrn.JournalGapError(
                    f"journal suffix starts at {journal_suffix[0].seq}, snapshot covers {journal_pos}"
                )
        world.apply_records(journal_suffix)
        return world

    def apply_records(self, records: list[jrn.JournalRecord]) -> None:
        """Replay journal records (without re-appending them as new commands)."""
        with self._lock:
            for record in records:
                if record.seq != self.last_seq + 1:
                    raise jrn.JournalGapError(f"seq gap: {self.last_seq} -> {record.seq}")
                self.last_seq = record.seq
                self.records.append(record)
                self._apply(record)

    # -- helpers -----------------------------------------------------------

    def _require(self, entity: EntityId) -> Entity:
        ent = self.entities.get(entity)
        if ent is None:
            raise UnknownEntityError(f"no such entity: {entity}")
        return ent

    def _check_write(self, actor: Optional[EntityId], entity: EntityId, key: str) -> None:
        if actor is None or self.permission_check is None:
            return
        if not self.permission_check(actor, entity, key):
            raise PermissionDeniedError(f"actor {actor} may not write {key} on {entity}")
