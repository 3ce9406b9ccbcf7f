"""The spatiotemporal event store: one append-only log of (what, where, when)
records with object-based, location-based and time-based views over it.

Each fact is stored once in the log; the per-entity and grid indexes are
rebuildable views, so rebuilding them from the log yields identical answers.
"""

from __future__ import annotations

import json
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from pervadia.errors import NoFixYetError, TimeRegressionError, UnknownEntityError
from pervadia.geo import DEFAULT_CELL_SIZE_DEG, GeoPoint, Region, cell_of

EntityId = int

CHANGES = ("appear", "move", "property-change", "disappear")

Where = Union[GeoPoint, EntityId, None]


@dataclass(frozen=True)
class TriadEvent:
    what: EntityId
    where: Where
    when: tuple[int, int]  # (sim_time ms, virtual_tick)
    change: str
    payload: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.change not in CHANGES:
            raise ValueError(f"unknown change kind: {self.change}")

    @property
    def fix(self) -> Optional[GeoPoint]:
        return self.where if isinstance(self.where, GeoPoint) else None

    def to_json(self, seq: int) -> str:
        fix = self.fix
        return json.dumps(
            {
                "seq": seq,
                "what": self.what,
                "lat": fix.lat if fix else None,
                "lon": fix.lon if fix else None,
                "place": self.where if isinstance(self.where, int) else None,
                "t": self.when[0],
                "tick": self.when[1],
                "change": self.change,
                "payload": self.payload,
            },
            sort_keys=True,
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, line: str) -> TriadEvent:
        d = json.loads(line)
        where: Where = None
        if d.get("lat") is not None:
            where = GeoPoint(d["lat"], d["lon"])
        elif d.get("place") is not None:
            where = d["place"]
        return cls(d["what"], where, (d["t"], d["tick"]), d["change"], d.get("payload", {}))


class TriadStore:
    """Event log plus the three views; writes are serialized by the caller."""

    def __init__(self, cell_size_deg: float = DEFAULT_CELL_SIZE_DEG):
        self.cell_size_deg = cell_size_deg
        self.events: list[TriadEvent] = []
        # Object-based view: entity -> indices of its events, in log order.
        self._by_entity: dict[EntityId, list[int]] = {}
        # Location-based view: grid cell -> indices of fix events in it.
        self._by_cell: dict[tuple[int, int], list[int]] = {}
        self._appeared: set[EntityId] = set()

    # -- recording ---------------------------------------------------------

    def record(self, event: TriadEvent) -> int:
        if self.events and event.when < self.events[-1].when:
            raise TimeRegressionError(
                f"event at {event.when} before log head {self.events[-1].when}"
            )
        if event.change != "appear" and event.what not in self._appeared:
            raise UnknownEntityError(f"entity {event.what} has not appeared")
        seq = len(self.events)
        self.events.append(event)
        self._index(seq, event)
        return seq

    def _index(self, seq: int, event: TriadEvent) -> None:
        self._by_entity.setdefault(event.what, []).append(seq)
        if event.change == "appear":
            self._appeared.add(event.what)
        fix = event.fix
        if fix is not None:
            self._by_cell.setdefault(cell_of(fix, self.cell_size_deg), []).append(seq)

    def rebuild_views(self) -> None:
        """Drop and rebuild all indexes from the log alone."""
        log = self.events
        self.events = []
        self._by_entity = {}
        self._by_cell = {}
        self._appeared = set()
        for event in log:
            self.record(event)

    # -- the dual-model and triad query forms ------------------------------

    def what_to_where(self, entity: EntityId, at: Optional[int] = None) -> Where:
        """Latest fix (or place) for an entity at-or-before `at`."""
        idxs = self._entity_events(entity)
        at = self._now() if at is None else at
        for i in reversed(idxs):
            event = self.events[i]
            if event.when[0] <= at and event.where is not None:
                return event.where
        raise NoFixYetError(f"entity {entity} has no fix at or before t={at}")

    def where_to_what(self, region: Region, at: Optional[int] = None) -> set[EntityId]:
        """Entities whose latest fix at-or-before `at` lies inside the region."""
        at = self._now() if at is None else at
        result: set[EntityId] = set()
        for entity in self._appeared:
            fix = self._latest_fix(entity, at)
            if fix is not None and region.contains(fix):
                result.add(entity)
        return result

    def when_of(self, entity: EntityId, region: Region) -> list[int]:
        """Times the entity changed or appeared inside the region, descending."""
        idxs = self._entity_events(entity)
        times = [
            self.events[i].when[0]
            for i in idxs
            if self.events[i].fix is not None and region.contains(self.events[i].fix)
        ]
        return sorted(times, reverse=True)

    def trajectory(self, entity: EntityId, t0: int, t1: int) -> list[tuple[int, GeoPoint]]:
        """Ordered (time, fix) pairs for the entity within [t0, t1]."""
        idxs = self._entity_events(entity)
        out = []
        for i in idxs:
            event = self.events[i]
            fix = event.fix
            if fix is not None and t0 <= event.when[0] <= t1:
                out.append((event.when[0], fix))
        return out

    def passed_by(self, region: Region, after: int) -> set[EntityId]:
        """Entities with any fix inside the region strictly after `after`."""
        result: set[EntityId] = set()
        for cell, idxs in self._by_cell.items():
            for i in idxs:
                event = self.events[i]
                if event.when[0] > after and region.contains(event.fix):
                    result.add(event.what)
        return result

    # -- export / import ---------------------------------------------------

    def export_jsonl(self) -> str:
        return "".join(e.to_json(i) + "\n" for i, e in enumerate(self.events))

    @classmethod
    def import_jsonl(cls, lines: Iterable[str], cell_size_deg: float = DEFAULT_CELL_SIZE_DEG) -> TriadStore:
        store = cls(cell_size_deg)
        for line in lines:
            line = line.strip()
            if line:
                store.record(TriadEvent.from_json(line))
        return store

    # -- helpers -----------------------------------------------------------

    def _entity_events(self, entity: EntityId) -> list[int]:
        if entity not in self._appeared:
            raise UnknownEntityError(f"entity {entity} has not appeared")
        return self._by_entity[entity]

    def _latest_fix(self, entity: EntityId, at: int) -> Optional[GeoPoint]:
        for i in reversed(self._by_entity.get(entity, [])):
            event = self.events[i]
            if event.when[0] <= at and event.fix is not None:
                return event.fix
        return None

    def _now(self) -> int:
        return self.events[-1].when[0] if self.events else 0
