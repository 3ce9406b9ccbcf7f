"""Roles, permissions, per-role views, game-master intervention and channels.

The four roles form a monotone lattice: anything a player may do, a trainer
may do, and so on up to admin. Game-master actions go through the normal
world command path, so they are journaled like any player action.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from pervadia.errors import PermissionDeniedError, UnknownEntityError, UnknownViewError
from pervadia.geo import GeoPoint, Region, cell_of, haversine_m
from pervadia.triad import EntityId, TriadStore
from pervadia.world import World

ROLES = ("player", "trainer", "game-master", "admin")

_BASE_PERMS: dict[str, set[str]] = {
    "player": {"read-world", "write-own"},
    "trainer": {"read-world", "write-own", "trainer-view"},
    "game-master": {"read-world", "write-own", "trainer-view", "write-any", "reconfigure", "woz"},
    "admin": {"read-world", "write-own", "trainer-view", "write-any", "reconfigure", "woz", "view-admin"},
}

# Property keys in this namespace may only be written with write-any.
GM_PROP_PREFIX = "gm."

DEFAULT_PROXIMITY_RADIUS_M = 50.0


def role_rank(role: str) -> int:
    return ROLES.index(role)


def permissions(role: str) -> set[str]:
    return set(_BASE_PERMS[role])


def allows(role: str, perm: str) -> bool:
    return perm in _BASE_PERMS[role]


@dataclass
class User:
    name: str
    password: str
    role: str = "player"
    avatar: Optional[EntityId] = None


class UserRegistry:
    def __init__(self) -> None:
        self._users: dict[str, User] = {}

    def add(self, name: str, password: str, role: str = "player") -> User:
        if role not in ROLES:
            raise ValueError(f"unknown role: {role}")
        user = User(name, password, role)
        self._users[name] = user
        return user

    def authenticate(self, name: str, password: str) -> Optional[User]:
        user = self._users.get(name)
        if user is None or user.password != password:
            return None
        return user

    def role_of_avatar(self, avatar: EntityId) -> str:
        for user in self._users.values():
            if user.avatar == avatar:
                return user.role
        return "player"

    def make_permission_check(self, world: World) -> Callable:
        """World write hook: write-own for owned entities, write-any otherwise,
        and gm.* props always need write-any."""

        def can_write(actor: Optional[EntityId], entity: EntityId, key: str) -> bool:
            role = self.role_of_avatar(actor)
            if key.startswith(GM_PROP_PREFIX) and not allows(role, "write-any"):
                return False
            ent = world.entities.get(entity)
            if ent is None:
                return False
            if entity == actor or ent.owner == actor:
                return allows(role, "write-own")
            return allows(role, "write-any")

        return can_write


# -- views ----------------------------------------------------------------


@dataclass(frozen=True)
class ViewSpec:
    """A role-scoped filtered, projected slice of the world."""

    name: str
    role_scope: str = "player"
    kinds: Optional[frozenset[str]] = None
    prop_equals: Optional[tuple[str, object]] = None
    region: Optional[Region] = None
    projection: Optional[frozenset[str]] = None  # visible prop keys; None = all

    def matches(self, entity) -> bool:
        if self.kinds is not None and entity.kind not in self.kinds:
            return False
        if self.prop_equals is not None:
            key, value = self.prop_equals
            if entity.props.get(key) != value:
                return False
        if self.region is not None:
            if entity.geo_anchor is None or not self.region.contains(entity.geo_anchor):
                return False
        return True

    def project(self, entity) -> dict:
        props = entity.props
        if self.projection is not None:
            props = {k: v for k, v in props.items() if k in self.projection}
        return {
            "id": entity.id,
            "kind": entity.kind,
            "props": dict(props),
            "geo": [entity.geo_anchor.lat, entity.geo_anchor.lon] if entity.geo_anchor else None,
        }


class ViewRegistry:
    def __init__(self) -> None:
        self._views: dict[str, ViewSpec] = {}

    def define(self, spec: ViewSpec, role: str) -> str:
        if not allows(role, "view-admin"):
            raise PermissionDeniedError(f"role {role} may not define views")
        self._views[spec.name] = spec
        return spec.name

    def query(self, name: str, world: World, role: str) -> list[dict]:
        spec = self._views.get(name)
        if spec is None:
            raise UnknownViewError(f"no such view: {name}")
        if role_rank(role) < role_rank(spec.role_scope):
            raise PermissionDeniedError(f"role {role} below view scope {spec.role_scope}")
        return [
            spec.project(e)
            for eid, e in sorted(world.entities.items())
            if spec.matches(e)
        ]


# -- game-master intervention ---------------------------------------------


def gm_intervene(world: World, role: str, action: str, **args):
    """Run-time manipulation of internal state, through the journaled path."""
    if not allows(role, "write-any"):
        raise PermissionDeniedError(f"role {role} may not intervene")
    if action == "set_property":
        return world.set_property(args["entity"], args["key"], args["value"])
    if action == "teleport":
        world.move_entity(args["entity"], geo_anchor=args["geo"], payload={"provenance": "gm"})
        return None
    if action == "spawn":
        return world.create_entity(
            kind=args.get("kind", "agent"),
            parent=args.get("parent", 0),
            owner=args.get("owner", 0),
            props=args.get("props"),
            geo_anchor=args.get("geo"),
        )
    if action == "despawn":
        world.despawn(args["entity"])
        return None
    raise ValueError(f"unknown intervention: {action}")


def woz_trigger(world: World, role: str, entity: EntityId, geo: GeoPoint,
                payload: Optional[dict] = None) -> None:
    """Inject a synthetic fix; downstream it looks sensor-made except for the
    mandatory woz provenance flag."""
    if not allows(role, "woz"):
        raise PermissionDeniedError(f"role {role} may not trigger synthetic events")
    merged = dict(payload or {})
    merged["woz"] = True
    merged["provenance"] = "woz"
    world.move_entity(entity, geo_anchor=geo, payload=merged)


# -- heat map --------------------------------------------------------------


def heat_map(
    store: TriadStore,
    region: Region,
    interval: tuple[int, int],
    cell_size_deg: Optional[float] = None,
) -> dict[tuple[int, int], int]:
    """Count fixes per grid cell inside region and interval."""
    cell_size = cell_size_deg if cell_size_deg is not None else store.cell_size_deg
    t0, t1 = interval
    counts: dict[tuple[int, int], int] = {}
    for event in store.events:
        fix = event.fix
        if fix is None or not t0 <= event.when[0] <= t1 or not region.contains(fix):
            continue
        cell = cell_of(fix, cell_size)
        counts[cell] = counts.get(cell, 0) + 1
    return counts


# -- channels --------------------------------------------------------------


@dataclass
class Channel:
    name: str
    kind: str  # diegetic | non-diegetic
    members: set = field(default_factory=set)  # session ids
    proximity_radius_m: Optional[float] = None  # diegetic proximity, if set

    def __post_init__(self) -> None:
        if self.kind not in ("diegetic", "non-diegetic"):
            raise ValueError(f"unknown channel kind: {self.kind}")


def send_message(
    channel: Channel,
    sender_session,
    body: str,
    sessions: Iterable,
    world: World,
) -> list:
    """Pick the sessions that receive a message; delivery is the gateway's job.

    Messages carry their channel kind end-to-end; on a diegetic proximity
    channel only sessions whose avatars are within the radius of the sender's
    avatar receive it.
    """
    if sender_session.id not in channel.members:
        raise PermissionDeniedError(f"session {sender_session.id} is not in channel {channel.name}")
    recipients = []
    sender_pos = None
    if channel.proximity_radius_m is not None:
        sender = world.entities.get(sender_session.avatar)
        sender_pos = sender.geo_anchor if sender else None
    for session in sessions:
        if session.id not in channel.members:
            continue
        if channel.proximity_radius_m is not None:
            if sender_pos is None:
                continue
            ent = world.entities.get(session.avatar)
            if ent is None or ent.geo_anchor is None:
                continue
            if haversine_m(sender_pos, ent.geo_anchor) > channel.proximity_radius_m:
                continue
        recipients.append(session)
    return recipients
