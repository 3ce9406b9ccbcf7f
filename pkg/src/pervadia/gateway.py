"""Sessions over a line protocol, proxy objects, and thing registration.

Wire grammar (bit-exact): UTF-8, newline-terminated. An in-band line is a
VERB followed by space-separated key=value pairs with percent-encoded values.
Out-of-band control lines are prefixed "#$# ". Verbs: HELLO, PING, PONG, FIX,
SAY, ACT, SUB, UNSUB, ERR, EVT.

Any client speaking this grammar interoperates regardless of device class.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional
from urllib.parse import quote, unquote

from pervadia.errors import (
    AuthFailedError,
    PermissionDeniedError,
    ProtocolError,
    UnknownThingError,
    UnsupportedCommandError,
)
from pervadia.geo import GeoPoint
from pervadia.reality import ClockModel, MeasuredFix, ingest
from pervadia.roles import UserRegistry, allows
from pervadia.triad import EntityId
from pervadia.world import World

OOB_PREFIX = "#$# "
PROTOCOL_VERSION = "1"

VERBS = ("HELLO", "PING", "PONG", "FIX", "SAY", "ACT", "SUB", "UNSUB", "ERR", "EVT")

KEEPALIVE_TICKS = 5
PROXY_QUEUE_BOUND = 10_000

DEVICE_CLASSES = ("phone", "web", "thing", "gm-tool")


def format_line(verb: str, /, oob: bool = False, **fields) -> str:
    parts = [verb]
    for key, value in fields.items():
        if isinstance(value, bool):
            value = "true" if value else "false"
        parts.append(f"{key}={quote(str(value), safe='')}")
    line = " ".join(parts)
    return (OOB_PREFIX + line) if oob else line


def parse_line(line: str) -> tuple[bool, str, dict[str, str]]:
    """Split a wire line into (out-of-band?, verb, fields)."""
    line = line.rstrip("\r\n")
    oob = line.startswith(OOB_PREFIX)
    if oob:
        line = line[len(OOB_PREFIX):]
    if not line:
        raise ProtocolError("empty line")
    parts = line.split(" ")
    verb = parts[0]
    fields: dict[str, str] = {}
    for part in parts[1:]:
        if "=" not in part:
            raise ProtocolError(f"malformed field {part!r}")
        key, _, value = part.partition("=")
        fields[key] = unquote(value)
    return oob, verb, fields


@dataclass
class DeviceDescriptor:
    device_class: str = "phone"
    capabilities: frozenset[str] = frozenset({"sensor:gps", "display", "input"})

    def __post_init__(self) -> None:
        if self.device_class not in DEVICE_CLASSES:
            raise ValueError(f"unknown device class: {self.device_class}")


class ProxyObject:
    """Keeps a connectionless client's session alive; queues undelivered
    events, dropping oldest with an explicit gap marker on overflow."""

    def __init__(self, bound: int = PROXY_QUEUE_BOUND):
        self.bound = bound
        self.queue: list[str] = []
        self.dropped = 0

    def enqueue(self, line: str) -> None:
        if len(self.queue) >= self.bound:
            self.queue.pop(0)
            self.dropped += 1
        self.queue.append(line)

    def drain(self) -> list[str]:
        lines, self.queue = self.queue, []
        if self.dropped:
            lines.insert(0, format_line("EVT", gap=True, dropped=self.dropped))
            self.dropped = 0
        return lines


@dataclass
class Session:
    id: int
    user_name: str
    role: str
    avatar: EntityId
    device: DeviceDescriptor
    last_ping: int = 0
    live: bool = True
    subscriptions: set[str] = field(default_factory=set)
    transport: Optional[Callable[[str], None]] = None
    proxy: Optional[ProxyObject] = None
    sent: list[str] = field(default_factory=list)
    clock: ClockModel = ClockModel()

    def deliver(self, line: str) -> None:
        if self.transport is None and self.proxy is not None:
            self.proxy.enqueue(line)
            return
        self.sent.append(line)
        if self.transport is not None:
            self.transport(line)

    def attach(self, transport: Optional[Callable[[str], None]]) -> list[str]:
        """(Re)connect an on-demand client; replay any proxied backlog in order."""
        self.transport = transport
        backlog = self.proxy.drain() if self.proxy else []
        for line in backlog:
            self.sent.append(line)
            if transport is not None:
                transport(line)
        return backlog

    def detach(self) -> None:
        self.transport = None


@dataclass
class ThingDescriptor:
    name: str
    sensors: list[dict] = field(default_factory=list)   # {name, unit, period}
    actuators: list[dict] = field(default_factory=list)  # {name, commands}

    def __post_init__(self) -> None:
        names = [s["name"] for s in self.sensors] + [a["name"] for a in self.actuators]
        if len(names) != len(set(names)):
            raise ValueError(f"duplicate sensor/actuator names on thing {self.name}")


class Gateway:
    """Serializes heterogeneous clients into the world's command path and
    fans events back out, per-session FIFO."""

    def __init__(self, world: World, users: UserRegistry,
                 keepalive_ticks: int = KEEPALIVE_TICKS):
        self.world = world
        self.users = users
        self.keepalive_ticks = keepalive_ticks
        self.sessions: dict[int, Session] = {}
        self._next_session_id = 1
        self.things: dict[EntityId, ThingDescriptor] = {}
        self.thing_by_name: dict[str, EntityId] = {}
        self.physical: dict[EntityId, dict] = {}  # simulated device-side state
        # Out-of-band verb handlers installed by the engine: verb -> fn(session, fields) -> lines
        self.oob_handlers: dict[str, Callable[[Session, dict], list[str]]] = {}
        self.on_say: Optional[Callable[[Session, str, str], list[str]]] = None

    # -- sessions ----------------------------------------------------------

    def open_session(self, name: str, password: str,
                     device: Optional[DeviceDescriptor] = None,
                     proxied: bool = False,
                     protocol_version: str = PROTOCOL_VERSION) -> Session:
        if protocol_version != PROTOCOL_VERSION:
            raise ProtocolError(f"protocol version mismatch: {protocol_version}")
        user = self.users.authenticate(name, password)
        if user is None:
            raise AuthFailedError(f"bad credentials for {name!r}")
        if user.avatar is None:
            user.avatar = self.world.create_entity(kind="avatar", props={"name": name})
        session = Session(
            id=self._next_session_id,
            user_name=name,
            role=user.role,
            avatar=user.avatar,
            device=device or DeviceDescriptor(),
            last_ping=self.world.virtual_tick,
            proxy=ProxyObject() if proxied else None,
        )
        self._next_session_id += 1
        self.sessions[session.id] = session
        return session

    def close_session(self, session: Session) -> None:
        session.live = False
        self.sessions.pop(session.id, None)

    def live_sessions(self) -> list[Session]:
        return [s for s in self.sessions.values() if s.live]

    def sweep_keepalive(self) -> list[Session]:
        """Close sessions that have gone silent past the keep-alive window."""
        tick = self.world.virtual_tick
        closed = []
        for session in list(self.sessions.values()):
            if session.proxy is not None:
                continue  # the proxy object keeps the connection alive
            if tick - session.last_ping > self.keepalive_ticks:
                self.close_session(session)
                closed.append(session)
        return closed

    # -- line handling -----------------------------------------------------

    def handle_line(self, session: Session, line: str) -> list[str]:
        """Apply one client line; malformed input answers ERR without closing."""
        try:
            oob, verb, fields = parse_line(line)
        except ProtocolError as exc:
            return [format_line("ERR", reason="parse-error", detail=str(exc))]
        try:
            if oob:
                return self._handle_oob(session, verb, fields)
            return self._handle_inband(session, verb, fields)
        except PermissionDeniedError as exc:
            return [format_line("ERR", reason="permission-denied", detail=str(exc))]
        except (ProtocolError, UnknownThingError, UnsupportedCommandError, KeyError, ValueError) as exc:
            return [format_line("ERR", reason="parse-error", detail=str(exc))]

    def _handle_inband(self, session: Session, verb: str, fields: dict) -> list[str]:
        if verb == "PING":
            session.last_ping = self.world.virtual_tick
            return [format_line("PONG", seq=fields.get("seq", "0"))]
        if verb == "HELLO":
            # Session is already authenticated; a second HELLO is a protocol
            # error but does not close the session.
            return [format_line("ERR", reason="protocol-error", detail="already authenticated")]
        if verb == "FIX":
            measured = MeasuredFix(
                pos=GeoPoint(float(fields["lat"]), float(fields["lon"])),
                accuracy=float(fields.get("acc", "0")),
                device_time=int(fields["t"]),
                device=session.device.device_class,
            )
            ingest(measured, session, self.world, session.clock)
            return [format_line("EVT", kind="ack", verb="FIX")]
        if verb == "SAY":
            if self.on_say is None:
                raise ProtocolError("no chat configured")
            return self.on_say(session, fields.get("channel", ""), fields.get("body", ""))
        if verb == "ACT":
            thing = self.thing_by_name.get(fields["thing"])
            if thing is None:
                raise UnknownThingError(f"no such thing: {fields['thing']}")
            self.actuate(thing, fields["cmd"])
            return [format_line("EVT", kind="ack", verb="ACT", thing=fields["thing"], cmd=fields["cmd"])]
        if verb == "SUB":
            session.subscriptions.add(fields.get("topic", "events"))
            return [format_line("EVT", kind="ack", verb="SUB")]
        if verb == "UNSUB":
            session.subscriptions.discard(fields.get("topic", "events"))
            return [format_line("EVT", kind="ack", verb="UNSUB")]
        return [format_line("ERR", reason="parse-error", detail=f"unknown verb {verb}")]

    def _handle_oob(self, session: Session, verb: str, fields: dict) -> list[str]:
        handler = self.oob_handlers.get(verb)
        if handler is None:
            return [format_line("ERR", reason="parse-error", detail=f"unknown control verb {verb}")]
        return handler(session, fields)

    # -- event fan-out -----------------------------------------------------

    def emit_event(self, matches: Callable[[Session], bool], line: str) -> int:
        """Deliver one line to every matching live session (proxies enqueue)."""
        count = 0
        for session in sorted(self.sessions.values(), key=lambda s: s.id):
            if not session.live or not matches(session):
                continue
            session.deliver(line)
            count += 1
        return count

    def emit_to_subscribers(self, topic: str, line: str) -> int:
        return self.emit_event(lambda s: topic in s.subscriptions, line)

    # -- things ------------------------------------------------------------

    def register_thing(self, descriptor: ThingDescriptor, parent: EntityId = 0,
                       initial_state: Optional[dict] = None) -> EntityId:
        entity = self.world.create_entity(
            kind="thing", parent=parent, props={"name": descriptor.name}
        )
        self.things[entity] = descriptor
        self.thing_by_name[descriptor.name] = entity
        self.physical[entity] = dict(initial_state or {})
        for sensor in descriptor.sensors:
            period = int(sensor.get("period", 1))
            self.world.create_timer(
                entity, self.world.virtual_tick + period, period,
                f"sensor:{entity}:{sensor['name']}",
            )
        return entity

    def actuate(self, thing: EntityId, command: str) -> dict:
        """Apply an actuator command to both the virtual entity and the
        simulated physical device; observers see it within one tick."""
        descriptor = self.things.get(thing)
        if descriptor is None:
            raise UnknownThingError(f"no such thing: {thing}")
        for actuator in descriptor.actuators:
            if command in actuator["commands"]:
                key = actuator["name"]
                self.physical[thing][key] = command
                self.world.set_property(thing, key, command)
                return {"thing": thing, key: command}
        raise UnsupportedCommandError(f"thing {descriptor.name} does not support {command!r}")

    def read_sensor(self, thing: EntityId, sensor_name: str):
        """One sensor emission: read device-side state into the virtual entity."""
        descriptor = self.things.get(thing)
        if descriptor is None:
            raise UnknownThingError(f"no such thing: {thing}")
        value = self.physical[thing].get(sensor_name)
        if value is not None:
            self.world.set_property(thing, sensor_name, value)
        return value

    def status(self) -> dict:
        """Thing states for the HTTP status page."""
        out = {}
        for entity, descriptor in self.things.items():
            ent = self.world.entities.get(entity)
            out[descriptor.name] = {
                "entity": entity,
                "props": dict(ent.props) if ent else {},
            }
        return out
