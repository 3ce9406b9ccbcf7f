"""The assembled engine: world + event store + gateway + roles + rules.

One Engine owns the single-writer world, mirrors every world mutation into
the spatiotemporal store, evaluates rules, drives agents and thing sensors on
the tick, and fans events out to subscribed sessions as EVT lines.
"""

from __future__ import annotations

import hashlib
import json
from random import Random
from typing import Optional

from pervadia import roles
from pervadia.errors import ParseError, PermissionDeniedError, PervadiaError, RuleCycleError
from pervadia.gateway import Gateway, Session, format_line
from pervadia.geo import CircleRegion, GeoPoint
from pervadia.reality import ActuatorRegistry
from pervadia.rules import BehaviorRunner, RuleEngine
from pervadia.triad import EntityId, TriadEvent, TriadStore
from pervadia.world import DEFAULT_TICK_PERIOD_MS, World


class Engine:
    def __init__(self, seed: int = 0, tick_period: int = DEFAULT_TICK_PERIOD_MS):
        self.rng = Random(seed)
        self.world = World(tick_period=tick_period)
        self.triad = TriadStore()
        self.users = roles.UserRegistry()
        self.world.permission_check = self.users.make_permission_check(self.world)
        self.gateway = Gateway(self.world, self.users)
        self.rules = RuleEngine()
        self.behaviors = BehaviorRunner()
        self.views = roles.ViewRegistry()
        self.channels: dict[str, roles.Channel] = {}
        self.actuators = ActuatorRegistry()
        self._in_rule_action = False
        self._deferred: list[TriadEvent] = []
        self.action_log: list[dict] = []  # fired rule/timer actions, for traces

        self.world.subscribe(self._on_world_event)
        self.gateway.on_say = self._on_say
        self.gateway.oob_handlers.update(
            {
                "reconfigure": self._oob_reconfigure,
                "intervene": self._oob_intervene,
                "woz": self._oob_woz,
                "view": self._oob_view,
            }
        )

    # -- event flow --------------------------------------------------------

    def _on_world_event(self, event: TriadEvent) -> None:
        self.triad.record(event)
        self._fan_out(event)
        if self._in_rule_action:
            # Rule actions may trigger other rules only across tick boundaries.
            self._deferred.append(event)
        else:
            self._evaluate_rules(event)

    def _fan_out(self, event: TriadEvent) -> None:
        line = event_line(event)
        self.gateway.emit_to_subscribers("events", line)

    def _evaluate_rules(self, event: TriadEvent) -> None:
        entity = self.world.entities.get(event.what)
        fired = self.rules.eval_event(event, entity)
        self._in_rule_action = True
        try:
            for rule, action in fired:
                self.action_log.append(
                    {"tick": self.world.virtual_tick, "rule": rule.id, "action": action.verb}
                )
                try:
                    self._execute_action(action, event)
                except PervadiaError:
                    pass  # failed actions are reported, never abort the tick
        finally:
            self._in_rule_action = False

    def _execute_action(self, action, event: TriadEvent) -> None:
        args = [event.what if a == "$what" else a for a in action.args]
        if action.verb == "set_property":
            self.world.set_property(int(args[0]), str(args[1]), args[2])
        elif action.verb == "move":
            self.world.move_entity(int(args[0]), geo_anchor=GeoPoint(float(args[1]), float(args[2])),
                                   payload={"provenance": "rule"})
        elif action.verb == "emit_event":
            line = format_line("EVT", kind="rule", text=str(args[0]))
            self.gateway.emit_to_subscribers("events", line)
        elif action.verb == "schedule_timer":
            owner, delay, period, ref = int(args[0]), int(args[1]), int(args[2]), str(args[3])
            self.world.create_timer(owner, self.world.virtual_tick + delay, period, ref)
        elif action.verb == "send_message":
            channel = self.channels.get(str(args[0]))
            if channel is not None:
                line = format_line("EVT", kind="message", channel=channel.name,
                                   channel_kind=channel.kind, body=str(args[1]))
                for session in self.gateway.live_sessions():
                    if session.id in channel.members:
                        session.deliver(line)

    # -- the tick ----------------------------------------------------------

    def tick(self) -> list[dict]:
        """Advance one tick: fire timers, run agents/sensors, evaluate rule
        events deferred from the previous tick, sweep keep-alives."""
        deferred, self._deferred = self._deferred, []
        fired = self.world.advance_tick()
        results = []
        for f in fired:
            entry = {"tick": self.world.virtual_tick, "timer": f.timer_id, "action": f.action}
            try:
                self._run_timer_action(f)
                entry["ok"] = True
            except PervadiaError as exc:
                entry["ok"] = False
                entry["error"] = str(exc)
            results.append(entry)
            self.action_log.append(entry)
        for event in deferred:
            self._evaluate_rules(event)
        self.gateway.sweep_keepalive()
        return results

    def _run_timer_action(self, fired) -> None:
        action = fired.action
        if action.startswith("behavior:"):
            self.behaviors.step(self.world, int(action.split(":")[1]))
        elif action.startswith("sensor:"):
            _, thing, sensor = action.split(":", 2)
            self.gateway.read_sensor(int(thing), sensor)
        elif action.startswith("emit:"):
            self.gateway.emit_to_subscribers(
                "events", format_line("EVT", kind="timer", text=action[5:])
            )
        # Unknown actions are inert: reported in the log, never fatal.

    def run_ticks(self, n: int) -> None:
        for _ in range(n):
            self.tick()

    # -- chat --------------------------------------------------------------

    def define_channel(self, name: str, kind: str, proximity_radius_m: Optional[float] = None) -> roles.Channel:
        channel = roles.Channel(name, kind, set(), proximity_radius_m)
        self.channels[name] = channel
        return channel

    def _on_say(self, session: Session, channel_name: str, body: str) -> list[str]:
        channel = self.channels.get(channel_name)
        if channel is None:
            return [format_line("ERR", reason="parse-error", detail=f"no channel {channel_name}")]
        recipients = roles.send_message(channel, session, body, self.gateway.live_sessions(), self.world)
        line = format_line("EVT", kind="message", channel=channel.name,
                           channel_kind=channel.kind, sender=session.user_name, body=body)
        for recipient in recipients:
            recipient.deliver(line)
        return [format_line("EVT", kind="receipt", channel=channel.name, delivered=len(recipients))]

    # -- out-of-band GM verbs ---------------------------------------------

    def _oob_reconfigure(self, session: Session, fields: dict) -> list[str]:
        if not roles.allows(session.role, "reconfigure"):
            raise PermissionDeniedError(f"role {session.role} may not reconfigure")
        try:
            ids = self.rules.load_rules(fields.get("rules", ""))
        except (ParseError, RuleCycleError) as exc:
            return [format_line("ERR", reason="parse-error", detail=str(exc))]
        return [format_line("EVT", kind="ack", verb="reconfigure", rules=len(ids))]

    def _oob_intervene(self, session: Session, fields: dict) -> list[str]:
        action = fields.get("action", "")
        args: dict = {}
        if "entity" in fields:
            args["entity"] = int(fields["entity"])
        if "key" in fields:
            args["key"] = fields["key"]
        if "value" in fields:
            args["value"] = _decode_scalar(fields["value"])
        if "lat" in fields and "lon" in fields:
            args["geo"] = GeoPoint(float(fields["lat"]), float(fields["lon"]))
        if "kind" in fields:
            args["kind"] = fields["kind"]
        if "behavior" in fields:
            # Spawn a scripted agent instead of a bare entity.
            if not roles.allows(session.role, "write-any"):
                raise PermissionDeniedError(f"role {session.role} may not intervene")
            agent = self.behaviors.spawn_agent(self.world, fields["behavior"], args.get("geo"))
            return [format_line("EVT", kind="ack", verb="intervene", entity=agent)]
        result = roles.gm_intervene(self.world, session.role, action, **args)
        out = {"verb": "intervene", "action": action}
        if result is not None:
            out["result"] = result
        return [format_line("EVT", kind="ack", **out)]

    def _oob_woz(self, session: Session, fields: dict) -> list[str]:
        entity = int(fields["entity"])
        geo = GeoPoint(float(fields["lat"]), float(fields["lon"]))
        roles.woz_trigger(self.world, session.role, entity, geo)
        return [format_line("EVT", kind="ack", verb="woz", entity=entity)]

    def _oob_view(self, session: Session, fields: dict) -> list[str]:
        slices = self.views.query(fields["name"], self.world, session.role)
        return [format_line("EVT", kind="view", name=fields["name"], data=json.dumps(slices, sort_keys=True))]

    # -- digests -----------------------------------------------------------

    def state_digest(self) -> str:
        return hashlib.sha256(self.world.snapshot()).hexdigest()

    def trace_digest(self) -> str:
        blob = self.triad.export_jsonl() + json.dumps(self.action_log, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()


def event_line(event: TriadEvent) -> str:
    """Render one store event as an EVT wire line."""
    fields: dict = {
        "kind": event.change,
        "what": event.what,
        "t": event.when[0],
        "tick": event.when[1],
    }
    fix = event.fix
    if fix is not None:
        fields["lat"] = fix.lat
        fields["lon"] = fix.lon
    elif isinstance(event.where, int):
        fields["place"] = event.where
    for key in ("provenance", "accuracy", "key", "value", "woz"):
        if key in event.payload:
            fields[key] = event.payload[key]
    return format_line("EVT", **fields)


def _decode_scalar(text: str):
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        try:
            return float(text)
        except ValueError:
            return text
