"""Event-condition-action rules and agent behaviors.

Rule text is line-oriented: one rule per line,

    [name:] ON <pattern> [IF <expr>] DO <action> [; <action> ...]

where <pattern> is space-separated key=value terms (change=, kind=, prop.K=V,
region=circle:lat,lon,radius), <expr> is comparisons over props/tick/time
joined with AND/OR, and actions are set_property(e,k,v), move(e,lat,lon),
emit_event(text), schedule_timer(owner,delay,period,ref), send_message(ch,body).
`$what` names the triggering event's entity. Loading replaces rules by name,
without restart; a rule whose own actions would re-trigger it in the same tick
is rejected at load.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from pervadia.errors import ParseError, RuleCycleError
from pervadia.geo import CircleRegion, GeoPoint
from pervadia.triad import EntityId, TriadEvent

_NUM_RE = re.compile(r"^-?\d+(\.\d+)?$")


def _literal(token: str):
    if _NUM_RE.match(token):
        return float(token) if "." in token else int(token)
    if token in ("true", "false"):
        return token == "true"
    return token.strip("'\"")


@dataclass(frozen=True)
class Pattern:
    change: Optional[str] = None  # None = any
    kind: Optional[str] = None
    prop: Optional[tuple[str, object]] = None
    region: Optional[CircleRegion] = None

    def matches(self, event: TriadEvent, entity) -> bool:
        if self.change is not None and event.change != self.change:
            return False
        if self.kind is not None and (entity is None or entity.kind != self.kind):
            return False
        if self.prop is not None:
            key, value = self.prop
            if event.change == "property-change" and event.payload.get("key") == key:
                if event.payload.get("value") != value:
                    return False
            elif entity is None or entity.props.get(key) != value:
                return False
        if self.region is not None:
            fix = event.fix
            if fix is None or not self.region.contains(fix):
                return False
        return True


@dataclass(frozen=True)
class Condition:
    # Disjunctive normal form: OR over AND-groups of (lhs, op, rhs) terms.
    groups: tuple[tuple[tuple[str, str, object], ...], ...] = ()

    def evaluate(self, entity, tick: int, sim_time: int) -> bool:
        if not self.groups:
            return True
        for group in self.groups:
            if all(self._term(t, entity, tick, sim_time) for t in group):
                return True
        return False

    @staticmethod
    def _term(term: tuple[str, str, object], entity, tick: int, sim_time: int) -> bool:
        lhs, op, rhs = term
        if lhs == "tick":
            value = tick
        elif lhs == "time":
            value = sim_time
        elif lhs.startswith("props."):
            value = entity.props.get(lhs[6:]) if entity is not None else None
        else:
            return False
        if value is None:
            return False
        try:
            return {
                "==": value == rhs,
                "!=": value != rhs,
                ">": value > rhs,
                ">=": value >= rhs,
                "<": value < rhs,
                "<=": value <= rhs,
            }[op]
        except TypeError:
            return False


@dataclass(frozen=True)
class Action:
    verb: str
    args: tuple


@dataclass(frozen=True)
class Rule:
    id: str
    order: int
    pattern: Pattern
    condition: Condition
    actions: tuple[Action, ...]


class RuleEngine:
    """Holds the loaded rule set; evaluation is called from inside the tick."""

    def __init__(self) -> None:
        self.rules: dict[str, Rule] = {}
        self._order = 0

    def load_rules(self, text: str) -> list[str]:
        """Parse and install rules, replacing existing rules by id."""
        parsed: list[Rule] = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parsed.append(self._parse_rule(line, lineno))
        for rule in parsed:
            _check_self_trigger(rule)
        ids = []
        for rule in parsed:
            existing = self.rules.get(rule.id)
            order = existing.order if existing else self._next_order()
            self.rules[rule.id] = Rule(rule.id, order, rule.pattern, rule.condition, rule.actions)
            ids.append(rule.id)
        return ids

    def _next_order(self) -> int:
        self._order += 1
        return self._order

    def eval_event(self, event: TriadEvent, entity) -> list[tuple[Rule, Action]]:
        """All (rule, action) pairs fired by one event, ordered by rule id."""
        fired: list[tuple[Rule, Action]] = []
        for rule in sorted(self.rules.values(), key=lambda r: r.id):
            if not rule.pattern.matches(event, entity):
                continue
            if not rule.condition.evaluate(entity, event.when[1], event.when[0]):
                continue
            fired.extend((rule, action) for action in rule.actions)
        return fired

    # -- parsing -----------------------------------------------------------

    def _parse_rule(self, line: str, lineno: int) -> Rule:
        name = f"rule-{lineno}"
        m = re.match(r"^(\w[\w-]*)\s*:\s*(ON\b.*)$", line)
        if m:
            name, line = m.group(1), m.group(2)
        m = re.match(r"^ON\s+(.*?)\s+(?:IF\s+(.*?)\s+)?DO\s+(.*?)\s*;?\s*$", line)
        if m is None:
            raise ParseError("expected 'ON <pattern> [IF <expr>] DO <action>'", lineno, 1)
        pattern = self._parse_pattern(m.group(1), lineno)
        condition = self._parse_condition(m.group(2), lineno)
        actions = self._parse_actions(m.group(3), lineno)
        return Rule(name, 0, pattern, condition, actions)

    def _parse_pattern(self, text: str, lineno: int) -> Pattern:
        change = kind = None
        prop = region = None
        for term in text.split():
            if "=" not in term:
                raise ParseError(f"bad pattern term {term!r}", lineno, 1)
            key, _, value = term.partition("=")
            if key == "change":
                change = None if value == "*" else value
            elif key == "kind":
                kind = value
            elif key.startswith("prop."):
                prop = (key[5:], _literal(value))
            elif key == "region":
                if not value.startswith("circle:"):
                    raise ParseError(f"unsupported region {value!r}", lineno, 1)
                lat, lon, radius = (float(x) for x in value[7:].split(","))
                region = CircleRegion(GeoPoint(lat, lon), radius)
            else:
                raise ParseError(f"unknown pattern key {key!r}", lineno, 1)
        return Pattern(change, kind, prop, region)

    def _parse_condition(self, text: Optional[str], lineno: int) -> Condition:
        if text is None or text.strip() in ("", "true"):
            return Condition()
        groups = []
        for group_text in re.split(r"\s+OR\s+", text):
            terms = []
            for term_text in re.split(r"\s+AND\s+", group_text):
                m = re.match(r"^(\S+)\s*(==|!=|>=|<=|>|<)\s*(\S+)$", term_text.strip())
                if m is None:
                    raise ParseError(f"bad condition term {term_text!r}", lineno, 1)
                terms.append((m.group(1), m.group(2), _literal(m.group(3))))
            groups.append(tuple(terms))
        return Condition(tuple(groups))

    def _parse_actions(self, text: str, lineno: int) -> tuple[Action, ...]:
        actions = []
        for part in text.split(";"):
            part = part.strip()
            if not part:
                continue
            m = re.match(r"^(\w+)\s*\((.*)\)$", part)
            if m is None:
                raise ParseError(f"bad action {part!r}", lineno, 1)
            verb = m.group(1)
            if verb not in ("set_property", "move", "emit_event", "schedule_timer", "send_message"):
                raise ParseError(f"unknown action verb {verb!r}", lineno, 1)
            args = tuple(
                arg if arg == "$what" else _literal(arg)
                for arg in (a.strip() for a in m.group(2).split(","))
                if arg != ""
            )
            actions.append(Action(verb, args))
        if not actions:
            raise ParseError("rule has no actions", lineno, 1)
        return tuple(actions)


def _check_self_trigger(rule: Rule) -> None:
    """Reject rules whose own actions would match their trigger in-tick."""
    for action in rule.actions:
        if action.verb == "set_property" and action.args and action.args[0] == "$what":
            if rule.pattern.change in (None, "property-change"):
                key = action.args[1] if len(action.args) > 1 else None
                if rule.pattern.prop is None or rule.pattern.prop[0] == key:
                    raise RuleCycleError(f"rule {rule.id} re-triggers itself via set_property")
        if action.verb == "move" and action.args and action.args[0] == "$what":
            if rule.pattern.change in (None, "move") and rule.pattern.region is None:
                raise RuleCycleError(f"rule {rule.id} re-triggers itself via move")


# -- agent behaviors -------------------------------------------------------


@dataclass
class Behavior:
    name: str
    waypoints: list[GeoPoint]
    loop: bool = True
    step_action: Optional[str] = None


class BehaviorRunner:
    """Drives spawned agents: one behavior step per timer firing."""

    def __init__(self) -> None:
        self.behaviors: dict[str, Behavior] = {}
        self._agent_state: dict[EntityId, tuple[str, int]] = {}  # agent -> (behavior, next index)

    def define(self, behavior: Behavior) -> None:
        self.behaviors[behavior.name] = behavior

    def spawn_agent(self, world, behavior_name: str, start: Optional[GeoPoint] = None,
                    parent: EntityId = 0) -> EntityId:
        behavior = self.behaviors[behavior_name]
        agent = world.create_entity(
            kind="agent",
            parent=parent,
            props={"behavior": behavior_name},
            geo_anchor=start,
        )
        self._agent_state[agent] = (behavior_name, 0)
        world.create_timer(agent, world.virtual_tick + 1, 1, f"behavior:{agent}")
        return agent

    def step(self, world, agent: EntityId) -> None:
        """Consume one timer firing: advance the agent along its waypoints."""
        state = self._agent_state.get(agent)
        if state is None or agent not in world.entities:
            return
        name, index = state
        behavior = self.behaviors[name]
        if not behavior.waypoints:
            return  # idle agent
        if index >= len(behavior.waypoints):
            if not behavior.loop:
                return
            index = 0
        world.move_entity(agent, geo_anchor=behavior.waypoints[index],
                          payload={"provenance": "agent"})
        self._agent_state[agent] = (name, index + 1)
