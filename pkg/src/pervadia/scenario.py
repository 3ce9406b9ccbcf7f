"""Scenario files: self-contained world + workload descriptions.

A scenario is JSON or TOML; two machines given the same file and seed produce
identical traces. It can describe an engine run (entities, users, rules,
things, scripted client lines) and/or a distributed-topology simulation
(topology preset, workload, faults).
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from pervadia import distsim
from pervadia.engine import Engine
from pervadia.errors import InvalidScenarioError
from pervadia.gateway import DeviceDescriptor, ThingDescriptor
from pervadia.geo import GeoPoint
from pervadia.reality import ClockModel, SensorModel
from pervadia.roles import ViewSpec
from pervadia.rules import Behavior


@dataclass
class ScenarioFile:
    seed: int = 0
    ticks: int = 100
    tick_period: int = 1000
    users: list[dict] = field(default_factory=list)
    entities: list[dict] = field(default_factory=list)
    sensor: dict = field(default_factory=dict)
    clock: dict = field(default_factory=dict)
    rules: str = ""
    views: list[dict] = field(default_factory=list)
    things: list[dict] = field(default_factory=list)
    behaviors: list[dict] = field(default_factory=list)
    agents: list[dict] = field(default_factory=list)
    channels: list[dict] = field(default_factory=list)
    script: list[dict] = field(default_factory=list)
    topology: Optional[dict] = None
    workload: list[dict] = field(default_factory=list)
    faults: list[dict] = field(default_factory=list)

    @classmethod
    def load(cls, path: str | Path) -> ScenarioFile:
        path = Path(path)
        raw = path.read_bytes()
        if path.suffix == ".toml":
            data = tomllib.loads(raw.decode())
        else:
            data = json.loads(raw.decode())
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: dict) -> ScenarioFile:
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise InvalidScenarioError(f"unknown scenario keys: {sorted(extra)}")
        return cls(**data)

    @property
    def sensor_model(self) -> SensorModel:
        return SensorModel(**self.sensor) if self.sensor else SensorModel()

    @property
    def clock_model(self) -> ClockModel:
        return ClockModel(**self.clock) if self.clock else ClockModel()


def build_engine(scenario: ScenarioFile) -> tuple[Engine, dict]:
    """Seed an engine from a scenario; returns (engine, sessions by user)."""
    engine = Engine(seed=scenario.seed, tick_period=scenario.tick_period)
    for user in scenario.users:
        engine.users.add(user["name"], user.get("password", ""), user.get("role", "player"))
    for spec in scenario.entities:
        geo = GeoPoint(*spec["geo"]) if spec.get("geo") else None
        engine.world.create_entity(
            kind=spec.get("kind", "thing"),
            parent=spec.get("parent", 0),
            owner=spec.get("owner", 0),
            props=spec.get("props"),
            geo_anchor=geo,
        )
    if scenario.rules:
        engine.rules.load_rules(scenario.rules)
    for view in scenario.views:
        engine.views.define(
            ViewSpec(
                name=view["name"],
                role_scope=view.get("role_scope", "player"),
                kinds=frozenset(view["kinds"]) if view.get("kinds") else None,
                prop_equals=tuple(view["prop_equals"]) if view.get("prop_equals") else None,
                projection=frozenset(view["projection"]) if view.get("projection") else None,
            ),
            role="admin",
        )
    for thing in scenario.things:
        engine.gateway.register_thing(
            ThingDescriptor(
                name=thing["name"],
                sensors=thing.get("sensors", []),
                actuators=thing.get("actuators", []),
            ),
            initial_state=thing.get("initial_state"),
        )
    for b in scenario.behaviors:
        engine.behaviors.define(
            Behavior(
                name=b["name"],
                waypoints=[GeoPoint(*w) for w in b.get("waypoints", [])],
                loop=b.get("loop", True),
            )
        )
    for channel in scenario.channels:
        engine.define_channel(channel["name"], channel.get("kind", "non-diegetic"),
                              channel.get("radius_m"))

    sessions: dict[str, object] = {}
    for user in scenario.users:
        session = engine.gateway.open_session(
            user["name"], user.get("password", ""),
            DeviceDescriptor(device_class=user.get("device", "phone")),
            proxied=user.get("proxied", False),
        )
        session.subscriptions.add("events")
        sessions[user["name"]] = session
    for agent in scenario.agents:
        start = GeoPoint(*agent["start"]) if agent.get("start") else None
        engine.behaviors.spawn_agent(engine.world, agent["behavior"], start)
    return engine, sessions


def run_engine_scenario(scenario: ScenarioFile) -> tuple[Engine, dict]:
    """Run the scripted ticks: at each tick, apply that tick's client lines."""
    engine, sessions = build_engine(scenario)
    script_by_tick: dict[int, list[dict]] = {}
    for entry in scenario.script:
        script_by_tick.setdefault(int(entry["tick"]), []).append(entry)
    keepalive = {u["name"] for u in scenario.users if u.get("keepalive", True)}
    for _ in range(scenario.ticks):
        # Simulated clients are responsible for keeping the connection alive.
        for name in sorted(keepalive):
            session = sessions[name]
            if session.live:
                engine.gateway.handle_line(session, f"PING seq={engine.world.virtual_tick}")
        for entry in script_by_tick.get(engine.world.virtual_tick, []):
            session = sessions.get(entry["session"])
            if session is None or not session.live:
                continue
            engine.gateway.handle_line(session, entry["line"])
        engine.tick()
    return engine, sessions


def build_distsim_scenario(scenario: ScenarioFile) -> distsim.Scenario:
    if scenario.topology is None:
        raise InvalidScenarioError("scenario has no topology section")
    topo_spec = dict(scenario.topology)
    preset = topo_spec.pop("preset")
    topology = distsim.build_topology(preset, **topo_spec)
    workload = [
        distsim.ClientOp(
            tick=int(op["tick"]), client=op["client"], kind=op["kind"],
            key=op.get("key", "k"), value=op.get("value"),
            op_class=op.get("class", ""),
        )
        for op in scenario.workload
    ]
    faults = [
        distsim.Fault(
            tick=int(f["tick"]), kind=f["kind"], node=f.get("node"),
            edges=tuple(f.get("edges", ())),
        )
        for f in scenario.faults
    ]
    return distsim.Scenario(topology=topology, ticks=scenario.ticks,
                            workload=workload, faults=faults, seed=scenario.seed)
