"""Generate golden fixtures for the frontend tests from the engine library.

Run from the repository root:

    python3 frontend/scripts/make_fixtures.py

Writes JSON files into frontend/test/fixtures/. The frontend implementations
must reproduce these outputs byte-for-byte (wire lines) or cell-for-cell
(heat map), so any drift between the two codebases fails the vitest suite.
"""

from __future__ import annotations

import json
from pathlib import Path
from random import Random

from pervadia.engine import Engine, event_line
from pervadia.gateway import DeviceDescriptor, format_line, parse_line
from pervadia.geo import CircleRegion, GeoPoint
from pervadia.roles import heat_map
from pervadia.triad import TriadEvent, TriadStore

OUT = Path(__file__).resolve().parent.parent / "test" / "fixtures"


def wire_fixture() -> None:
    cases = []
    samples = [
        ("HELLO", {"name": "gm", "pass": "secret", "device": "gm-tool", "version": "1"}, False),
        ("PING", {"seq": 42}, False),
        ("FIX", {"lat": 59.3251, "lon": 18.071, "acc": 5.0, "t": 120000}, False),
        ("SAY", {"channel": "street", "body": "see you at the square!"}, False),
        ("SAY", {"channel": "x", "body": "a=b c&d %100 #$# ~tilde_ok.-"}, False),
        ("EVT", {"kind": "ack", "verb": "SUB"}, False),
        ("EVT", {"gap": True, "dropped": 17}, False),
        ("intervene", {"action": "teleport", "entity": 9, "lat": 59.0, "lon": 18.0}, True),
        ("woz", {"entity": 4, "lat": 59.1, "lon": 18.1}, True),
        ("reconfigure", {"rules": "r: ON change=move DO emit_event(x)"}, True),
    ]
    for verb, fields, oob in samples:
        line = format_line(verb, oob=oob, **fields)
        parsed_oob, parsed_verb, parsed_fields = parse_line(line)
        cases.append({
            "line": line,
            "oob": parsed_oob,
            "verb": parsed_verb,
            "fields": parsed_fields,
        })
    (OUT / "wire.json").write_text(json.dumps(cases, indent=2, ensure_ascii=False))


def event_stream_fixture() -> None:
    """A real engine run: the EVT lines a subscribed console session sees,
    plus the marker state it should derive from them."""
    engine = Engine(seed=5)
    engine.users.add("console", "pw", role="game-master")
    console = engine.gateway.open_session("console", "pw", DeviceDescriptor("gm-tool"))
    console.subscriptions.add("events")

    engine.users.add("runner", "pw")
    runner = engine.gateway.open_session("runner", "pw", DeviceDescriptor("phone"))
    walk = [(59.3251, 18.0710), (59.3253, 18.0714), (59.3256, 18.0719), (59.3260, 18.0724)]
    for lat, lon in walk:
        t = engine.world.sim_time
        engine.gateway.handle_line(runner, f"FIX lat={lat} lon={lon} acc=4.0 t={t}")
        engine.gateway.handle_line(runner, "PING seq=0")
        engine.tick()
    # One synthetic trigger and one direct GM move, so all three provenance
    # badges appear in the stream.
    engine.gateway.handle_line(console, f"#$# woz entity={runner.avatar} lat=59.3262 lon=18.0726")
    engine.gateway.handle_line(
        console, f"#$# intervene action=teleport entity={runner.avatar} lat=59.3270 lon=18.0730")
    engine.tick()

    lines = [l for l in console.sent if l.startswith("EVT kind=move") or l.startswith("EVT kind=appear")]
    markers = {}
    for event in engine.triad.events:
        fix = event.fix
        if fix is None:
            continue
        markers[str(event.what)] = {
            "id": event.what,
            "lat": fix.lat,
            "lon": fix.lon,
            "t": event.when[0],
            "tick": event.when[1],
            "provenance": event.payload.get("provenance", "unknown"),
            "label": f"#{event.what} @ {event.when[0]}ms",
        }
    (OUT / "event_stream.json").write_text(json.dumps(
        {"lines": lines, "markers": markers}, indent=2))


def trajectory_fixture() -> None:
    rng = Random(12)
    store = TriadStore()
    store.record(TriadEvent(1, GeoPoint(59.32, 18.06), (0, 0), "appear"))
    t = 0
    for _ in range(25):
        t += rng.randrange(500, 2000)
        store.record(TriadEvent(
            1, GeoPoint(59.32 + rng.uniform(0, 0.01), 18.06 + rng.uniform(0, 0.01)),
            (t, t // 1000), "move"))
    t0, t1 = t // 5, 4 * t // 5
    points = [{"t": when, "lat": fix.lat, "lon": fix.lon}
              for when, fix in store.trajectory(1, t0, t1)]
    (OUT / "trajectory.json").write_text(json.dumps(
        {"entity": 1, "t0": t0, "t1": t1, "points": points}, indent=2))


def heatmap_fixture() -> None:
    rng = Random(9)
    store = TriadStore()
    for e in range(1, 7):
        store.record(TriadEvent(e, GeoPoint(59.32, 18.06), (0, 0), "appear"))
    events = []
    t = 0
    for _ in range(500):
        t += rng.randrange(1, 100)
        lat = 59.32 + rng.uniform(0, 0.008)
        lon = 18.06 + rng.uniform(0, 0.008)
        what = rng.randrange(1, 7)
        store.record(TriadEvent(what, GeoPoint(lat, lon), (t, t // 1000), "move"))
        events.append({"what": what, "lat": lat, "lon": lon, "t": t})
    center = {"lat": 59.324, "lon": 18.064}
    radius = 350.0
    interval = [t // 4, 3 * t // 4]
    counts = heat_map(store, CircleRegion(GeoPoint(center["lat"], center["lon"]), radius),
                      (interval[0], interval[1]))
    (OUT / "heatmap.json").write_text(json.dumps({
        "events": events,
        "region": {"center": center, "radius_m": radius},
        "interval": interval,
        "cell_size_deg": store.cell_size_deg,
        "counts": {f"{la},{lo}": n for (la, lo), n in sorted(counts.items())},
    }, indent=2))


def intervention_fixture() -> None:
    # Form values are strings: they come from text inputs, and keeping them
    # verbatim sidesteps float-formatting differences between languages.
    cases = [
        {
            "form": {"kind": "teleport", "entity": "12", "lat": "59.31", "lon": "18.07"},
            "line": format_line("intervene", oob=True, action="teleport",
                                entity="12", lat="59.31", lon="18.07"),
        },
        {
            "form": {"kind": "set_property", "entity": "3", "key": "gm.score", "value": "15"},
            "line": format_line("intervene", oob=True, action="set_property",
                                entity="3", key="gm.score", value="15"),
        },
        {
            "form": {"kind": "spawn", "entityKind": "agent", "behavior": "patrol",
                     "lat": "59.3", "lon": "18.0"},
            "line": format_line("intervene", oob=True, action="spawn", kind="agent",
                                behavior="patrol", lat="59.3", lon="18.0"),
        },
        {
            "form": {"kind": "despawn", "entity": "44"},
            "line": format_line("intervene", oob=True, action="despawn", entity="44"),
        },
        {
            "form": {"kind": "woz", "entity": "7", "lat": "59.33", "lon": "18.08"},
            "line": format_line("woz", oob=True, entity="7", lat="59.33", lon="18.08"),
        },
        {
            "form": {"kind": "reconfigure",
                     "rules": "gate: ON change=move region=circle:59.0,18.0,100 DO emit_event(gate)"},
            "line": format_line(
                "reconfigure", oob=True,
                rules="gate: ON change=move region=circle:59.0,18.0,100 DO emit_event(gate)"),
        },
    ]
    (OUT / "interventions.json").write_text(json.dumps(cases, indent=2))


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    wire_fixture()
    event_stream_fixture()
    trajectory_fixture()
    heatmap_fixture()
    intervention_fixture()
    for path in sorted(OUT.glob("*.json")):
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
