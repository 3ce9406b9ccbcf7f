import pytest

from pervadia.errors import AuthFailedError, ProtocolError
from pervadia.gateway import (
    DeviceDescriptor,
    Gateway,
    ProxyObject,
    ThingDescriptor,
    format_line,
    parse_line,
)
from pervadia.roles import UserRegistry
from pervadia.world import World


def _gateway(**user_kwargs):
    world = World()
    users = UserRegistry()
    users.add("mika", "pw", role=user_kwargs.pop("role", "player"))
    return world, users, Gateway(world, users)


def _open(gw, device_class="phone", **kw):
    return gw.open_session("mika", "pw", device=DeviceDescriptor(device_class), **kw)


# -- grammar ---------------------------------------------------------------


def test_format_golden_lines():
    assert format_line("HELLO", name="mika", version="1") == "HELLO name=mika version=1"
    assert format_line("FIX", lat=59.3251, lon=18.071, acc=5.0, t=120) == \
        "FIX lat=59.3251 lon=18.071 acc=5.0 t=120"
    assert format_line("SAY", channel="street", body="see you there") == \
        "SAY channel=street body=see%20you%20there"
    assert format_line("EVT", kind="ack", verb="SUB") == "EVT kind=ack verb=SUB"
    assert format_line("intervene", oob=True, action="teleport") == \
        "#$# intervene action=teleport"


def test_parse_roundtrip_with_reserved_characters():
    body = "a=b c&d %100 #$# \n"
    line = format_line("SAY", channel="x", body=body)
    oob, verb, fields = parse_line(line)
    assert (oob, verb) == (False, "SAY")
    assert fields["body"] == body


def test_parse_oob_prefix():
    oob, verb, fields = parse_line("#$# woz kind=thunder\n")
    assert oob and verb == "woz" and fields == {"kind": "thunder"}


def test_parse_rejects_malformed():
    with pytest.raises(ProtocolError):
        parse_line("")
    with pytest.raises(ProtocolError):
        parse_line("FIX lat")


def test_bool_encoding():
    assert format_line("EVT", gap=True) == "EVT gap=true"


# -- sessions --------------------------------------------------------------


def test_all_device_classes_speak_the_same_grammar():
    world, users, gw = _gateway()
    for cls in ("phone", "web", "thing", "gm-tool"):
        users.add(f"u-{cls}", "pw")
        s = gw.open_session(f"u-{cls}", "pw", device=DeviceDescriptor(cls))
        assert gw.handle_line(s, "PING seq=7") == ["PONG seq=7"]
        assert gw.handle_line(s, "SUB topic=events") == ["EVT kind=ack verb=SUB"]


def test_auth_failure_and_version_mismatch():
    world, users, gw = _gateway()
    with pytest.raises(AuthFailedError):
        gw.open_session("mika", "wrong")
    with pytest.raises(ProtocolError):
        gw.open_session("mika", "pw", protocol_version="2")


def test_avatar_persists_across_sessions():
    world, users, gw = _gateway()
    s1 = _open(gw)
    gw.close_session(s1)
    s2 = _open(gw, device_class="web")
    assert s2.avatar == s1.avatar  # cross-media: one avatar, many devices


def test_err_reply_does_not_close_session():
    world, users, gw = _gateway()
    s = _open(gw)
    reply = gw.handle_line(s, "BOGUS x=1")
    assert reply[0].startswith("ERR reason=parse-error")
    assert s.live and s.id in gw.sessions
    reply = gw.handle_line(s, "HELLO name=mika")
    assert reply[0].startswith("ERR reason=protocol-error")
    assert s.live


def test_keepalive_sweep_closes_silent_sessions():
    world, users, gw = _gateway()
    s = _open(gw)
    for _ in range(5):
        world.advance_tick()
    assert gw.sweep_keepalive() == []
    world.advance_tick()  # now 6 ticks silent
    assert gw.sweep_keepalive() == [s]
    assert not s.live


def test_ping_resets_keepalive():
    world, users, gw = _gateway()
    s = _open(gw)
    for _ in range(10):
        world.advance_tick()
        gw.handle_line(s, "PING seq=1")
        assert gw.sweep_keepalive() == []


def test_fix_updates_avatar():
    world, users, gw = _gateway()
    s = _open(gw)
    reply = gw.handle_line(s, "FIX lat=59.3251 lon=18.0710 acc=5.0 t=0")
    assert reply == ["EVT kind=ack verb=FIX"]
    assert world.entities[s.avatar].geo_anchor.lat == 59.3251


# -- proxy objects ---------------------------------------------------------


def test_proxy_holds_session_across_keepalive():
    world, users, gw = _gateway()
    s = _open(gw, proxied=True)
    for _ in range(20):
        world.advance_tick()
    assert gw.sweep_keepalive() == []
    assert s.live


def test_proxy_queues_and_replays_in_order():
    world, users, gw = _gateway()
    s = _open(gw, proxied=True)
    s.subscriptions.add("events")
    for i in range(5):
        gw.emit_to_subscribers("events", f"EVT kind=test n={i}")
    assert s.sent == []
    got = []
    backlog = s.attach(got.append)
    assert backlog == got == [f"EVT kind=test n={i}" for i in range(5)]
    # Once attached, delivery is direct.
    gw.emit_to_subscribers("events", "EVT kind=test n=5")
    assert got[-1] == "EVT kind=test n=5"


def test_proxy_overflow_inserts_gap_marker():
    proxy = ProxyObject(bound=3)
    for i in range(6):
        proxy.enqueue(f"EVT n={i}")
    lines = proxy.drain()
    assert lines[0] == "EVT gap=true dropped=3"
    assert lines[1:] == ["EVT n=3", "EVT n=4", "EVT n=5"]
    assert proxy.drain() == []


# -- fan-out ---------------------------------------------------------------


def test_emit_event_counts_and_orders_by_session_id():
    world, users, gw = _gateway()
    sessions = []
    for i in range(4):
        users.add(f"p{i}", "pw")
        s = gw.open_session(f"p{i}", "pw")
        s.subscriptions.add("events")
        sessions.append(s)
    assert gw.emit_to_subscribers("events", "EVT kind=x") == 4
    for s in sessions:
        assert s.sent == ["EVT kind=x"]
    gw.handle_line(sessions[1], "UNSUB topic=events")
    assert gw.emit_to_subscribers("events", "EVT kind=y") == 3


# -- things ----------------------------------------------------------------

LAMP = ThingDescriptor(name="lamp", actuators=[{"name": "light", "commands": ["on", "off"]}])
THERMO = ThingDescriptor(name="thermo", sensors=[{"name": "temperature", "period": 5}])


def test_duplicate_sensor_names_rejected():
    with pytest.raises(ValueError):
        ThingDescriptor(name="x", sensors=[{"name": "a"}], actuators=[{"name": "a"}])


def test_act_verb_drives_thing_within_one_tick():
    world, users, gw = _gateway()
    s = _open(gw)
    gw.register_thing(LAMP)
    reply = gw.handle_line(s, "ACT thing=lamp cmd=on")
    assert reply == ["EVT kind=ack verb=ACT thing=lamp cmd=on"]
    assert gw.status()["lamp"]["props"]["light"] == "on"
    assert gw.physical[gw.thing_by_name["lamp"]]["light"] == "on"


def test_unsupported_command_is_err_not_crash():
    world, users, gw = _gateway()
    s = _open(gw)
    gw.register_thing(LAMP)
    reply = gw.handle_line(s, "ACT thing=lamp cmd=explode")
    assert reply[0].startswith("ERR reason=parse-error")
    reply = gw.handle_line(s, "ACT thing=ghost cmd=on")
    assert reply[0].startswith("ERR reason=parse-error")


def test_sensor_timers_follow_declared_period():
    world, users, gw = _gateway()
    entity = gw.register_thing(THERMO, initial_state={"temperature": 21})
    fire_ticks = []
    for _ in range(12):
        for fired in world.advance_tick():
            assert fired.action == f"sensor:{entity}:temperature"
            fire_ticks.append(world.virtual_tick)
            gw.read_sensor(entity, fired.action.split(":")[2])
    assert fire_ticks == [5, 10]
    assert world.entities[entity].props["temperature"] == 21
