import json
import re

import pytest
from fastapi.testclient import TestClient

from pervadia.cli import bundled_scenario_path, main
from pervadia.scenario import ScenarioFile, build_engine, run_engine_scenario
from pervadia.server import build_app

EXPECTED_TABLE = [
    "technology        1T Rt 1S 1Sh A+ I nZ P Av | ∀p:∧",
    "the GDD           − Y − Y − − Y Y Y | N",
    "Traveur           − Y Y Y − − Y Y Y | N",
    "pervasive engine  Y Y − Y Y Y Y Y Y | N",
    "the GDD: N ⊨ VT[1T,A+,I] ∧ VS[1S]",
    "Traveur: N ⊨ VT[1T,A+,I]",
    "pervasive engine: N ⊨ VS[1S]",
]


def test_classify_prints_reference_table(capsys):
    assert main(["classify"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines() == EXPECTED_TABLE


def test_classify_writes_table_files(tmp_path, capsys):
    assert main(["classify", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "table.txt").read_text().splitlines() == EXPECTED_TABLE[:4]
    csv_lines = (tmp_path / "table.csv").read_text().strip().splitlines()
    assert len(csv_lines) == 4


def test_classify_rejects_bad_profiles(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('[{"name": "x"}]')
    assert main(["classify", str(bad)]) == 2
    assert main(["classify", str(tmp_path / "missing.json")]) == 2


def test_run_missing_scenario_exits_2(capsys):
    assert main(["run", "no-such-scenario.json"]) == 2
    assert "error:" in capsys.readouterr().err


def test_run_engine_scenario_emits_reports(tmp_path, capsys):
    out = tmp_path / "report"
    assert main(["run", "iomoot.json", "--ticks", "30", "--out", str(out)]) == 0
    stdout = capsys.readouterr().out
    assert re.search(r"state digest: [0-9a-f]{64}", stdout)
    for name in ("trace.jsonl", "metrics.csv", "journal.bin", "status.json",
                 "activity.png", "fix_map.png"):
        assert (out / name).exists(), name
    status = json.loads((out / "status.json").read_text())
    assert status["lamp"]["props"]["light"] == "on"


def test_replay_journal_reproduces_live_digest(tmp_path, capsys):
    out = tmp_path / "report"
    main(["run", "iomoot.json", "--ticks", "30", "--out", str(out)])
    live = re.search(r"state digest: ([0-9a-f]{64})", capsys.readouterr().out).group(1)
    assert main(["replay", str(out / "journal.bin")]) == 0
    replayed = re.search(r"state digest: ([0-9a-f]{64})", capsys.readouterr().out).group(1)
    assert replayed == live


def test_replay_corrupt_journal_exits_2(tmp_path, capsys):
    out = tmp_path / "report"
    main(["run", "iomoot.json", "--ticks", "5", "--out", str(out)])
    capsys.readouterr()
    blob = bytearray((out / "journal.bin").read_bytes())
    blob[12] ^= 0xFF
    broken = tmp_path / "broken.bin"
    broken.write_bytes(bytes(blob))
    assert main(["replay", str(broken)]) == 2
    assert main(["replay", str(tmp_path / "absent.bin")]) == 2


def test_run_distsim_scenario(tmp_path, capsys):
    scenario = tmp_path / "dist.json"
    scenario.write_text(json.dumps({
        "ticks": 20,
        "topology": {"preset": "single+backup", "clients": 2},
        "workload": [{"tick": t, "client": "c1", "kind": "write", "key": "k", "value": t}
                     for t in range(1, 15)],
        "faults": [{"tick": 5, "kind": "crash", "node": "S"}],
    }))
    out = tmp_path / "report"
    assert main(["run", str(scenario), "--out", str(out)]) == 0
    stdout = capsys.readouterr().out
    assert "availability=" in stdout
    assert re.search(r"trace digest: [0-9a-f]{64}", stdout)
    for name in ("trace.jsonl", "metrics.csv", "latency.png"):
        assert (out / name).exists(), name


def test_scenario_rejects_unknown_keys():
    from pervadia.errors import InvalidScenarioError
    with pytest.raises(InvalidScenarioError):
        ScenarioFile.from_dict({"ticks": 5, "mystery": 1})


def test_toml_scenario_loads(tmp_path):
    toml = tmp_path / "s.toml"
    toml.write_text('ticks = 3\nseed = 9\n\n[[users]]\nname = "a"\npassword = "pw"\n')
    scenario = ScenarioFile.load(toml)
    assert (scenario.ticks, scenario.seed) == (3, 9)
    engine, sessions = run_engine_scenario(scenario)
    assert engine.world.virtual_tick == 3
    assert sessions["a"].live


# -- HTTP/WebSocket surface -------------------------------------------------


def _app():
    scenario = ScenarioFile.load(bundled_scenario_path("iomoot.json"))
    engine, _ = build_engine(scenario)
    return engine, build_app(engine)


def test_http_status_lists_things():
    engine, app = _app()
    client = TestClient(app)
    body = client.get("/status").json()
    assert {"lamp", "fan", "thermometer"} <= set(body)
    engine.gateway.actuate(engine.gateway.thing_by_name["lamp"], "on")
    assert client.get("/status").json()["lamp"]["props"]["light"] == "on"


def test_ws_requires_hello_first():
    _, app = _app()
    client = TestClient(app)
    with client.websocket_connect("/ws") as ws:
        ws.send_text("PING seq=1")
        assert ws.receive_text().startswith("ERR reason=protocol-error")
        ws.send_text("HELLO name=resident pass=home device=phone")
        welcome = ws.receive_text()
        assert welcome.startswith("EVT kind=welcome session=")
        assert "role=player" in welcome
        ws.send_text("PING seq=2")
        assert ws.receive_text() == "PONG seq=2"


def test_ws_bad_credentials_and_version():
    _, app = _app()
    client = TestClient(app)
    with client.websocket_connect("/ws") as ws:
        ws.send_text("HELLO name=resident pass=wrong")
        assert ws.receive_text().startswith("ERR reason=auth-failed")
        ws.send_text("HELLO name=resident pass=home version=9")
        assert ws.receive_text().startswith("ERR reason=protocol-version-mismatch")


def test_ws_act_drives_thing():
    engine, app = _app()
    client = TestClient(app)
    with client.websocket_connect("/ws") as ws:
        ws.send_text("HELLO name=resident pass=home device=phone")
        ws.receive_text()
        ws.send_text("ACT thing=fan cmd=on")
        assert ws.receive_text() == "EVT kind=ack verb=ACT thing=fan cmd=on"
    assert client.get("/status").json()["fan"]["props"]["fan"] == "on"
