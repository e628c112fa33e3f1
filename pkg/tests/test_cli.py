"""Headless CLI: scripted virtual run producing reports and event logs."""

import json

import pytest

from teleosim.cli import parse_script, sim_main


def test_parse_script_sorts_and_validates(tmp_path):
    steps = parse_script("2000 stop\n0 drive 0.5 0\n")
    assert [s[1] for s in steps] == ["drive", "stop"]
    with pytest.raises(ValueError):
        parse_script("abc drive 1 0\n")


def test_sim_main_end_to_end(tmp_path, capsys):
    script = tmp_path / "run.script"
    script.write_text("500 drive 0.5 0\n6000 ptz 30 0 1\n9000 stop\n")
    report = tmp_path / "paths.csv"
    events = tmp_path / "events.jsonl"
    rc = sim_main(
        [
            "--script", str(script),
            "--duration", "12",
            "--report", str(report),
            "--events-out", str(events),
            "--speed", "0.5",
        ]
    )
    assert rc == 0
    out = capsys.readouterr().out
    assert "telemetry frames sent" in out
    assert report.exists()
    lines = report.read_text().splitlines()
    assert lines[0] == "source,t_ms,x,y"
    assert any(line.startswith("remote,") for line in lines)
    records = [json.loads(line) for line in events.read_text().splitlines()]
    assert any(r["event"] == "set_twist" for r in records)
    assert any(r["event"] == "set_ptz" for r in records)


def test_sim_main_with_blackout_script(tmp_path, capsys):
    script = tmp_path / "run.script"
    script.write_text("500 drive 0.4 0\n3000 blackout 4000\n")
    rc = sim_main(["--script", str(script), "--duration", "15"])
    assert rc == 0
    assert "collisions" in capsys.readouterr().out


def test_shipped_scenario_files_load():
    from teleosim.scenario import load_profile, load_world

    world = load_world("scenarios/campus.world")
    assert world.obstacles
    profile, interrupts = load_profile("scenarios/measured_3g.profile")
    assert profile.rows[0][0] == 100
    assert interrupts == []


def test_custom_avoidance_rules_flag(tmp_path, capsys):
    # the exported default rulebase loads back and drives identically
    from teleosim.controllers import ObstacleAvoidanceController, build_avoidance_rules
    from teleosim.fuzzy import load_rulebase, rulebase_to_text
    from teleosim.geometry import Twist
    from teleosim.sensors import NO_ECHO, SonarArray

    rules_file = tmp_path / "custom.rules"
    rules_file.write_text(rulebase_to_text(build_avoidance_rules()))
    loaded = load_rulebase(str(rules_file))
    stock = ObstacleAvoidanceController()
    custom = ObstacleAvoidanceController(rulebase=loaded)
    sonar = SonarArray((1.1, NO_ECHO, 0.7, NO_ECHO, NO_ECHO, NO_ECHO, NO_ECHO, NO_ECHO))
    assert custom.adjust(sonar, Twist(1.0, 0.0)) == stock.adjust(sonar, Twist(1.0, 0.0))

    script = tmp_path / "run.script"
    script.write_text("500 drive 0.4 0\n")
    rc = sim_main(
        ["--script", str(script), "--duration", "5", "--avoidance-rules", str(rules_file)]
    )
    assert rc == 0


def test_avoidance_rules_validation():
    from teleosim.controllers import ObstacleAvoidanceController
    from teleosim.fuzzy import parse_rulebase

    bad = parse_rulebase(
        "input x 0 1\nterm x a trap 0 0 1 1\n"
        "output y 0 1\nterm y b trap 0 0 1 1\n"
        "rule IF x IS a THEN y IS b\n"
    )
    with pytest.raises(ValueError, match="avoidance rulebase needs"):
        ObstacleAvoidanceController(rulebase=bad)


def test_outbound_impairment_shim():
    from teleosim.cli import OutboundImpairment
    from teleosim.clock import Scheduler
    from teleosim.netsim import constant_profile
    from teleosim.wire import ChannelClass

    sent = []

    class Sink:
        def send(self, channel, payload):
            sent.append((channel, payload))

    scheduler = Scheduler()
    shim = OutboundImpairment(Sink(), scheduler, constant_profile(100.0), interrupts=[(1000, 500)])
    shim.send(ChannelClass.TELEMETRY, b"a")
    scheduler.run_until(99.0)
    assert sent == []  # still in flight
    scheduler.run_until(150.0)
    assert sent == [(ChannelClass.TELEMETRY, b"a")]
    # datagram sent inside the blackout window never arrives
    scheduler.run_until(1100.0)
    shim.send(ChannelClass.TELEMETRY, b"b")
    # admin is only delayed, never dropped
    shim.send(ChannelClass.ADMIN_COMMAND, b"c")
    scheduler.run_until(5000.0)
    assert (ChannelClass.TELEMETRY, b"b") not in sent
    assert (ChannelClass.ADMIN_COMMAND, b"c") in sent
