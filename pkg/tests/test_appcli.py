import io
import subprocess
import sys

import pytest
from conftest import free_port

from fbxmpp.appcli import cli
from fbxmpp.appcli.harness import BrokerProcess, DeviceProcess, ProcessError
from fbxmpp.appcli.netdef import parse_netdef
from fbxmpp.appcli.runner import InitError, repl_execute, run_device, start_device

LOCAL = """
[devices]
d = 127.0.0.1
[fbs]
T  = E_CYCLE @d DT=20
I  = IX @d
RS = RS @d
Q  = QX @d
[events]
T.EO = I.REQ
I.IND = RS.S
RS.EO = Q.REQ
[data]
I.OUT = RS.SET
RS.Q = Q.IN
"""


def test_repl_commands():
    rt = start_device(parse_netdef(LOCAL), "d")
    try:
        assert repl_execute(rt, "leds") == "Q=0"
        assert repl_execute(rt, "press I") == "ok press I"
        assert repl_execute(rt, "sleep 200") == "ok sleep 200"
        assert repl_execute(rt, "leds") == "Q=1"
        assert repl_execute(rt, "status") == "none"
        assert repl_execute(rt, "stats").startswith("dropped=0 decode_errors=0 unmatched_rsp=0")
        assert repl_execute(rt, "press NOPE").startswith("error: unknown input")
        assert repl_execute(rt, "press").startswith("error: usage")
        assert repl_execute(rt, "sleep -3").startswith("error: usage")
        assert repl_execute(rt, "fly").startswith("error: unknown command")
        assert repl_execute(rt, "press 'I").startswith("error:")
        assert repl_execute(rt, "quit") is None
    finally:
        rt.shutdown()


def test_run_device_session_transcript(tmp_path):
    out = io.StringIO()
    code = run_device(parse_netdef(LOCAL), "d", stdin=io.StringIO("leds\n\n# note\nbogus\nquit\nleds\n"),
                      stdout=out)
    assert code == 0
    assert out.getvalue().splitlines() == ["ready d", "Q=0", "error: unknown command 'bogus'", "bye"]
    script = tmp_path / "s.txt"
    script.write_text("press I\nsleep 150\nleds\n")
    out = io.StringIO()
    assert run_device(parse_netdef(LOCAL), "d", script=script, stdout=out) == 0
    assert out.getvalue().splitlines() == ["ready d", "ok press I", "ok sleep 150", "Q=1", "bye"]


def test_init_failure_exit_code():
    net = LOCAL.replace("[events]", f'P = PUBLISH_1 @d QI=1 ID="fbdk[].xmpp[0:netop@localhost/fb:netop:127.0.0.1:{free_port()}]"\n[events]')
    doc = parse_netdef(net)
    with pytest.raises(InitError) as info:
        start_device(doc, "d")
    assert info.value.failures == [("P", "CONNECT_FAILED")]
    err = io.StringIO()
    assert run_device(doc, "d", stdin=io.StringIO(""), stdout=io.StringIO(), stderr=err) == 2
    assert err.getvalue() == "init-error P CONNECT_FAILED\n"
    out = io.StringIO()
    assert run_device(doc, "d", True, stdin=io.StringIO("status\n"), stdout=out) == 0
    assert "P=CONNECT_FAILED" in out.getvalue()


def test_fbrun_argument_errors(capsys):
    assert cli.main([]) == 1
    assert cli.fbrun_main(["--net", "no-such.net", "--device", "d"]) == 1
    assert cli.fbrun_main(["--net", "tc1", "--device", "toaster"]) == 1
    assert "fbrun:" in capsys.readouterr().err


def test_bundled_lookup():
    assert cli.bundled("tc1").name == "tc1.net"
    assert cli._net_path("tc2_tcp") == cli.bundled("tc2_tcp")


def test_fbrun_process_reports_connect_failed_without_broker():
    proc = subprocess.run(
        [sys.executable, "-m", "fbxmpp.appcli", "fbrun", "--net", "tc1", "--device", "netop",
         "--xmpp-port", str(free_port())],
        capture_output=True, text=True, timeout=60)
    assert proc.returncode == 2
    assert "init-error PUB CONNECT_FAILED" in proc.stderr


def test_xmppd_and_fbrun_processes():
    with BrokerProcess() as broker:
        assert broker.port > 0
        with DeviceProcess("tc1", "cem", broker.port) as cem, \
                DeviceProcess("tc1", "netop", broker.port) as netop:
            assert netop.command("status") == "PUB=INITIALIZED"
            netop.press("I_OV")
            elapsed, leds = cem.wait_leds({"Q_C": 1, "Q_D": 0}, timeout=3)
            assert leds == {"Q_C": 1, "Q_D": 0}
            assert netop.command("stats").split()[0] == "dropped=0"


def test_xmppd_port_in_use():
    with BrokerProcess() as broker:
        proc = subprocess.run([sys.executable, "-m", "fbxmpp.appcli", "xmppd", "--port", str(broker.port)],
                              capture_output=True, text=True, timeout=30)
    assert proc.returncode == 1 and "xmppd:" in proc.stderr


def test_device_process_surfaces_init_errors():
    with pytest.raises(ProcessError, match="CONNECT_FAILED"):
        DeviceProcess("tc2", "display", free_port())
