"""The ten acceptance criteria, each at its stated tolerance.  Every test
prints one ``criterion N PASS|FAIL`` line."""

import base64
import binascii
import contextlib
import itertools
import random
import time

import pytest
from apps import InProcessApp, tc1_expected, tc1_netop_expected
from broker_fuzz import run_fuzz
from conftest import ACCEPTANCE_LINES, ACCOUNTS
from hypothesis import given, settings
from hypothesis import strategies as st
from test_fbcore import RS_TABLE

from fbxmpp.appcli.harness import BrokerProcess, DeviceProcess
from fbxmpp.bench.measure import measure_latency, measure_payload
from fbxmpp.bench.soak import soak_run
from fbxmpp.commstack.ber import ber_decode, ber_encode
from fbxmpp.commstack.idgrammar import parse_comm_id
from fbxmpp.commstack.textbridge import b64_decode, b64_encode
from fbxmpp.fbcore import rs_behavior
from fbxmpp.fbcore.values import Kind, Value
from fbxmpp.xmppmini.broker import Broker

TC1_SEQUENCE = [("I_OV", {"Q_C": 1, "Q_D": 0}),
                ("I_NV", {"Q_C": 0, "Q_D": 0}),
                ("I_UV", {"Q_C": 0, "Q_D": 1})]


@contextlib.contextmanager
def criterion(n, title):
    details = []
    try:
        yield details
    except BaseException as exc:
        line = f"criterion {n} FAIL {title}: {exc}".splitlines()[0]
        ACCEPTANCE_LINES.append(line)
        print(line)
        raise
    line = f"criterion {n} PASS {title}" + (f" ({'; '.join(details)})" if details else "")
    ACCEPTANCE_LINES.append(line)
    print(line)


def test_criterion_01_tc1_over_xmpp():
    with criterion(1, "TC1 over XMPP, cold three-process start, each press within 2 s") as out:
        start = time.monotonic()
        with BrokerProcess() as broker, \
                DeviceProcess("tc1", "cem", broker.port) as cem, \
                DeviceProcess("tc1", "netop", broker.port) as netop:
            assert cem.leds() == {"Q_C": 0, "Q_D": 0}
            for name, expected in TC1_SEQUENCE:
                netop.press(name)
                elapsed, leds = cem.wait_leds(expected, timeout=2.0)
                assert leds == expected
                out.append(f"{name} {elapsed * 1000:.0f} ms")
                time.sleep(0.6)   # let the press be released before the next one
        total = time.monotonic() - start
        assert total < 60, f"took {total:.1f} s"


def test_criterion_02_tc2_over_xmpp():
    with criterion(2, "TC2 over XMPP polling, 8 toggles each within 1.5 s") as out:
        start = time.monotonic()
        worst = 0.0
        with BrokerProcess() as broker, \
                DeviceProcess("tc2", "cem", broker.port) as cem, \
                DeviceProcess("tc2", "display", broker.port) as display:
            assert display.leds() == {"Q_LOD": 0}
            for k in range(1, 9):
                pressed = time.monotonic()
                cem.press("I_LO")
                display.wait_leds({"Q_LOD": k % 2}, timeout=1.5)
                elapsed = time.monotonic() - pressed
                assert elapsed <= 1.5, f"press {k}: {elapsed:.3f} s"
                assert cem.leds() == {"Q_LO": k % 2}
                worst = max(worst, elapsed)
                time.sleep(0.6)
        out.append(f"worst {worst * 1000:.0f} ms")
        total = time.monotonic() - start
        assert total < 60, f"took {total:.1f} s"


def _tc1_transcript(net, xmpp_port=None):
    presses = ["I_OV", "I_NV", "I_UV", "I_UV", "I_OV", "I_UV", "I_NV"]
    lines = []
    with DeviceProcess(net, "cem", xmpp_port) as cem, DeviceProcess(net, "netop", xmpp_port) as netop:
        lines.append(netop.command("leds") + " | " + cem.command("leds"))
        for name in presses:
            netop.press(name)
            time.sleep(1.5)
            lines.append(netop.command("leds") + " | " + cem.command("leds"))
    return "\n".join(lines) + "\n"


def _tc2_transcript(net, xmpp_port=None):
    lines = []
    with DeviceProcess(net, "cem", xmpp_port) as cem, DeviceProcess(net, "display", xmpp_port) as display:
        lines.append(cem.command("leds") + " | " + display.command("leds"))
        for _ in range(8):
            cem.press("I_LO")
            time.sleep(2.0)
            lines.append(cem.command("leds") + " | " + display.command("leds"))
    return "\n".join(lines) + "\n"


def test_criterion_03_transport_equivalence():
    with criterion(3, "identical leds transcripts, TC1 udp vs xmpp and TC2 tcp vs xmpp") as out:
        with BrokerProcess() as broker:
            tc1_xmpp = _tc1_transcript("tc1", broker.port)
            tc2_xmpp = _tc2_transcript("tc2", broker.port)
        tc1_udp = _tc1_transcript("tc1_udp")
        tc2_tcp = _tc2_transcript("tc2_tcp")
        assert tc1_udp == tc1_xmpp, f"TC1 transcripts differ:\n{tc1_udp}\n{tc1_xmpp}"
        assert tc2_tcp == tc2_xmpp, f"TC2 transcripts differ:\n{tc2_tcp}\n{tc2_xmpp}"
        # the shared transcript must also be the correct one
        assert tc1_udp.splitlines()[-1] == "Q_OV=0 Q_NV=1 Q_UV=0 | Q_C=0 Q_D=0"
        assert tc2_tcp.splitlines()[-1] == "Q_LO=0 | Q_LOD=0"
        out.append(f"{len(tc1_udp.splitlines())} + {len(tc2_tcp.splitlines())} lines")


values = st.one_of(
    st.booleans().map(lambda b: Value(Kind.BOOL, b)),
    st.integers(-128, 127).map(lambda i: Value(Kind.SINT, i)),
    st.integers(-32768, 32767).map(lambda i: Value(Kind.INT, i)),
    st.integers(-2**31, 2**31 - 1).map(lambda i: Value(Kind.DINT, i)),
    st.text(max_size=40).map(lambda s: Value(Kind.STRING, s)))

RFC4648 = [(b"", ""), (b"f", "Zg=="), (b"fo", "Zm8="), (b"foo", "Zm9v"),
           (b"foob", "Zm9vYg=="), (b"fooba", "Zm9vYmE="), (b"foobar", "Zm9vYmFy")]


def test_criterion_04_codecs():
    with criterion(4, "10,000 BER roundtrips, 1,000 Base64 roundtrips, RFC 4648 vectors") as out:
        counts = {"ber": 0, "b64": 0}

        @settings(max_examples=10_000, database=None, deadline=None)
        @given(st.lists(values, max_size=12))
        def ber_roundtrip(vals):
            counts["ber"] += 1
            assert ber_decode(ber_encode(vals)) == vals

        @settings(max_examples=1_000, database=None, deadline=None)
        @given(st.binary(max_size=300))
        def b64_roundtrip(frame):
            counts["b64"] += 1
            text = b64_encode(frame)
            assert text == base64.b64encode(frame).decode("ascii")
            assert b64_decode(text) == frame

        ber_roundtrip()
        b64_roundtrip()
        for raw, text in RFC4648:
            assert b64_encode(raw) == text and b64_decode(text) == raw
            assert binascii.a2b_base64(text) == raw
        assert counts["ber"] >= 10_000 and counts["b64"] >= 1_000, counts
        out.append(f"{counts['ber']} BER, {counts['b64']} Base64 examples")


PRINTED_IDS = [
    ("fbdk[].ip[192.168.20.1:61499]",
     [("fbdk", ()), ("ip", ("192.168.20.1", "61499"))]),
    ("fbdk[].xmpp[encryption:publisher full JID:password:XMPP server IP address]",
     [("fbdk", ()), ("xmpp", ("encryption", "publisher full JID", "password",
                              "XMPP server IP address"))]),
    ("fbdk[].xmpp[encryption:subscriber full JID:password:XMPP server IP address:publisher full JID]",
     [("fbdk", ()), ("xmpp", ("encryption", "subscriber full JID", "password",
                              "XMPP server IP address", "publisher full JID"))]),
    ("fbdk[].xmpp[1:cemdsm@localhost/res:***: 192.168.1.210:netop@localhost/res]",
     [("fbdk", ()), ("xmpp", ("1", "cemdsm@localhost/res", "***", " 192.168.1.210",
                              "netop@localhost/res"))]),
]


def test_criterion_05_printed_ids():
    with criterion(5, "printed ID strings parse and reserialize exactly") as out:
        for text, layers in PRINTED_IDS:
            cid = parse_comm_id(text)
            assert [(layer.name, layer.params) for layer in cid.layers] == layers, text
            assert str(cid) == text
        out.append(f"{len(PRINTED_IDS)} strings")


def test_criterion_06_payload_ratios():
    with criterion(6, "payload xmpp/udp async >= 5, xmpp/tcp sync >= 2, udp <= 100 B") as out:
        bool_value = [Value(Kind.BOOL, True)]
        udp = measure_payload("udp", "async", bool_value).bytes_per_value
        xa = measure_payload("xmpp", "async", bool_value).bytes_per_value
        tcp = measure_payload("tcp", "sync", bool_value).bytes_per_value
        xs = measure_payload("xmpp", "sync", bool_value).bytes_per_value
        out.append(f"udp {udp:g}, xmpp async {xa:g}, tcp {tcp:g}, xmpp sync {xs:g} bytes")
        assert udp <= 100
        assert xa / udp >= 5, xa / udp
        assert xs / tcp >= 2, xs / tcp
        assert xa > udp > 0 and xs > tcp > 0


def test_criterion_07_latency_ordering():
    with criterion(7, "latency n=100: udp median < 5 ms, xmpp median < 100 ms, xmpp > udp") as out:
        udp = measure_latency("udp", "async", 100)
        xmpp = measure_latency("xmpp", "async", 100)
        assert udp.error is None and xmpp.error is None, (udp.error, xmpp.error)
        out.append(f"udp {udp.median:.3f} ms, xmpp {xmpp.median:.3f} ms")
        assert udp.median < 5
        assert xmpp.median < 100
        assert xmpp.median > udp.median


def test_criterion_08_soak():
    with criterion(8, "10-minute TC1 XMPP soak, resident-memory growth < 10%") as out:
        result = soak_run(10, "xmpp", press_s=2.0)
        assert result.error is None, result.error
        assert result.supported
        growths = {name: t.growth for name, t in result.trends.items()}
        out.append(", ".join(f"{n} {g * 100:+.2f}%" for n, g in growths.items())
                   + f", {result.presses} presses, {result.mismatches} mismatches")
        assert all(g is not None for g in growths.values()), growths
        assert result.max_growth < 0.10, growths
        assert result.presses >= 290
        assert result.mismatches == 0


def test_criterion_09_broker_fuzz():
    with criterion(9, "broker fuzz, 3 clients, >= 1,000 stanzas") as out:
        with Broker(ACCOUNTS, port=0) as broker:
            report = run_fuzz(broker, stanzas=1200, seed=61499)
        out.append(f"{report['stanzas']} stanzas {report['counts']}")
        assert report["stanzas"] >= 1000
        assert report["violations"] == [], report["violations"][:5]


def test_criterion_10_logic_oracles():
    with criterion(10, "RS table, TC1 sequences up to length 4, TC2 parity 0..8, in-process") as out:
        start = time.monotonic()
        for (s, r, q), nxt in RS_TABLE.items():
            assert int(rs_behavior(bool(s), bool(r), bool(q))[0]) == nxt
        sequences = [seq for k in range(1, 5)
                     for seq in itertools.product(("I_OV", "I_NV", "I_UV"), repeat=k)]
        for seq in sequences:
            with InProcessApp("tc1") as app:
                for k, name in enumerate(seq, 1):
                    app.press("netop", name)
                    app.advance(1000)
                    assert app.leds("cem") == tc1_expected(seq[:k]), seq[:k]
                    assert app.leds("netop") == tc1_netop_expected(seq[:k]), seq[:k]
        with InProcessApp("tc2") as app:
            assert app.leds("display") == {"Q_LOD": 0}
            for k in range(1, 9):
                app.press("cem", "I_LO")
                app.advance(1500)
                assert app.leds("cem") == {"Q_LO": k % 2}
                assert app.leds("display") == {"Q_LOD": k % 2}
        elapsed = time.monotonic() - start
        out.append(f"{len(sequences)} sequences in {elapsed:.2f} s")
        assert elapsed < 10
