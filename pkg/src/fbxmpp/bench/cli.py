"""``fbbench payload|latency|soak``."""

from __future__ import annotations

import argparse
import sys

from .measure import measure_latency, measure_payload, spot_check_accounting
from .report import MetricSample, write_report
from .rig import RigError, check_combination
from .soak import soak_run

DEFAULT_PAIRS = (("udp", "async"), ("xmpp", "async"), ("tcp", "sync"), ("xmpp", "sync"))


def _pairs(transport, pattern):
    pairs = [(t, p) for t, p in DEFAULT_PAIRS
             if transport in (None, t) and pattern in (None, p)]
    if transport and pattern and (transport, pattern) not in pairs:
        check_combination(transport, pattern)
    return pairs


def _payload(args, samples, notes):
    for t, p in _pairs(args.transport, args.pattern):
        r = measure_payload(t, p)
        samples.append(MetricSample("payload_bytes", t, p, r.bytes_per_value))
        samples.append(MetricSample("payload_bytes_with_headers", t, p, r.with_headers))
        samples.append(MetricSample("messages_per_value", t, p, r.messages_per_value))
    for t in ("xmpp", "tcp"):
        check = spot_check_accounting(t)
        notes.append(f"byte accounting spot check over {t}: accounted {check.accounted},"
                     f" raw socket {check.raw}, {'match' if check.ok else 'MISMATCH'}")


def _latency(args, samples, notes):
    for t, p in _pairs(args.transport, args.pattern):
        r = measure_latency(t, p, args.n)
        if r.error:
            notes.append(f"latency {t} {p}: {r.error}")
        for name in ("min", "median", "p95"):
            value = getattr(r, name)
            if value is not None:
                samples.append(MetricSample(f"latency_ms_{name}", t, p, value))
        samples.append(MetricSample("lost_transfers", t, p, r.lost))


def _soak(args, samples, notes):
    transport = args.transport or "xmpp"
    if transport not in ("xmpp", "udp"):
        raise RigError("soak runs the publish/subscribe application over xmpp or udp")
    r = soak_run(args.minutes, transport)
    if not r.supported:
        samples.append(MetricSample("mem_growth_fraction", transport, "async", "unsupported"))
    if r.error:
        notes.append(f"soak: {r.error}")
    for name, trend in r.trends.items():
        if trend.slope_kb_per_min is not None:
            samples.append(MetricSample(f"mem_slope_kb_per_min_{name}", transport, "async",
                                        abs(trend.slope_kb_per_min)))
            samples.append(MetricSample(f"mem_growth_fraction_{name}", transport, "async",
                                        max(trend.growth, 0.0)))
            if trend.slope_kb_per_min < 0:
                notes.append(f"{name}: resident memory shrank over the window")
    samples.append(MetricSample("presses", transport, "async", r.presses))
    samples.append(MetricSample("functional_mismatches", transport, "async", r.mismatches))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fbbench", description=__doc__)
    parser.add_argument("command", choices=("payload", "latency", "soak"))
    parser.add_argument("--transport", choices=("xmpp", "udp", "tcp"))
    parser.add_argument("--pattern", choices=("async", "sync"))
    parser.add_argument("--n", type=int, default=100, help="latency repetitions")
    parser.add_argument("--minutes", type=float, default=10.0, help="soak duration")
    parser.add_argument("--out", required=True, help="report file")
    args = parser.parse_args(argv)
    samples: list[MetricSample] = []
    notes: list[str] = []
    try:
        {"payload": _payload, "latency": _latency, "soak": _soak}[args.command](args, samples, notes)
    except RigError as exc:
        print(f"fbbench: {exc}", file=sys.stderr)
        return 1
    text = write_report(args.out, samples, notes)
    sys.stdout.write(text)
    return 0
