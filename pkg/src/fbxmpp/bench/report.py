"""Plain-text benchmark reports: one ``metric transport pattern value`` line
per measurement, a ratio table and the reference figures measured on the
original LAN testbed."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

UNSUPPORTED = "unsupported (v1)"

# (metric, transport, pattern) -> value, as measured on the original testbed
REFERENCE = {
    ("payload_bytes", "xmpp-tls", "async"): 346,
    ("payload_bytes", "xmpp", "async"): 741,
    ("payload_bytes", "udp", "async"): 45,
    ("payload_bytes", "xmpp-tls", "sync"): 378,
    ("payload_bytes", "xmpp", "sync"): 535,
    ("payload_bytes", "tcp", "sync"): 202,
    ("latency_ms", "xmpp-tls", "async"): 25,
    ("latency_ms", "xmpp", "async"): 21,
    ("latency_ms", "udp", "async"): 3,
}

RATIOS = (
    ("payload_bytes", "async", "xmpp", "udp"),
    ("payload_bytes", "sync", "xmpp", "tcp"),
    ("latency_ms", "async", "xmpp", "udp"),
    ("latency_ms", "sync", "xmpp", "tcp"),
)

NOTES = (
    "payload_bytes sums the application bytes of every message needed for one value;"
    " xmpp counts both hops through the broker.",
    "sync exchanges are request plus response; the framing has no separate acknowledgement.",
    "absolute bytes depend on stanza and framing details, compare ratios and orderings.",
    "xmpp-tls is not implemented, so no encrypted or compressed figures can be produced.",
    "latency_ms is send-to-delivery (async) or request-to-confirmation (sync) inside the"
    " runtimes on one host; the reference figures are LED-to-LED on a LAN.",
)


@dataclass
class MetricSample:
    kind: str
    transport: str
    pattern: str
    value: float | str
    timestamp: float = field(default_factory=lambda: time.monotonic() * 1000.0)

    def __post_init__(self):
        if isinstance(self.value, (int, float)) and self.value < 0:
            raise ValueError(f"{self.kind} cannot be negative")

    def line(self) -> str:
        value = self.value
        if isinstance(value, float):
            value = f"{value:.3f}".rstrip("0").rstrip(".")
        return f"{self.kind} {self.transport} {self.pattern} {value}"


def _lookup(samples, kind, transport, pattern):
    for s in samples:
        if (s.kind, s.transport, s.pattern) == (kind, transport, pattern) and not isinstance(s.value, str):
            return s.value
    return None


def _ratio_kind(metric):
    return "latency_ms_median" if metric == "latency_ms" else metric


def ratio_table(samples: list[MetricSample]) -> list[str]:
    rows = [f"{'ratio':<34}{'measured':>12}{'reference':>12}"]
    for metric, pattern, num, den in RATIOS:
        a = _lookup(samples, _ratio_kind(metric), num, pattern)
        b = _lookup(samples, _ratio_kind(metric), den, pattern)
        measured = f"{a / b:.2f}" if a is not None and b else "-"
        ra, rb = REFERENCE.get((metric, num, pattern)), REFERENCE.get((metric, den, pattern))
        reference = f"{ra / rb:.2f}" if ra and rb else "-"
        rows.append(f"{f'{metric} {num}/{den} ({pattern})':<34}{measured:>12}{reference:>12}")
    return rows


def unsupported_rows(samples: list[MetricSample]) -> list[MetricSample]:
    """Encrypted-xmpp placeholders for every metric/pattern that was measured."""
    seen = []
    for s in samples:
        if s.transport == "xmpp" and (s.kind, s.pattern) not in seen:
            seen.append((s.kind, s.pattern))
    return [MetricSample(kind, "xmpp-tls", pattern, UNSUPPORTED) for kind, pattern in seen]


def render(samples: list[MetricSample], extra_notes=()) -> str:
    samples = list(samples) + unsupported_rows(samples)
    out = ["# metric transport pattern value"]
    out += [s.line() for s in samples]
    out += ["", "# ratios"]
    out += ratio_table(samples)
    out += ["", "# reference figures (original testbed)"]
    out += [f"{k[0]} {k[1]} {k[2]} {v}" for k, v in REFERENCE.items()]
    out += ["", "# notes"]
    out += [f"- {n}" for n in (*NOTES, *extra_notes)]
    return "\n".join(out) + "\n"


def write_report(path, samples: list[MetricSample], extra_notes=()) -> str:
    text = render(samples, extra_notes)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return text
