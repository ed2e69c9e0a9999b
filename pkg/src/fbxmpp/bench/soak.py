"""Memory-stability soak: TC1 across separate processes with a press every
few seconds, resident memory sampled periodically and fitted linearly."""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass, field

from ..appcli.harness import BrokerProcess, DeviceProcess

try:
    import psutil
except ImportError:  # pragma: no cover - psutil is a declared dependency
    psutil = None

PRESS_SEQUENCE = (("I_OV", {"Q_C": 1, "Q_D": 0}),
                  ("I_NV", {"Q_C": 0, "Q_D": 0}),
                  ("I_UV", {"Q_C": 0, "Q_D": 1}))
NETS = {"xmpp": "tc1", "udp": "tc1_udp"}


@dataclass
class Trend:
    """RSS samples (seconds since start, kB) of one process."""

    name: str
    samples: list[tuple[float, int]] = field(default_factory=list)
    warmup_s: float = 60.0

    @property
    def window(self) -> list[tuple[float, int]]:
        return [s for s in self.samples if s[0] >= self.warmup_s]

    @property
    def slope_kb_per_min(self) -> float | None:
        window = self.window
        if len(window) < 2:
            return None
        fit = statistics.linear_regression([t for t, _ in window], [kb for _, kb in window])
        return fit.slope * 60.0

    @property
    def growth(self) -> float | None:
        """Fitted growth over the post-warmup window relative to the resident
        size at the end of the warmup."""
        window = self.window
        slope = self.slope_kb_per_min
        if slope is None:
            return None
        span_min = (window[-1][0] - window[0][0]) / 60.0
        return slope * span_min / window[0][1]


@dataclass
class SoakResult:
    transport: str
    minutes: float
    trends: dict[str, Trend] = field(default_factory=dict)
    presses: int = 0
    mismatches: int = 0
    supported: bool = True
    error: str | None = None

    @property
    def max_growth(self) -> float | None:
        growths = [t.growth for t in self.trends.values() if t.growth is not None]
        return max(growths) if growths else None


def rss_kb(pid: int) -> int:
    return psutil.Process(pid).memory_info().rss // 1024


def soak_run(minutes: float, transport: str = "xmpp", press_s: float = 2.0,
             sample_s: float = 10.0, warmup_s: float = 60.0, check_after_s: float = 1.5,
             progress=None) -> SoakResult:
    if transport not in NETS:
        raise ValueError(f"soak runs TC1 over xmpp or udp, not {transport!r}")
    result = SoakResult(transport, minutes)
    if minutes <= 0:
        return result
    if psutil is None:
        result.supported = False
        result.error = "resident-memory sampling unavailable"
        return result
    net = NETS[transport]
    broker = BrokerProcess() if transport == "xmpp" else None
    port = broker.port if broker else None
    procs: dict[str, object] = {}
    try:
        procs["cem"] = DeviceProcess(net, "cem", port)
        procs["netop"] = DeviceProcess(net, "netop", port)
        if broker:
            procs["xmppd"] = broker
        result.trends = {name: Trend(name, warmup_s=warmup_s) for name in procs}
        start = time.monotonic()
        end = start + minutes * 60.0
        next_sample = start
        next_press = start + press_s
        step = 0
        pending_check = None
        while True:
            now = time.monotonic()
            if now >= next_sample:
                for name, proc in procs.items():
                    result.trends[name].samples.append((now - start, rss_kb(proc.pid)))
                if progress:
                    progress(now - start, {n: t.samples[-1][1] for n, t in result.trends.items()})
                next_sample += sample_s
            if now >= end:
                break
            if pending_check and now >= pending_check[0]:
                leds = procs["cem"].leds()
                if any(leds.get(k) != v for k, v in pending_check[1].items()):
                    result.mismatches += 1
                pending_check = None
            if now >= next_press:
                name, expected = PRESS_SEQUENCE[step % len(PRESS_SEQUENCE)]
                procs["netop"].press(name)
                result.presses += 1
                step += 1
                pending_check = (now + check_after_s, expected)
                next_press += press_s
            wake = min(next_sample, next_press, end, pending_check[0] if pending_check else end)
            time.sleep(max(0.0, min(0.5, wake - time.monotonic())))
    except Exception as exc:
        result.error = str(exc)
    finally:
        for name in ("netop", "cem"):
            if name in procs:
                procs[name].quit()
        if broker:
            broker.stop()
    return result
