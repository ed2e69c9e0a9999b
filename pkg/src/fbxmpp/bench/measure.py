"""Payload size and latency measurements, plus a raw-socket check of the
byte accounting they rely on."""

from __future__ import annotations

import socket
import statistics
import threading
import time
from dataclasses import dataclass, field

from .. import metrics
from ..commstack.stack import build_stack
from ..fbcore.values import Kind, Value
from ..xmppmini.broker import Broker
from .rig import BENCH_ACCOUNTS, Rig, RigError, check_combination, free_port

WARMUP = 10
LOSS_FLAG = 0.01
# Ethernet + IPv4 + UDP/TCP headers, for comparing with sniffer-measured sizes
HEADER_BYTES = {"udp": 14 + 20 + 8, "tcp": 14 + 20 + 20, "xmpp": 14 + 20 + 20}


@dataclass
class PayloadResult:
    transport: str
    pattern: str
    bytes_per_value: float
    messages_per_value: float
    transfers: int

    @property
    def with_headers(self) -> float:
        return self.bytes_per_value + self.messages_per_value * HEADER_BYTES[self.transport]


@dataclass
class LatencyResult:
    transport: str
    pattern: str
    samples_ms: list[float] = field(default_factory=list)
    lost: int = 0
    requested: int = 0
    error: str | None = None

    @property
    def min(self) -> float | None:
        return min(self.samples_ms) if self.samples_ms else None

    @property
    def median(self) -> float | None:
        return statistics.median(self.samples_ms) if self.samples_ms else None

    @property
    def p95(self) -> float | None:
        if not self.samples_ms:
            return None
        if len(self.samples_ms) == 1:
            return self.samples_ms[0]
        return statistics.quantiles(self.samples_ms, n=20, method="inclusive")[18]

    @property
    def loss_flagged(self) -> bool:
        return self.requested > 0 and self.lost / self.requested > LOSS_FLAG


def _sent_bytes(transport: str) -> tuple[int, int]:
    wire = "xmpp" if transport == "xmpp" else transport
    snap = metrics.observer.snapshot()
    msgs = sum(m for (t, d, _), (m, _) in snap.items() if t == wire and d == "sent")
    nbytes = sum(b for (t, d, _), (_, b) in snap.items() if t == wire and d == "sent")
    return msgs, nbytes


def measure_payload(transport: str, pattern: str, values=None, transfers: int = 5) -> PayloadResult:
    """Application bytes of every message needed to move one value.

    Every hop's sender-side bytes are summed, so an xmpp publish counts the
    publisher-to-broker and the broker-to-subscriber stanza; a sync exchange
    counts request and response (there is no separate acknowledgement).
    """
    check_combination(transport, pattern)
    value = values[0] if values else Value(Kind.BOOL, True)
    with Rig(transport, pattern, value.kind) as rig:
        for _ in range(3):
            rig.transfer(value)
        time.sleep(0.05)
        metrics.observer.reset()
        done = 0
        for _ in range(transfers):
            if rig.transfer(value) is not None:
                done += 1
        time.sleep(0.05)
        msgs, nbytes = _sent_bytes(transport)
    if done == 0:
        raise RigError(f"no {transport} {pattern} transfer completed")
    return PayloadResult(transport, pattern, nbytes / done, msgs / done, done)


def measure_latency(transport: str, pattern: str, n: int, warmup: int = WARMUP,
                    timeout: float = 1.0) -> LatencyResult:
    """Send-to-delivery time (async) or request-to-confirmation time (sync)
    for ``n`` transfers after ``warmup`` unmeasured ones."""
    check_combination(transport, pattern)
    result = LatencyResult(transport, pattern, requested=n)
    if n <= 0:
        result.error = "no transfers requested"
        return result
    with Rig(transport, pattern) as rig:
        for i in range(warmup):
            rig.transfer(Value(Kind.DINT, -1 - i), timeout)
        for i in range(n):
            elapsed = rig.transfer(Value(Kind.DINT, i), timeout)
            if elapsed is None:
                result.lost += 1
            else:
                result.samples_ms.append(elapsed * 1000.0)
    if not result.samples_ms:
        result.error = "every transfer was lost"
    elif result.loss_flagged:
        result.error = f"{result.lost} of {n} transfers lost"
    return result


# -- accounting spot check ---------------------------------------------------


class CountingProxy:
    """TCP relay to ``target`` that counts raw bytes in each direction."""

    def __init__(self, target: tuple[str, int]):
        self.target = target
        self.upstream = 0  # client -> server
        self.downstream = 0
        self._lock = threading.Lock()
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self.sock.bind(("127.0.0.1", 0))
        self.sock.listen(8)
        self.port = self.sock.getsockname()[1]
        self._conns: list[socket.socket] = []
        threading.Thread(target=self._accept, daemon=True).start()

    def _accept(self):
        while True:
            try:
                client, _ = self.sock.accept()
            except OSError:
                return
            server = socket.create_connection(self.target)
            self._conns += [client, server]
            threading.Thread(target=self._pipe, args=(client, server, "upstream"), daemon=True).start()
            threading.Thread(target=self._pipe, args=(server, client, "downstream"), daemon=True).start()

    def _pipe(self, src, dst, attr):
        while True:
            try:
                data = src.recv(65536)
            except OSError:
                return
            if not data:
                try:
                    dst.shutdown(socket.SHUT_WR)
                except OSError:
                    pass
                return
            with self._lock:
                setattr(self, attr, getattr(self, attr) + len(data))
            try:
                dst.sendall(data)
            except OSError:
                return

    def counts(self) -> tuple[int, int]:
        with self._lock:
            return self.upstream, self.downstream

    def close(self):
        self.sock.close()
        for conn in self._conns:
            try:
                conn.close()
            except OSError:
                pass


@dataclass
class SpotCheck:
    transport: str
    accounted: tuple[int, int]
    raw: tuple[int, int]

    @property
    def ok(self) -> bool:
        return self.accounted == self.raw


def _settle(probe, timeout=2.0):
    last, deadline = None, time.monotonic() + timeout
    while time.monotonic() < deadline:
        now = probe()
        if now == last:
            return now
        last = now
        time.sleep(0.1)
    return last


def spot_check_accounting(transport: str = "xmpp", transfers: int = 20) -> SpotCheck:
    """Run transfers through a counting relay and compare the relay's raw
    byte counts with what the relayed client accounted (sent, received)."""
    values = [Value(Kind.BOOL, True), Value(Kind.INT, 7)]
    counter = metrics.ByteCounter()
    if transport == "xmpp":
        broker = Broker(BENCH_ACCOUNTS, port=0).start()
        proxy = CountingProxy(("127.0.0.1", broker.port))
        pub = build_stack(f"fbdk[].xmpp[0:benchpub@localhost/p:pub:127.0.0.1:{proxy.port}]",
                          "publish", observer=counter)
        sub = build_stack(f"fbdk[].xmpp[0:benchsub@localhost/s:sub:127.0.0.1:"
                          f"benchpub@localhost/p:{broker.port}]", "subscribe")
        got = threading.Semaphore(0)
        sub.on_receive = lambda v: got.release()
        closers = [pub.close, sub.close, proxy.close, broker.close]
        send = pub.send
    elif transport == "tcp":
        port = free_port()
        server = build_stack(f"fbdk[].ip[127.0.0.1:{port}]", "server")
        server.serve(lambda v: v)
        proxy = CountingProxy(("127.0.0.1", port))
        client = build_stack(f"fbdk[].ip[127.0.0.1:{proxy.port}]", "client", observer=counter)
        got = threading.Semaphore(transfers)
        closers = [client.close, server.close, proxy.close]
        send = lambda v: client.request(v, 1000)
    else:
        raise RigError(f"no spot check for {transport!r}")
    try:
        time.sleep(0.2)
        for _ in range(transfers):
            send(values)
            got.acquire(timeout=2)
        raw = _settle(proxy.counts)
        accounted = (counter.total(transport, "sent"), counter.total(transport, "received"))
    finally:
        for close in closers:
            close()
    return SpotCheck(transport, accounted, raw)
