"""FB networks and the per-resource event scheduler."""

from __future__ import annotations

import heapq
import itertools
import logging
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable

from .blocks import IX, QX, FBInstance, FBTypeDecl, TypeDeclError, resolve_type
from .values import Kind, KindError, Value, parse_literal

log = logging.getLogger(__name__)

QUEUE_LIMIT = 1024


class NetworkError(ValueError):
    """An FB network violates one of its structural invariants."""


@dataclass(frozen=True)
class Device:
    name: str
    host: str = "127.0.0.1"
    role: str = ""


@dataclass(frozen=True)
class FBSpec:
    name: str
    type: str
    device: str
    params: dict[str, str | Value] = field(default_factory=dict, hash=False)


@dataclass(frozen=True)
class Connection:
    source: str  # "FB.PIN"
    sink: str

    def split(self) -> tuple[tuple[str, str], tuple[str, str]]:
        return _split_ref(self.source), _split_ref(self.sink)


def _split_ref(ref: str) -> tuple[str, str]:
    fb, sep, pin = ref.partition(".")
    if not sep or not fb or not pin:
        raise NetworkError(f"bad pin reference {ref!r}, expected FB.PIN")
    return fb, pin


@dataclass
class FBNetwork:
    devices: list[Device] = field(default_factory=list)
    fbs: list[FBSpec] = field(default_factory=list)
    event_connections: list[Connection] = field(default_factory=list)
    data_connections: list[Connection] = field(default_factory=list)

    def device(self, name: str) -> Device:
        for dev in self.devices:
            if dev.name == name:
                return dev
        raise NetworkError(f"unknown device {name!r}")

    def types(self) -> dict[str, FBTypeDecl]:
        out = {}
        for spec in self.fbs:
            try:
                out[spec.name] = resolve_type(spec.type)
            except TypeDeclError as exc:
                raise NetworkError(f"FB {spec.name}: {exc}") from None
        return out

    def validate(self) -> None:
        """Raise NetworkError naming the first offending element."""
        names = set()
        device_names = {d.name for d in self.devices}
        if len(device_names) != len(self.devices):
            raise NetworkError("duplicate device name")
        for spec in self.fbs:
            if spec.name in names:
                raise NetworkError(f"duplicate FB name {spec.name!r}")
            names.add(spec.name)
            if spec.device not in device_names:
                raise NetworkError(f"FB {spec.name}: unknown device {spec.device!r}")
        types = self.types()
        owner = {spec.name: spec.device for spec in self.fbs}

        def endpoint(ref, direction, what, conn):
            fb, pin = _split_ref(ref)
            if fb not in types:
                raise NetworkError(f"{conn}: no FB named {fb!r}")
            decl = types[fb]
            if what == "event":
                pins = decl.event_outputs if direction == "out" else decl.event_inputs
                if pin not in pins:
                    raise NetworkError(f"{conn}: {fb} has no event {direction}put {pin!r}")
                return fb, None
            kinds = dict(decl.data_outputs if direction == "out" else decl.data_inputs)
            if pin not in kinds:
                raise NetworkError(f"{conn}: {fb} has no data {direction}put {pin!r}")
            return fb, kinds[pin]

        for conn in self.event_connections:
            label = f"event {conn.source} -> {conn.sink}"
            src, _ = endpoint(conn.source, "out", "event", label)
            dst, _ = endpoint(conn.sink, "in", "event", label)
            if owner[src] != owner[dst]:
                raise NetworkError(f"{label}: crosses devices {owner[src]} -> {owner[dst]}")
        fed = set()
        for conn in self.data_connections:
            label = f"data {conn.source} -> {conn.sink}"
            src, skind = endpoint(conn.source, "out", "data", label)
            dst, dkind = endpoint(conn.sink, "in", "data", label)
            if skind is not dkind:
                raise NetworkError(f"{label}: kind mismatch {skind.value} -> {dkind.value}")
            if owner[src] != owner[dst]:
                raise NetworkError(f"{label}: crosses devices {owner[src]} -> {owner[dst]}")
            if conn.sink in fed:
                raise NetworkError(f"{label}: {conn.sink} already has an incoming connection")
            fed.add(conn.sink)
        for spec in self.fbs:
            decl = types[spec.name]
            for pin, raw in spec.params.items():
                kind = decl.input_kind(pin)
                if kind is None:
                    raise NetworkError(f"FB {spec.name}: parameter for unknown data input {pin!r}")
                try:
                    _coerce(kind, raw)
                except KindError as exc:
                    raise NetworkError(f"FB {spec.name}.{pin}: {exc}") from None

    def slice(self, device: str) -> "FBNetwork":
        """The FBs of one device and the connections between them."""
        self.device(device)
        keep = {spec.name for spec in self.fbs if spec.device == device}

        def inside(conn):
            return conn.source.partition(".")[0] in keep and conn.sink.partition(".")[0] in keep

        return FBNetwork(
            devices=[d for d in self.devices if d.name == device],
            fbs=[spec for spec in self.fbs if spec.name in keep],
            event_connections=[c for c in self.event_connections if inside(c)],
            data_connections=[c for c in self.data_connections if inside(c)],
        )


def _coerce(kind: Kind, raw: str | Value) -> Value:
    if isinstance(raw, Value):
        if raw.kind is not kind:
            raise KindError(f"expected {kind.value}, got {raw.kind.value}")
        return raw
    return parse_literal(kind, raw)


@dataclass(frozen=True)
class EventOccurrence:
    fb: str
    pin: str
    origin: str = "local"  # "local" | "external"
    payload: Any = None


@dataclass(frozen=True)
class StepReport:
    idle: bool
    fb: str | None = None
    event: str | None = None
    origin: str | None = None
    emitted: tuple[tuple[str, str], ...] = ()
    changed: tuple[tuple[str, str, Value, Value], ...] = ()


class MonotonicClock:
    def __call__(self) -> float:
        return time.monotonic() * 1000.0


class VirtualClock:
    """Manually advanced millisecond clock for deterministic tests."""

    def __init__(self, start: float = 0.0):
        self.now = start

    def __call__(self) -> float:
        return self.now


class ResourceRuntime:
    """One scheduler: a FIFO event queue, the FB instances of one device and
    their timers.  All FB behavior runs on the thread that calls :meth:`step`
    (normally the loop started by :meth:`start`); :meth:`post_event` may be
    called from anywhere."""

    def __init__(self, name: str, fbs: list[FBInstance], event_connections: list[Connection],
                 data_connections: list[Connection], clock: Callable[[], float] | None = None,
                 queue_limit: int = QUEUE_LIMIT):
        self.name = name
        self.fbs = {fb.name: fb for fb in fbs}
        self.clock = clock or MonotonicClock()
        self.queue_limit = queue_limit
        self.queue: deque[EventOccurrence] = deque()
        self.dropped = 0
        self.steps = 0
        self.observers: list[Callable[[StepReport], None]] = []
        self._cond = threading.Condition()
        self._timers: list[tuple[float, int, Callable[[], None]]] = []
        self._timer_seq = itertools.count()
        self._thread: threading.Thread | None = None
        self._stopping = False
        self._event_fanout: dict[tuple[str, str], list[tuple[str, str]]] = {}
        for conn in event_connections:
            src, dst = conn.split()
            self._event_fanout.setdefault(src, []).append(dst)
        self._data_sources: dict[str, list[tuple[str, str, str]]] = {}
        for conn in data_connections:
            (sfb, spin), (dfb, dpin) = conn.split()
            self._data_sources.setdefault(dfb, []).append((dpin, sfb, spin))
        self.led_snapshot: dict[str, bool] = {}
        for fb in fbs:
            fb.type.behavior.init_state(fb)
        self._publish_snapshot()

    # -- queue ---------------------------------------------------------

    def post_event(self, occ: EventOccurrence) -> bool:
        """Append to the FIFO.  Returns False (and counts a drop) when full."""
        fb = self.fbs.get(occ.fb)
        if fb is None:
            raise KeyError(f"no FB {occ.fb!r} in resource {self.name}")
        pins = fb.type.event_inputs if occ.origin == "local" else fb.type.event_outputs
        if occ.pin not in pins:
            raise KeyError(f"{occ.fb} has no event pin {occ.pin!r} for {occ.origin} occurrences")
        with self._cond:
            if len(self.queue) >= self.queue_limit:
                self.dropped += 1
                return False
            self.queue.append(occ)
            self._cond.notify()
        return True

    def post(self, fb: str, event: str) -> bool:
        return self.post_event(EventOccurrence(fb, event))

    def post_external(self, fb: FBInstance | str, pin: str, payload: Any = None) -> bool:
        name = fb if isinstance(fb, str) else fb.name
        return self.post_event(EventOccurrence(name, pin, "external", payload))

    def step(self) -> StepReport:
        with self._cond:
            if not self.queue:
                return StepReport(idle=True)
            occ = self.queue.popleft()
        fb = self.fbs[occ.fb]
        behavior = fb.type.behavior
        before = {**_prefixed("in", fb.inputs), **_prefixed("out", fb.outputs)}
        if occ.origin == "local":
            for dpin, sfb, spin in self._data_sources.get(fb.name, ()):
                fb.set_input(dpin, self.fbs[sfb].outputs[spin])
            emitted = behavior.on_event(self, fb, occ.pin)
        else:
            emitted = behavior.on_external(self, fb, occ.pin, occ.payload)
        after = {**_prefixed("in", fb.inputs), **_prefixed("out", fb.outputs)}
        changed = tuple((fb.name, key[1], before[key], after[key])
                        for key in after if before[key] != after[key])
        out = []
        for event in emitted:
            out.append((fb.name, event))
            for dfb, dpin in self._event_fanout.get((fb.name, event), ()):
                self.post_event(EventOccurrence(dfb, dpin))
        self.steps += 1
        report = StepReport(False, fb.name, occ.pin, occ.origin, tuple(out), changed)
        if isinstance(behavior, QX):
            self._publish_snapshot()
        for observer in self.observers:
            observer(report)
        return report

    def run_until_idle(self, max_steps: int = 100_000) -> list[StepReport]:
        reports = []
        for _ in range(max_steps):
            report = self.step()
            if report.idle:
                break
            reports.append(report)
        return reports

    # -- time ----------------------------------------------------------

    def now(self) -> float:
        return self.clock()

    def call_at(self, deadline_ms: float, callback: Callable[[], None]) -> None:
        with self._cond:
            heapq.heappush(self._timers, (deadline_ms, next(self._timer_seq), callback))
            self._cond.notify()

    def fire_due_timers(self) -> int:
        fired = 0
        while True:
            with self._cond:
                if not self._timers or self._timers[0][0] > self.clock():
                    return fired
                _, _, callback = heapq.heappop(self._timers)
            callback()
            fired += 1

    def next_deadline(self) -> float | None:
        with self._cond:
            return self._timers[0][0] if self._timers else None

    def advance(self, ms: float) -> list[StepReport]:
        """Virtual-clock driver: move time forward, firing timers in deadline
        order and draining the queue after each."""
        if not isinstance(self.clock, VirtualClock):
            raise TypeError("advance() needs a VirtualClock")
        target = self.clock.now + ms
        reports = self.run_until_idle()
        while True:
            deadline = self.next_deadline()
            if deadline is None or deadline > target:
                break
            self.clock.now = max(self.clock.now, deadline)
            self.fire_due_timers()
            reports += self.run_until_idle()
        self.clock.now = target
        return reports

    # -- loop ----------------------------------------------------------

    def start(self) -> None:
        if self._thread is not None:
            return
        self._stopping = False
        self._thread = threading.Thread(target=self._loop, name=f"rt-{self.name}", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        with self._cond:
            self._stopping = True
            self._cond.notify_all()
        if self._thread is not None and self._thread is not threading.current_thread():
            self._thread.join(timeout=5)
        self._thread = None

    def shutdown(self) -> None:
        self.stop()
        for fb in self.fbs.values():
            try:
                fb.type.behavior.shutdown(self, fb)
            except Exception:
                log.exception("shutdown of %s failed", fb.name)

    def _loop(self):
        while True:
            with self._cond:
                if self._stopping:
                    return
            self.fire_due_timers()
            if not self.step().idle:
                continue
            with self._cond:
                if self._stopping or self.queue:
                    continue
                deadline = self._timers[0][0] if self._timers else None
                wait = 0.1 if deadline is None else max(0.0, min(0.1, (deadline - self.clock()) / 1000.0))
                if wait > 0:
                    self._cond.wait(wait)

    # -- process I/O ---------------------------------------------------

    def _io_fb(self, name: str, behavior_type: type) -> FBInstance:
        fb = self.fbs.get(name)
        if fb is None or not isinstance(fb.type.behavior, behavior_type):
            kind = "input" if behavior_type is IX else "output"
            raise KeyError(f"unknown {kind} {name!r}")
        return fb

    def io_press(self, name: str, pressed: bool) -> None:
        self._io_fb(name, IX).state["input"].set(pressed)

    def io_pulse(self, name: str) -> None:
        """Momentary press: held for one sample, then released."""
        self._io_fb(name, IX).state["input"].pulse()

    def io_led(self, name: str) -> bool:
        self._io_fb(name, QX)
        return self.led_snapshot[name]

    def input_names(self) -> list[str]:
        return [n for n, fb in self.fbs.items() if isinstance(fb.type.behavior, IX)]

    def output_names(self) -> list[str]:
        return [n for n, fb in self.fbs.items() if isinstance(fb.type.behavior, QX)]

    def _publish_snapshot(self):
        # replaced wholesale so readers on other threads never see a partial dict
        self.led_snapshot = {n: fb.state.get("lit", False) for n, fb in self.fbs.items()
                             if isinstance(fb.type.behavior, QX)}


def _prefixed(prefix, pins):
    return {(prefix, k): v for k, v in pins.items()}


def instantiate_network(net: FBNetwork, device: str, clock: Callable[[], float] | None = None,
                        queue_limit: int = QUEUE_LIMIT) -> ResourceRuntime:
    """Build the runtime for one device.  Communication blocks get their
    configuration but stay disconnected until INIT."""
    net.device(device)
    net.validate()
    part = net.slice(device)
    types = part.types()
    fbs = []
    for spec in part.fbs:
        fb = FBInstance(spec.name, types[spec.name], device)
        for pin, raw in spec.params.items():
            fb.set_input(pin, _coerce(fb.type.input_kind(pin), raw))
        try:
            fb.type.behavior.validate(fb)
        except ValueError as exc:
            raise NetworkError(str(exc)) from None
        fbs.append(fb)
    return ResourceRuntime(device, fbs, part.event_connections, part.data_connections,
                           clock=clock, queue_limit=queue_limit)


def post_event(rt: ResourceRuntime, occ: EventOccurrence) -> bool:
    return rt.post_event(occ)


def step(rt: ResourceRuntime) -> StepReport:
    return rt.step()


def io_press(rt: ResourceRuntime, name: str, pressed: bool) -> None:
    rt.io_press(name, pressed)


def io_led(rt: ResourceRuntime, name: str) -> bool:
    return rt.io_led(name)
