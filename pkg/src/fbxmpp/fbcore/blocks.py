"""Function block type declarations and the built-in behaviors.

A behavior is the executable part of a block type.  Behaviors are shared by
every instance of a type; anything an instance needs to remember lives in
``FBInstance.state``.  The scheduler calls :meth:`Behavior.on_event` for
events arriving through event connections and :meth:`Behavior.on_external`
for occurrences injected from outside the network (timer expirations,
transport indications).  Both return the names of the event outputs to emit,
in emission order.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

from .values import Kind, Value, zero

if TYPE_CHECKING:
    from .runtime import ResourceRuntime


class TypeDeclError(ValueError):
    pass


@dataclass(frozen=True)
class FBTypeDecl:
    name: str
    event_inputs: tuple[str, ...]
    event_outputs: tuple[str, ...]
    data_inputs: tuple[tuple[str, Kind], ...]
    data_outputs: tuple[tuple[str, Kind], ...]
    behavior: "Behavior"

    def __post_init__(self):
        pins = [*self.event_inputs, *self.event_outputs,
                *(n for n, _ in self.data_inputs), *(n for n, _ in self.data_outputs)]
        seen = set()
        for pin in pins:
            if pin in seen:
                raise TypeDeclError(f"{self.name}: duplicate pin {pin!r}")
            seen.add(pin)
        self.behavior.check_signature(self)

    def input_kind(self, pin: str) -> Kind | None:
        return dict(self.data_inputs).get(pin)

    def output_kind(self, pin: str) -> Kind | None:
        return dict(self.data_outputs).get(pin)


@dataclass(eq=False)
class FBInstance:
    name: str
    type: FBTypeDecl
    device: str = ""
    inputs: dict[str, Value] = field(default_factory=dict)
    outputs: dict[str, Value] = field(default_factory=dict)
    state: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        for pin, kind in self.type.data_inputs:
            self.inputs.setdefault(pin, zero(kind))
        for pin, kind in self.type.data_outputs:
            self.outputs.setdefault(pin, zero(kind))

    def set_input(self, pin: str, value: Value) -> None:
        kind = self.type.input_kind(pin)
        if kind is None:
            raise KeyError(f"{self.name} has no data input {pin!r}")
        if value.kind is not kind:
            raise TypeError(f"{self.name}.{pin} is {kind.value}, got {value.kind.value}")
        self.inputs[pin] = value

    def set_output(self, pin: str, value: Value) -> None:
        kind = self.type.output_kind(pin)
        if kind is None:
            raise KeyError(f"{self.name} has no data output {pin!r}")
        if value.kind is not kind:
            raise TypeError(f"{self.name}.{pin} is {kind.value}, got {value.kind.value}")
        self.outputs[pin] = value

    def __repr__(self):
        return f"<FBInstance {self.name}:{self.type.name}>"


class Behavior:
    """Base class for built-in block behaviors."""

    event_inputs: tuple[str, ...] = ()
    event_outputs: tuple[str, ...] = ()
    data_inputs: tuple[tuple[str, Kind], ...] = ()
    data_outputs: tuple[tuple[str, Kind], ...] = ()

    def check_signature(self, decl: FBTypeDecl) -> None:
        expected = (self.event_inputs, self.event_outputs, self.data_inputs, self.data_outputs)
        actual = (decl.event_inputs, decl.event_outputs, decl.data_inputs, decl.data_outputs)
        if expected != actual:
            raise TypeDeclError(f"{decl.name}: pins do not match behavior {type(self).__name__}")

    def declare(self, name: str) -> FBTypeDecl:
        return FBTypeDecl(name, self.event_inputs, self.event_outputs,
                          self.data_inputs, self.data_outputs, self)

    def validate(self, fb: FBInstance) -> None:
        """Check parameter values at instantiation; raise ValueError if unusable."""

    def init_state(self, fb: FBInstance) -> None:
        pass

    def on_event(self, rt: ResourceRuntime, fb: FBInstance, event: str) -> list[str]:
        raise NotImplementedError

    def on_external(self, rt: ResourceRuntime, fb: FBInstance, pin: str, payload: Any) -> list[str]:
        raise TypeError(f"{fb.name} does not accept external occurrences")

    def shutdown(self, rt: ResourceRuntime, fb: FBInstance) -> None:
        pass


def rs_behavior(s: bool, r: bool, state: bool) -> tuple[bool, bool]:
    """Reset-dominant latch.  Returns (q, emit); Q is re-published on every trigger."""
    if r:
        state = False
    elif s:
        state = True
    return state, True


def gate_behavior(kind: str, *inputs: bool) -> bool:
    if kind == "OR2":
        if len(inputs) != 2:
            raise TypeError("OR2 takes two inputs")
        return inputs[0] or inputs[1]
    if kind == "AND2":
        if len(inputs) != 2:
            raise TypeError("AND2 takes two inputs")
        return inputs[0] and inputs[1]
    if kind == "NOT":
        if len(inputs) != 1:
            raise TypeError("NOT takes one input")
        return not inputs[0]
    raise ValueError(f"unknown gate {kind!r}")


class RS(Behavior):
    # S and R are both triggers; which one fired does not matter, the latch
    # samples SET/RESET on either.
    event_inputs = ("S", "R")
    event_outputs = ("EO",)
    data_inputs = (("SET", Kind.BOOL), ("RESET", Kind.BOOL))
    data_outputs = (("Q", Kind.BOOL),)

    def on_event(self, rt, fb, event):
        q, emit = rs_behavior(fb.inputs["SET"].payload, fb.inputs["RESET"].payload,
                              fb.outputs["Q"].payload)
        fb.set_output("Q", Value(Kind.BOOL, q))
        return ["EO"] if emit else []


class Gate(Behavior):
    event_inputs = ("REQ",)
    event_outputs = ("CNF",)
    data_outputs = (("OUT", Kind.BOOL),)

    def __init__(self, kind: str):
        self.kind = kind
        arity = 1 if kind == "NOT" else 2
        self.data_inputs = tuple((f"IN{i + 1}" if arity > 1 else "IN", Kind.BOOL)
                                 for i in range(arity))

    def on_event(self, rt, fb, event):
        args = [fb.inputs[pin].payload for pin, _ in self.data_inputs]
        fb.set_output("OUT", Value(Kind.BOOL, gate_behavior(self.kind, *args)))
        return ["CNF"]


class ECycle(Behavior):
    """Periodic event source on an absolute-deadline schedule.  DT is in ms."""

    event_inputs = ("START", "STOP")
    event_outputs = ("EO",)
    data_inputs = (("DT", Kind.DINT),)

    def validate(self, fb):
        if fb.inputs["DT"].payload <= 0:
            raise ValueError(f"{fb.name}: DT must be > 0 ms")

    def init_state(self, fb):
        fb.state["generation"] = 0
        fb.state["running"] = False

    def on_event(self, rt, fb, event):
        # both events invalidate any pending tick
        fb.state["generation"] += 1
        if event == "START":
            fb.state["running"] = True
            dt = fb.inputs["DT"].payload
            if dt <= 0:
                raise ValueError(f"{fb.name}: DT must be > 0 ms")
            self._arm(rt, fb, fb.state["generation"], rt.now() + dt, dt)
        else:
            fb.state["running"] = False
        return []

    def _arm(self, rt, fb, generation, deadline, dt):
        def expire():
            if fb.state["generation"] != generation:
                return
            rt.post_external(fb, "EO", generation)
            self._arm(rt, fb, generation, deadline + dt, dt)
        rt.call_at(deadline, expire)

    def on_external(self, rt, fb, pin, payload):
        if payload != fb.state["generation"]:
            return []
        return ["EO"]


class VirtualInput:
    """A push button.  ``level`` is what a sample reads; ``pulse`` queues a
    momentary press that is held for exactly one sample."""

    def __init__(self):
        self._lock = threading.Lock()
        self.level = False
        self.pending_pulses = 0
        self._pulse_active = False

    def set(self, pressed: bool) -> None:
        with self._lock:
            self.level = bool(pressed)

    def pulse(self) -> None:
        with self._lock:
            self.pending_pulses += 1

    def sample(self, previous: bool) -> bool:
        with self._lock:
            if self._pulse_active:
                # release after one sample
                self._pulse_active = False
                return self.level
            if self.pending_pulses and not previous:
                self.pending_pulses -= 1
                self._pulse_active = True
                return True
            return self.level


class IX(Behavior):
    """Boolean process input.  REQ samples the button; CNF after every sample,
    IND only on a rising edge."""

    event_inputs = ("REQ",)
    event_outputs = ("CNF", "IND")
    data_outputs = (("OUT", Kind.BOOL),)

    def init_state(self, fb):
        fb.state["input"] = VirtualInput()

    def on_event(self, rt, fb, event):
        previous = fb.outputs["OUT"].payload
        now = fb.state["input"].sample(previous)
        fb.set_output("OUT", Value(Kind.BOOL, now))
        if now and not previous:
            return ["CNF", "IND"]
        return ["CNF"]


class QX(Behavior):
    """Boolean process output (an LED); it shows whatever IN held at REQ."""

    event_inputs = ("REQ",)
    event_outputs = ("CNF",)
    data_inputs = (("IN", Kind.BOOL),)

    def init_state(self, fb):
        fb.state["lit"] = False

    def on_event(self, rt, fb, event):
        fb.state["lit"] = fb.inputs["IN"].payload
        return ["CNF"]


BUILTIN_TYPES: dict[str, FBTypeDecl] = {
    "RS": RS().declare("RS"),
    "OR2": Gate("OR2").declare("OR2"),
    "AND2": Gate("AND2").declare("AND2"),
    "NOT": Gate("NOT").declare("NOT"),
    "E_CYCLE": ECycle().declare("E_CYCLE"),
    "IX": IX().declare("IX"),
    "QX": QX().declare("QX"),
}


def resolve_type(name: str) -> FBTypeDecl:
    """Look up a block type by name; communication blocks are parsed from
    their names (``PUBLISH_3``, ``CLIENT_0_1`` ...)."""
    if name in BUILTIN_TYPES:
        return BUILTIN_TYPES[name]
    from .. import sifb

    decl = sifb.sifb_type(name)
    if decl is None:
        raise TypeDeclError(f"unknown FB type {name!r}")
    return decl
