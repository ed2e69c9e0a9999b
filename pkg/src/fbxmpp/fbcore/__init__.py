"""Event-driven function block model and scheduler."""

from .blocks import (
    BUILTIN_TYPES,
    Behavior,
    FBInstance,
    FBTypeDecl,
    TypeDeclError,
    VirtualInput,
    gate_behavior,
    resolve_type,
    rs_behavior,
)
from .runtime import (
    QUEUE_LIMIT,
    Connection,
    Device,
    EventOccurrence,
    FBNetwork,
    FBSpec,
    NetworkError,
    ResourceRuntime,
    StepReport,
    VirtualClock,
    instantiate_network,
    io_led,
    io_press,
    post_event,
    step,
)
from .values import BOOL, DINT, INT, SINT, STRING, Kind, KindError, Value, parse_literal, zero


def cycle_timer(rt: ResourceRuntime, fb: FBInstance | str, dt: int) -> None:
    """Configure an E_CYCLE instance for a period of ``dt`` ms and start it."""
    if dt <= 0:
        raise ValueError("cycle period must be > 0 ms")
    inst = rt.fbs[fb] if isinstance(fb, str) else fb
    inst.set_input("DT", DINT(dt))
    rt.post(inst.name, "START")
