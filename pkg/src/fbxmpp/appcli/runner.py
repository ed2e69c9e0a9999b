"""Per-device runner: instantiate a slice, connect its communication blocks,
run the scheduler and serve a small line-oriented REPL.

Every REPL command answers with exactly one line, so a driving process can
read one line per command it writes.
"""

from __future__ import annotations

import logging
import shlex
import sys
import time

from .. import metrics
from ..fbcore.blocks import ECycle
from ..fbcore.runtime import ResourceRuntime, instantiate_network
from ..sifb import is_sifb, sifb_state

log = logging.getLogger(__name__)

INIT_TIMEOUT_S = 10.0


class InitError(RuntimeError):
    def __init__(self, failures: list[tuple[str, str]]):
        super().__init__(", ".join(f"{name} {status}" for name, status in failures))
        self.failures = failures


def start_device(doc, device: str, tolerate_init_errors: bool = False) -> ResourceRuntime:
    """Instantiate the device's slice, INIT every communication block, start
    the periodic timers and the scheduler thread."""
    rt = instantiate_network(doc, device)
    sifbs = [fb for fb in rt.fbs.values() if is_sifb(fb)]
    for fb in sifbs:
        rt.post(fb.name, "INIT")
    rt.run_until_idle()
    failures = [(fb.name, fb.outputs["STATUS"].payload) for fb in sifbs
                if not fb.outputs["QO"].payload]
    if failures and not tolerate_init_errors:
        rt.shutdown()
        raise InitError(failures)
    for fb in rt.fbs.values():
        if isinstance(fb.type.behavior, ECycle):
            rt.post(fb.name, "START")
    rt.start()
    return rt


def format_leds(rt: ResourceRuntime) -> str:
    snapshot = rt.led_snapshot
    return " ".join(f"{name}={int(snapshot[name])}" for name in rt.output_names())


def format_stats(rt: ResourceRuntime) -> str:
    decode_errors = unmatched = 0
    for fb in rt.fbs.values():
        if is_sifb(fb):
            state = sifb_state(fb)
            decode_errors += state["decode_errors"]
            unmatched += state["unmatched_rsp"]
    parts = [f"dropped={rt.dropped}", f"decode_errors={decode_errors}",
             f"unmatched_rsp={unmatched}"]
    for (transport, direction, role), (_, nbytes) in sorted(metrics.observer.snapshot().items()):
        label = f"{transport}_{direction}" + (f"_{role}" if role else "")
        parts.append(f"{label}={nbytes}")
    return " ".join(parts)


def format_status(rt: ResourceRuntime) -> str:
    parts = []
    for fb in rt.fbs.values():
        if is_sifb(fb):
            state = sifb_state(fb)
            parts.append(f"{fb.name}={state['status']}")
    return " ".join(parts) or "none"


def repl_execute(rt: ResourceRuntime, line: str) -> str | None:
    """Run one REPL command.  Returns the reply line, or None on ``quit``."""
    try:
        words = shlex.split(line)
    except ValueError as exc:
        return f"error: {exc}"
    if not words:
        return "error: empty command"
    cmd, args = words[0], words[1:]
    if cmd == "quit":
        return None
    if cmd == "press":
        if len(args) != 1:
            return "error: usage: press <INPUT>"
        try:
            rt.io_pulse(args[0])
        except KeyError:
            return f"error: unknown input {args[0]!r}"
        return f"ok press {args[0]}"
    if cmd == "leds":
        return format_leds(rt)
    if cmd == "stats":
        return format_stats(rt)
    if cmd == "status":
        return format_status(rt)
    if cmd == "sleep":
        try:
            ms = float(args[0]) if len(args) == 1 else -1
        except ValueError:
            ms = -1
        if ms < 0:
            return "error: usage: sleep <ms>"
        time.sleep(ms / 1000.0)
        return f"ok sleep {args[0]}"
    return f"error: unknown command {cmd!r}"


def serve_repl(rt: ResourceRuntime, lines, out=None) -> None:
    out = out or sys.stdout
    for raw in lines:
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        reply = repl_execute(rt, line)
        if reply is None:
            break
        print(reply, file=out, flush=True)
    print("bye", file=out, flush=True)


def run_device(doc, device: str, tolerate_init_errors: bool = False, script=None,
               stdin=None, stdout=None, stderr=None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        rt = start_device(doc, device, tolerate_init_errors)
    except InitError as exc:
        for name, status in exc.failures:
            print(f"init-error {name} {status}", file=stderr, flush=True)
        return 2
    try:
        print(f"ready {device}", file=stdout, flush=True)
        if script is not None:
            with open(script, encoding="utf-8") as fh:
                serve_repl(rt, fh.readlines(), stdout)
        else:
            serve_repl(rt, stdin, stdout)
    finally:
        rt.shutdown()
    return 0
