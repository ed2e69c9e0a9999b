"""PUBLISH / SUBSCRIBE / CLIENT / SERVER communication blocks.

Type names carry the data arity, optionally followed by ``:`` and the kinds
of the data pins (SD pins first, then RD pins; BOOL when omitted)::

    PUBLISH_3              SD_1..SD_3
    SUBSCRIBE_2:INT,BOOL   RD_1 INT, RD_2 BOOL
    CLIENT_m_n             m request SDs, n response RDs
    CLIENT_n               CLIENT_0_n (a data-less poll)
    SERVER_m_n             m request RDs, n response SDs
    SERVER_n               SERVER_0_n

Every block has QI/ID inputs, QO/STATUS outputs and INIT/INITO events.
Transport callbacks never touch block state: they post an external
occurrence and the scheduler latches the data when it runs it.
"""

from __future__ import annotations

import collections
import logging
import queue
import re
import threading

from .commstack.stack import DecodeError, StackError, build_stack
from .fbcore.blocks import Behavior, FBTypeDecl
from .fbcore.values import Kind, Value

log = logging.getLogger(__name__)

OK = "OK"
INITIALIZED = "INITIALIZED"
TERMINATED = "TERMINATED"
INVALID_ID = "INVALID_ID"
CONNECT_FAILED = "CONNECT_FAILED"
TIMEOUT = "TIMEOUT"
DECODE_ERROR = "DECODE_ERROR"
TLS_UNSUPPORTED = "TLS_UNSUPPORTED"
STATUSES = (OK, INITIALIZED, TERMINATED, INVALID_ID, CONNECT_FAILED, TIMEOUT,
            DECODE_ERROR, TLS_UNSUPPORTED)

DEFAULT_CLIENT_TIMEOUT_MS = 1000
DEFAULT_RESPONSE_WINDOW_MS = 5000

_TYPE_RE = re.compile(r"(PUBLISH|SUBSCRIBE|CLIENT|SERVER)_(\d+)(?:_(\d+))?(?::([A-Z,]+))?\Z")


def qo_for(status: str) -> bool:
    return status in (OK, INITIALIZED)


class SifbBehavior(Behavior):
    def __init__(self, pattern: str, sd_kinds: tuple[Kind, ...], rd_kinds: tuple[Kind, ...]):
        self.pattern = pattern
        self.sd_kinds = sd_kinds
        self.rd_kinds = rd_kinds
        ei, eo = ["INIT"], ["INITO"]
        if pattern in ("publish", "client"):
            ei.append("REQ")
            eo.append("CNF")
        elif pattern == "subscribe":
            eo.append("IND")
        else:
            ei.append("RSP")
            eo.append("IND")
        self.event_inputs = tuple(ei)
        self.event_outputs = tuple(eo)
        self.data_inputs = (("QI", Kind.BOOL), ("ID", Kind.STRING),
                            *((f"SD_{i + 1}", k) for i, k in enumerate(sd_kinds)))
        self.data_outputs = (("QO", Kind.BOOL), ("STATUS", Kind.STRING),
                             *((f"RD_{i + 1}", k) for i, k in enumerate(rd_kinds)))

    @property
    def arity_sd(self) -> int:
        return len(self.sd_kinds)

    @property
    def arity_rd(self) -> int:
        return len(self.rd_kinds)

    # -- helpers -------------------------------------------------------

    def init_state(self, fb):
        fb.state.update(endpoint=None, decode_errors=0, unmatched_rsp=0,
                        timeout_ms=DEFAULT_CLIENT_TIMEOUT_MS,
                        response_window_ms=DEFAULT_RESPONSE_WINDOW_MS,
                        lock=threading.Lock(), pending=collections.deque(),
                        worker=None, requests=None, token=0)

    def _status(self, fb, status):
        fb.set_output("STATUS", Value(Kind.STRING, status))
        fb.set_output("QO", Value(Kind.BOOL, qo_for(status)))

    def _count(self, fb, key):
        with fb.state["lock"]:
            fb.state[key] += 1

    def _sd(self, fb) -> list[Value]:
        return [fb.inputs[f"SD_{i + 1}"] for i in range(self.arity_sd)]

    def _fits_rd(self, values) -> bool:
        return len(values) == self.arity_rd and all(
            v.kind is k for v, k in zip(values, self.rd_kinds))

    def _latch(self, fb, values):
        for i, value in enumerate(values):
            fb.set_output(f"RD_{i + 1}", value)

    # -- events --------------------------------------------------------

    def on_event(self, rt, fb, event):
        if event == "INIT":
            self._teardown(fb)
            if fb.inputs["QI"].payload:
                self._status(fb, self._setup(rt, fb))
            else:
                self._status(fb, TERMINATED)
            return ["INITO"]
        endpoint = fb.state["endpoint"]
        if event == "REQ":
            if endpoint is None:
                self._status(fb, INVALID_ID)
                return ["CNF"]
            if self.pattern == "publish":
                try:
                    endpoint.send(self._sd(fb))
                    self._status(fb, OK)
                except StackError as exc:
                    self._status(fb, exc.status)
                return ["CNF"]
            fb.state["token"] += 1
            fb.state["requests"].put((fb.state["token"], self._sd(fb)))
            return []
        if event == "RSP":
            with fb.state["lock"]:
                pending = fb.state["pending"].popleft() if fb.state["pending"] else None
                if pending is None:
                    fb.state["unmatched_rsp"] += 1
            if pending is not None:
                pending["response"] = self._sd(fb)
                pending["done"].set()
            return []
        raise ValueError(f"{fb.name}: unexpected event {event}")

    def on_external(self, rt, fb, pin, payload):
        if self.pattern == "subscribe":
            self._latch(fb, payload)
            self._status(fb, OK)
            return ["IND"]
        if self.pattern == "server":
            self._latch(fb, payload)
            self._status(fb, OK)
            return ["IND"]
        _token, status, values = payload
        if fb.state["requests"] is None:
            # answer to a request made before the block was terminated
            return []
        if status == OK and not self._fits_rd(values):
            fb.state["decode_errors"] += 1
            status = DECODE_ERROR
        if status == OK:
            self._latch(fb, values)
        self._status(fb, status)
        return ["CNF"]

    # -- endpoint lifecycle -------------------------------------------

    def _setup(self, rt, fb) -> str:
        try:
            endpoint = build_stack(fb.inputs["ID"].payload, self.pattern)
        except StackError as exc:
            log.warning("%s INIT failed: %s", fb.name, exc)
            return exc.status
        fb.state["endpoint"] = endpoint
        endpoint.on_decode_error = lambda exc: self._count(fb, "decode_errors")
        if self.pattern == "subscribe":
            endpoint.on_receive = lambda values: self._indicate(rt, fb, values)
        elif self.pattern == "server":
            endpoint.serve(lambda values: self._serve(rt, fb, values))
        elif self.pattern == "client":
            requests = queue.Queue()
            fb.state["requests"] = requests
            worker = threading.Thread(target=self._client_worker, args=(rt, fb, endpoint, requests),
                                      name=f"client-{fb.name}", daemon=True)
            fb.state["worker"] = worker
            worker.start()
        return INITIALIZED

    def _teardown(self, fb):
        endpoint = fb.state.get("endpoint")
        requests = fb.state.get("requests")
        fb.state["endpoint"] = None
        fb.state["requests"] = None
        if requests is not None:
            requests.put(None)
        if endpoint is not None:
            try:
                endpoint.close()
            except Exception:
                log.exception("closing %s endpoint failed", fb.name)
        with fb.state["lock"]:
            pending = list(fb.state["pending"])
            fb.state["pending"].clear()
        for item in pending:
            item["done"].set()

    def shutdown(self, rt, fb):
        self._teardown(fb)

    def _indicate(self, rt, fb, values):
        # transport thread
        if not self._fits_rd(values):
            self._count(fb, "decode_errors")
            return
        rt.post_external(fb, "IND", values)

    def _serve(self, rt, fb, values):
        # transport thread; blocks until the application answers with RSP
        if not self._fits_rd(values):
            self._count(fb, "decode_errors")
            raise ValueError("request arity mismatch")
        pending = {"done": threading.Event(), "response": None}
        with fb.state["lock"]:
            fb.state["pending"].append(pending)
        rt.post_external(fb, "IND", values)
        if not pending["done"].wait(fb.state["response_window_ms"] / 1000.0):
            with fb.state["lock"]:
                if pending in fb.state["pending"]:
                    fb.state["pending"].remove(pending)
            raise TimeoutError(f"{fb.name}: no RSP within the response window")
        if pending["response"] is None:
            raise RuntimeError(f"{fb.name} terminated")
        return pending["response"]

    def _client_worker(self, rt, fb, endpoint, requests):
        while True:
            item = requests.get()
            if item is None:
                return
            token, values = item
            try:
                response = endpoint.request(values, fb.state["timeout_ms"])
                result = (token, OK, response)
            except DecodeError:
                result = (token, DECODE_ERROR, [])
            except (TimeoutError, StackError) as exc:
                # server down or unreachable: no answer within the timeout
                log.info("%s request failed: %s", fb.name, exc)
                result = (token, TIMEOUT, [])
            except Exception:
                log.exception("%s request failed", fb.name)
                result = (token, TIMEOUT, [])
            rt.post_external(fb, "CNF", result)


_cache: dict[str, FBTypeDecl] = {}


def sifb_type(name: str) -> FBTypeDecl | None:
    """Declaration for a communication block type name, or None."""
    if name in _cache:
        return _cache[name]
    m = _TYPE_RE.match(name)
    if not m:
        return None
    kind_name, first, second, kinds = m.groups()
    pattern = kind_name.lower()
    first = int(first)
    if pattern in ("publish", "subscribe"):
        if second is not None:
            return None
        n_sd, n_rd = (first, 0) if pattern == "publish" else (0, first)
    elif second is None:
        n_sd, n_rd = (0, first) if pattern == "client" else (first, 0)
    elif pattern == "client":
        n_sd, n_rd = first, int(second)
    else:
        n_rd, n_sd = first, int(second)
    if kinds:
        try:
            kind_list = [Kind(k) for k in kinds.split(",")]
        except ValueError:
            return None
        if len(kind_list) != n_sd + n_rd:
            return None
    else:
        kind_list = [Kind.BOOL] * (n_sd + n_rd)
    behavior = SifbBehavior(pattern, tuple(kind_list[:n_sd]), tuple(kind_list[n_sd:]))
    decl = behavior.declare(name)
    _cache[name] = decl
    return decl


def sifb_state(fb) -> dict:
    """Diagnostic counters and status of a communication block."""
    return {
        "qo": fb.outputs["QO"].payload,
        "status": fb.outputs["STATUS"].payload,
        "decode_errors": fb.state["decode_errors"],
        "unmatched_rsp": fb.state["unmatched_rsp"],
    }


def is_sifb(fb) -> bool:
    return isinstance(fb.type.behavior, SifbBehavior)
