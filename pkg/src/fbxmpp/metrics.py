"""Application-payload byte accounting shared by all transports.

Every transport reports each message it puts on, or takes off, the wire.
Counters are aggregates only, so a long-running process never accumulates
per-message records.
"""

from __future__ import annotations

import threading
from collections import defaultdict


class ByteCounter:
    def __init__(self):
        self._lock = threading.Lock()
        self._bytes = defaultdict(int)
        self._messages = defaultdict(int)

    def record(self, transport: str, direction: str, nbytes: int, role: str = "") -> None:
        key = (transport, direction, role)
        with self._lock:
            self._bytes[key] += nbytes
            self._messages[key] += 1

    def reset(self) -> None:
        with self._lock:
            self._bytes.clear()
            self._messages.clear()

    def snapshot(self) -> dict[tuple[str, str, str], tuple[int, int]]:
        """(transport, direction, role) -> (messages, bytes)"""
        with self._lock:
            return {k: (self._messages[k], self._bytes[k]) for k in self._bytes}

    def total(self, transport: str | None = None, direction: str | None = None,
              role: str | None = None) -> int:
        with self._lock:
            return sum(n for (t, d, r), n in self._bytes.items()
                       if (transport is None or t == transport)
                       and (direction is None or d == direction)
                       and (role is None or r == role))

    def messages(self, transport: str | None = None, direction: str | None = None) -> int:
        with self._lock:
            return sum(n for (t, d, _), n in self._messages.items()
                       if (transport is None or t == transport)
                       and (direction is None or d == direction))


observer = ByteCounter()
