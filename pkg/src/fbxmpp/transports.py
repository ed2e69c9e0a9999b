"""UDP publish/subscribe and TCP request/response transports.

UDP carries one frame per datagram, unframed.  TCP carries a sequence of
records, each a 2-octet big-endian length followed by that many frame
octets; a zero-length record is a valid (empty) frame.
"""

from __future__ import annotations

import ipaddress
import logging
import socket
import struct
import threading
from dataclasses import dataclass
from typing import Callable

from . import metrics

log = logging.getLogger(__name__)

MAX_DATAGRAM = 1400
MAX_TCP_FRAME = 0xFFFF
DEFAULT_PORT = 61499


class TransportError(OSError):
    pass


class ConnectError(TransportError):
    pass


class FramingError(TransportError):
    pass


class OversizeError(ValueError):
    pass


@dataclass(frozen=True)
class IpParams:
    host: str
    port: int

    def __post_init__(self):
        try:
            ipaddress.IPv4Address(self.host)
        except ValueError:
            raise ValueError(f"not an IPv4 address: {self.host!r}") from None
        if not isinstance(self.port, int) or not 1 <= self.port <= 65535:
            raise ValueError(f"port out of range: {self.port!r}")

    @classmethod
    def from_params(cls, params) -> "IpParams":
        if len(params) != 2:
            raise ValueError(f"ip layer takes host:port, got {len(params)} parameters")
        host, port = params
        try:
            port = int(port)
        except ValueError:
            raise ValueError(f"bad port {port!r}") from None
        return cls(host, port)

    @property
    def is_multicast(self) -> bool:
        return ipaddress.IPv4Address(self.host).is_multicast

    def __str__(self):
        return f"{self.host}:{self.port}"


class UdpPublisher:
    def __init__(self, params: IpParams, observer=None):
        self.params = params
        self.observer = observer or metrics.observer
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        if params.is_multicast:
            self.sock.setsockopt(socket.IPPROTO_IP, socket.IP_MULTICAST_TTL, 1)
            self.sock.setsockopt(socket.IPPROTO_IP, socket.IP_MULTICAST_LOOP, 1)
            self.sock.setsockopt(socket.IPPROTO_IP, socket.IP_MULTICAST_IF,
                                 socket.inet_aton("127.0.0.1"))

    def publish(self, frame: bytes) -> None:
        if len(frame) > MAX_DATAGRAM:
            raise OversizeError(f"frame of {len(frame)} bytes exceeds {MAX_DATAGRAM}")
        try:
            self.sock.sendto(frame, (self.params.host, self.params.port))
        except OSError as exc:
            raise TransportError(f"udp send to {self.params} failed: {exc}") from exc
        self.observer.record("udp", "sent", len(frame))

    def close(self) -> None:
        self.sock.close()


def udp_publish(endpoint: UdpPublisher, frame: bytes) -> None:
    endpoint.publish(frame)


class Subscription:
    """Receives datagrams on a background thread; one callback per datagram."""

    def __init__(self, params: IpParams, on_frame: Callable[[bytes], None], observer=None):
        self.params = params
        self.on_frame = on_frame
        self.observer = observer or metrics.observer
        self._closed = threading.Event()
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM, socket.IPPROTO_UDP)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            if params.is_multicast:
                sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEPORT, 1)
                sock.bind(("", params.port))
                mreq = struct.pack("4s4s", socket.inet_aton(params.host),
                                   socket.inet_aton("127.0.0.1"))
                sock.setsockopt(socket.IPPROTO_IP, socket.IP_ADD_MEMBERSHIP, mreq)
            else:
                sock.bind((params.host, params.port))
        except OSError as exc:
            sock.close()
            raise ConnectError(f"cannot bind {params}: {exc}") from exc
        sock.settimeout(0.2)
        self.sock = sock
        self._thread = threading.Thread(target=self._run, name=f"udp-sub-{params}", daemon=True)
        self._thread.start()

    def _run(self):
        while not self._closed.is_set():
            try:
                frame = self.sock.recv(65535)
            except socket.timeout:
                continue
            except OSError:
                break
            if self._closed.is_set():
                break
            self.observer.record("udp", "received", len(frame))
            try:
                self.on_frame(frame)
            except Exception:
                log.exception("udp subscriber callback failed")

    def close(self) -> None:
        self._closed.set()
        self._thread.join(timeout=2)
        self.sock.close()


def udp_subscribe(params: IpParams, on_frame: Callable[[bytes], None], observer=None) -> Subscription:
    return Subscription(params, on_frame, observer)


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise FramingError(f"connection closed with {n - len(buf)} octets outstanding")
        buf += chunk
    return bytes(buf)


def read_record(sock: socket.socket) -> bytes:
    length = int.from_bytes(_recv_exact(sock, 2), "big")
    return _recv_exact(sock, length)


def encode_record(frame: bytes) -> bytes:
    if len(frame) > MAX_TCP_FRAME:
        raise OversizeError(f"frame of {len(frame)} bytes exceeds {MAX_TCP_FRAME}")
    return len(frame).to_bytes(2, "big") + frame


class TcpServer:
    """Accepts connections; for each request record calls ``on_request`` and
    writes its return value back.  A callback returning None (or raising)
    closes that connection instead of answering."""

    def __init__(self, params: IpParams, on_request: Callable[[bytes], bytes | None], observer=None):
        self.params = params
        self.on_request = on_request
        self.observer = observer or metrics.observer
        self._closed = threading.Event()
        self._conns: set[socket.socket] = set()
        self._lock = threading.Lock()
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            sock.bind((params.host, params.port))
            sock.listen(16)
        except OSError as exc:
            sock.close()
            raise ConnectError(f"cannot listen on {params}: {exc}") from exc
        sock.settimeout(0.2)
        self.sock = sock
        self.port = sock.getsockname()[1]
        self._thread = threading.Thread(target=self._accept, name=f"tcp-srv-{params}", daemon=True)
        self._thread.start()

    def _accept(self):
        while not self._closed.is_set():
            try:
                conn, _ = self.sock.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            conn.settimeout(None)
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            with self._lock:
                self._conns.add(conn)
            threading.Thread(target=self._serve, args=(conn,), daemon=True).start()

    def _serve(self, conn):
        try:
            while not self._closed.is_set():
                request = read_record(conn)
                self.observer.record("tcp", "received", len(request) + 2)
                try:
                    response = self.on_request(request)
                except Exception:
                    log.exception("tcp request handler failed")
                    response = None
                if response is None:
                    break
                record = encode_record(response)
                conn.sendall(record)
                self.observer.record("tcp", "sent", len(record))
        except (FramingError, OSError):
            pass
        finally:
            with self._lock:
                self._conns.discard(conn)
            conn.close()

    def close(self) -> None:
        self._closed.set()
        self.sock.close()
        with self._lock:
            conns = list(self._conns)
        for conn in conns:
            try:
                conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            conn.close()
        self._thread.join(timeout=2)


def tcp_serve(params: IpParams, on_request: Callable[[bytes], bytes | None], observer=None) -> TcpServer:
    return TcpServer(params, on_request, observer)


class TcpClient:
    """A persistent request/response connection.  A request that times out
    or fails leaves the stream in an unknown state, so the connection is
    dropped and the next request opens a fresh one."""

    def __init__(self, params: IpParams, observer=None):
        self.params = params
        self.observer = observer or metrics.observer
        self.sock: socket.socket | None = None
        self._lock = threading.Lock()

    def connect(self, timeout_ms: float = 2000) -> None:
        if self.sock is not None:
            return
        try:
            sock = socket.create_connection((self.params.host, self.params.port),
                                            timeout=timeout_ms / 1000.0)
        except OSError as exc:
            raise ConnectError(f"cannot connect to {self.params}: {exc}") from exc
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self.sock = sock

    def request(self, frame: bytes, timeout_ms: float) -> bytes:
        record = encode_record(frame)
        with self._lock:
            self.connect(timeout_ms)
            sock = self.sock
            sock.settimeout(timeout_ms / 1000.0)
            try:
                sock.sendall(record)
                self.observer.record("tcp", "sent", len(record))
                response = read_record(sock)
            except socket.timeout:
                self._drop()
                raise TimeoutError(f"no response from {self.params} within {timeout_ms} ms") from None
            except FramingError:
                self._drop()
                raise
            except OSError as exc:
                self._drop()
                raise ConnectError(f"request to {self.params} failed: {exc}") from exc
            self.observer.record("tcp", "received", len(response) + 2)
            return response

    def _drop(self):
        if self.sock is not None:
            self.sock.close()
            self.sock = None

    def close(self) -> None:
        with self._lock:
            self._drop()


_clients: dict[IpParams, TcpClient] = {}
_clients_lock = threading.Lock()


def tcp_request(params: IpParams, frame: bytes, timeout: float) -> bytes:
    """One request on a shared, reused connection to ``params``."""
    with _clients_lock:
        client = _clients.setdefault(params, TcpClient(params))
    return client.request(frame, timeout)
