import socket
import threading
import time

import pytest
from conftest import free_port

from fbxmpp import transports
from fbxmpp.metrics import ByteCounter
from fbxmpp.transports import (ConnectError, FramingError, IpParams, OversizeError, TcpClient,
                               encode_record, read_record, tcp_request, tcp_serve, udp_subscribe)


def test_ip_params():
    p = IpParams.from_params(("192.168.20.1", "61499"))
    assert (p.host, p.port) == ("192.168.20.1", 61499)
    assert not p.is_multicast
    assert IpParams("239.1.2.3", 5).is_multicast
    for bad in [("localhost", "1"), ("1.2.3.4", "0"), ("1.2.3.4", "x"), ("1.2.3.4",)]:
        with pytest.raises(ValueError):
            IpParams.from_params(bad)


def test_record_framing():
    assert encode_record(b"") == b"\x00\x00"
    assert encode_record(b"\x41") == b"\x00\x01\x41"
    with pytest.raises(OversizeError):
        encode_record(b"x" * 65536)
    a, b = socket.socketpair()
    with a, b:
        a.sendall(encode_record(b"abc") + encode_record(b""))
        assert read_record(b) == b"abc"
        assert read_record(b) == b""
        a.sendall(b"\x00\x05ab")
        a.shutdown(socket.SHUT_WR)
        with pytest.raises(FramingError):
            read_record(b)


def test_udp_unicast_roundtrip():
    counter = ByteCounter()
    params = IpParams("127.0.0.1", free_port(socket.SOCK_DGRAM))
    got = []
    arrived = threading.Event()
    sub = udp_subscribe(params, lambda f: (got.append(f), arrived.set()), counter)
    pub = transports.UdpPublisher(params, counter)
    try:
        transports.udp_publish(pub, b"\x41\x40")
        assert arrived.wait(2)
        assert got == [b"\x41\x40"]
        assert counter.total("udp", "sent") == 2 == counter.total("udp", "received")
        with pytest.raises(OversizeError):
            pub.publish(b"x" * 1401)
    finally:
        pub.close()
        sub.close()


def test_udp_multicast_roundtrip():
    params = IpParams("239.255.42.99", free_port(socket.SOCK_DGRAM))
    arrived = threading.Event()
    try:
        sub = udp_subscribe(params, lambda f: arrived.set())
    except ConnectError as exc:
        pytest.skip(f"multicast unavailable here: {exc}")
    pub = transports.UdpPublisher(params)
    try:
        for _ in range(5):
            pub.publish(b"\x41")
            if arrived.wait(0.3):
                break
        if not arrived.is_set():
            pytest.skip("multicast loopback not routed in this environment")
    finally:
        pub.close()
        sub.close()


def test_tcp_request_response_and_accounting():
    counter = ByteCounter()
    params = IpParams("127.0.0.1", free_port())
    server = tcp_serve(params, lambda frame: frame[::-1], counter)
    client = TcpClient(params, counter)
    try:
        assert client.request(b"abc", 1000) == b"cba"
        assert client.request(b"", 1000) == b""
        assert counter.total("tcp", "sent") == (3 + 2) * 2 + 2 * 2
        assert tcp_request(params, b"xy", 1000) == b"yx"
    finally:
        client.close()
        server.close()


def test_tcp_timeout_then_reconnect():
    params = IpParams("127.0.0.1", free_port())
    slow = threading.Event()

    def handler(frame):
        if frame == b"slow":
            slow.wait(2)
        return frame

    server = tcp_serve(params, handler)
    client = TcpClient(params)
    try:
        with pytest.raises(TimeoutError):
            client.request(b"slow", 100)
        slow.set()
        assert client.request(b"fast", 1000) == b"fast"
    finally:
        client.close()
        server.close()


def test_tcp_server_closes_on_handler_refusal():
    params = IpParams("127.0.0.1", free_port())
    server = tcp_serve(params, lambda frame: None)
    client = TcpClient(params)
    try:
        with pytest.raises((ConnectError, FramingError)):
            client.request(b"x", 1000)
    finally:
        client.close()
        server.close()


def test_connect_refused():
    client = TcpClient(IpParams("127.0.0.1", free_port()))
    with pytest.raises(ConnectError):
        client.request(b"x", 500)


def test_server_handles_clients_concurrently():
    params = IpParams("127.0.0.1", free_port())
    server = tcp_serve(params, lambda f: f)
    clients = [TcpClient(params) for _ in range(4)]
    results = []
    try:
        threads = [threading.Thread(target=lambda c=c, i=i: results.append(c.request(bytes([i]), 2000)))
                   for i, c in enumerate(clients)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert sorted(results) == [bytes([i]) for i in range(4)]
    finally:
        for c in clients:
            c.close()
        server.close()
        time.sleep(0.05)
