import socket

import pytest
from hypothesis import strategies as st

from fbxmpp.fbcore.values import Kind, Value
from fbxmpp.xmppmini.broker import Broker

ACCOUNTS = {
    "alice@localhost": "a-pw",
    "bob@localhost": "b-pw",
    "carol@localhost": "c-pw",
    "netop@localhost": "netop",
    "cem@localhost": "cem",
    "display@localhost": "display",
}

bools = st.booleans().map(lambda b: Value(Kind.BOOL, b))
sints = st.integers(-128, 127).map(lambda i: Value(Kind.SINT, i))
ints = st.integers(-32768, 32767).map(lambda i: Value(Kind.INT, i))
dints = st.integers(-2**31, 2**31 - 1).map(lambda i: Value(Kind.DINT, i))
strings = st.text(max_size=40).map(lambda s: Value(Kind.STRING, s))
values = st.one_of(bools, sints, ints, dints, strings)
value_lists = st.lists(values, max_size=12)


def free_port(kind=socket.SOCK_STREAM):
    with socket.socket(socket.AF_INET, kind) as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@pytest.fixture
def broker():
    b = Broker(ACCOUNTS, port=0).start()
    yield b
    b.close()


# one "criterion N PASS|FAIL ..." line per acceptance criterion, repeated in
# the terminal summary so it survives output capture
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[1])):
            terminalreporter.write_line(line)
