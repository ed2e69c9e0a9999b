"""Entry points for ``fbrun`` and ``xmppd``."""

from __future__ import annotations

import argparse
import logging
import os
import signal
import sys
import threading
from pathlib import Path

from ..commstack.stack import XMPP_PORT_ENV
from ..xmppmini.broker import DEFAULT_PORT, Broker, load_accounts
from .netdef import NetDefError, load_netdef
from .runner import run_device

NETS_DIR = Path(__file__).resolve().parent / "nets"


def bundled(name: str) -> Path:
    """Path of a bundled file (``tc1`` -> nets/tc1.net)."""
    path = NETS_DIR / name
    if not path.suffix:
        path = path.with_suffix(".net")
    return path


def _net_path(arg: str) -> Path:
    path = Path(arg)
    if path.exists():
        return path
    candidate = bundled(arg)
    return candidate if candidate.exists() else path


def fbrun_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fbrun", description="Run one device of an FB network.")
    parser.add_argument("--net", required=True, help="network definition file (or a bundled name: tc1, tc1_udp, tc2, tc2_tcp)")
    parser.add_argument("--device", required=True)
    parser.add_argument("--tolerate-init-errors", action="store_true",
                        help="keep running when a communication block fails to initialize")
    parser.add_argument("--script", help="read REPL commands from this file instead of stdin")
    parser.add_argument("--xmpp-port", type=int,
                        help=f"broker port for xmpp IDs without an explicit port (default {DEFAULT_PORT})")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    if args.xmpp_port is not None:
        os.environ[XMPP_PORT_ENV] = str(args.xmpp_port)
    try:
        doc = load_netdef(_net_path(args.net))
        doc.device(args.device)
    except (OSError, NetDefError, ValueError) as exc:
        print(f"fbrun: {exc}", file=sys.stderr)
        return 1
    return run_device(doc, args.device, args.tolerate_init_errors, args.script)


def xmppd_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="xmppd", description="Minimal XMPP broker.")
    parser.add_argument("--port", type=int, default=DEFAULT_PORT, help="0 picks a free port")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--accounts", default=str(NETS_DIR / "accounts.txt"),
                        help="file of 'bareJid password' lines")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        accounts = load_accounts(args.accounts)
        broker = Broker(accounts, args.host, args.port).start()
    except (OSError, ValueError) as exc:
        print(f"xmppd: {exc}", file=sys.stderr)
        return 1
    stop = threading.Event()
    signal.signal(signal.SIGTERM, lambda *_: stop.set())
    print(f"xmppd listening on {args.host}:{broker.port}", flush=True)
    try:
        while not stop.wait(0.5):
            pass
    except KeyboardInterrupt:
        pass
    finally:
        broker.close()
    return 0


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] not in ("fbrun", "xmppd"):
        print("usage: python -m fbxmpp.appcli fbrun|xmppd ...", file=sys.stderr)
        return 1
    entry = fbrun_main if argv[0] == "fbrun" else xmppd_main
    return entry(argv[1:])
