"""Drive broker and device processes from Python (tests, benchmarks)."""

from __future__ import annotations

import os
import queue
import subprocess
import sys
import threading
import time

from .cli import bundled

START_TIMEOUT_S = 15.0


class ProcessError(RuntimeError):
    pass


class _LineProcess:
    def __init__(self, argv: list[str], env=None):
        self.argv = argv
        self.proc = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, stderr=subprocess.PIPE,
            text=True, bufsize=1, env=env)
        self.lines: queue.Queue = queue.Queue()
        self.stderr_lines: list[str] = []
        threading.Thread(target=self._pump, args=(self.proc.stdout, self.lines.put),
                         daemon=True).start()
        threading.Thread(target=self._pump, args=(self.proc.stderr, self._collect_stderr),
                         daemon=True).start()

    @staticmethod
    def _pump(stream, sink):
        for line in stream:
            sink(line.rstrip("\n"))
        sink(None)

    def _collect_stderr(self, line):
        if line is not None:
            self.stderr_lines.append(line)

    @property
    def pid(self) -> int:
        return self.proc.pid

    def readline(self, timeout: float = START_TIMEOUT_S) -> str:
        try:
            line = self.lines.get(timeout=timeout)
        except queue.Empty:
            raise ProcessError(f"{self.argv[3:]}: no output within {timeout} s") from None
        if line is None:
            self.proc.wait(timeout=5)
            raise ProcessError(f"{self.argv[3:]} exited with {self.proc.returncode}: "
                               + " | ".join(self.stderr_lines))
        return line

    def stop(self, timeout: float = 5.0) -> int:
        if self.proc.poll() is None:
            self.proc.terminate()
            try:
                self.proc.wait(timeout)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()
        return self.proc.returncode


class BrokerProcess(_LineProcess):
    """``xmppd`` on a free port; ``.port`` is known once it is listening."""

    def __init__(self, port: int = 0, accounts=None):
        argv = [sys.executable, "-m", "fbxmpp.appcli", "xmppd", "--port", str(port)]
        if accounts is not None:
            argv += ["--accounts", str(accounts)]
        super().__init__(argv)
        line = self.readline()
        if "listening on" not in line:
            raise ProcessError(f"unexpected broker output {line!r}")
        self.port = int(line.rsplit(":", 1)[1])

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.stop()


class DeviceProcess(_LineProcess):
    """One ``fbrun`` process.  Construction waits until the device is running
    (or raises ProcessError carrying its init errors)."""

    def __init__(self, net, device: str, xmpp_port: int | None = None,
                 tolerate_init_errors: bool = False, extra_env=None):
        net = str(net)
        if not os.path.exists(net):
            net = str(bundled(net))
        argv = [sys.executable, "-m", "fbxmpp.appcli", "fbrun", "--net", net, "--device", device]
        if xmpp_port is not None:
            argv += ["--xmpp-port", str(xmpp_port)]
        if tolerate_init_errors:
            argv.append("--tolerate-init-errors")
        env = dict(os.environ, **(extra_env or {}))
        super().__init__(argv, env)
        self.device = device
        line = self.readline()
        if line != f"ready {device}":
            raise ProcessError(f"unexpected device output {line!r}")

    def command(self, line: str, timeout: float = 10.0) -> str:
        self.proc.stdin.write(line + "\n")
        self.proc.stdin.flush()
        return self.readline(timeout)

    def press(self, name: str) -> None:
        reply = self.command(f"press {name}")
        if not reply.startswith("ok"):
            raise ProcessError(reply)

    def leds(self) -> dict[str, int]:
        reply = self.command("leds")
        return {k: int(v) for k, v in (item.split("=") for item in reply.split())}

    def wait_leds(self, expected: dict[str, int], timeout: float, poll: float = 0.01):
        """Poll ``leds`` until the named LEDs match; returns (elapsed s, leds)
        or raises TimeoutError with the last reading."""
        start = time.monotonic()
        while True:
            leds = self.leds()
            elapsed = time.monotonic() - start
            if all(leds.get(k) == v for k, v in expected.items()):
                return elapsed, leds
            if elapsed > timeout:
                raise TimeoutError(f"{self.device}: wanted {expected}, have {leds} after {elapsed:.2f} s")
            time.sleep(poll)

    def quit(self, timeout: float = 5.0) -> int:
        if self.proc.poll() is None:
            try:
                self.proc.stdin.write("quit\n")
                self.proc.stdin.flush()
                self.proc.wait(timeout)
            except (OSError, subprocess.TimeoutExpired):
                pass
        return self.stop()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.quit()
