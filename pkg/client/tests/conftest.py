from __future__ import annotations

import json
import socket
import subprocess
import sys
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import httpx
import pytest


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


@pytest.fixture(scope="session")
def service_url():
    """A real mock-backed scoring service, started through the CLI."""
    port = free_port()
    url = f"http://127.0.0.1:{port}"
    proc = subprocess.Popen(
        [sys.executable, "-m", "nitireward.cli", "serve", "--listen", f"127.0.0.1:{port}"],
        stdout=subprocess.DEVNULL,
        stderr=subprocess.DEVNULL,
    )
    try:
        deadline = time.time() + 20
        while True:
            try:
                if httpx.get(f"{url}/healthz", timeout=1.0).status_code == 200:
                    break
            except httpx.HTTPError:
                pass
            if time.time() > deadline:
                raise RuntimeError("scoring service did not come up")
            time.sleep(0.1)
        yield url
    finally:
        proc.terminate()
        proc.wait(timeout=10)


class FlakyProxy:
    """Forwards requests to the live service; can be told to answer the next
    N POSTs with 502 instead."""

    def __init__(self, target: str):
        self.target = target
        self.fail_next = 0
        self.post_count = 0
        self.lock = threading.Lock()
        proxy = self

        class Handler(BaseHTTPRequestHandler):
            def _respond(self, status: int, body: bytes, content_type="application/json"):
                self.send_response(status)
                self.send_header("Content-Type", content_type)
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def do_POST(self):
                with proxy.lock:
                    proxy.post_count += 1
                    if proxy.fail_next > 0:
                        proxy.fail_next -= 1
                        self._respond(502, json.dumps({"detail": "injected"}).encode())
                        return
                length = int(self.headers.get("Content-Length", 0))
                body = self.rfile.read(length)
                upstream = httpx.post(
                    proxy.target + self.path, content=body,
                    headers={"Content-Type": "application/json"}, timeout=30.0,
                )
                self._respond(upstream.status_code, upstream.content)

            def do_GET(self):
                upstream = httpx.get(proxy.target + self.path, timeout=30.0)
                self._respond(upstream.status_code, upstream.content)

            def log_message(self, *args):
                pass

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self.thread.start()

    @property
    def url(self) -> str:
        return f"http://127.0.0.1:{self.server.server_port}"

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def flaky_proxy(service_url):
    proxy = FlakyProxy(service_url)
    yield proxy
    proxy.close()
