import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

from pmtestgen.probe import ResponseCapture

FIXTURES = Path(__file__).parent / "fixtures"

# canonical form carries no trailing newline
GOLDEN = (FIXTURES / "golden.js").read_text(encoding="utf-8").rstrip("\n")

PHOTOS_BODY = b'{"photos":[{"sol":0,"camera":"FHAZ"}]}'


@pytest.fixture
def golden_text():
    return GOLDEN


@pytest.fixture
def photos_capture():
    return ResponseCapture(
        status=200,
        headers=(("Content-Type", "application/json"),),
        body_bytes=PHOTOS_BODY,
        latency_ms=150,
        final_url="https://api.nasa.gov/mars-photos/api/v1/rovers/curiosity/photos?sol=0",
    )


class StubServer:
    """Local HTTP server answering from scripted responses.

    A route maps a path to one response dict (status, headers, body, delay,
    content_length) or to a list consumed in order, the last entry repeating.
    """

    def __init__(self):
        self.routes = {}
        self.requests = []
        self._lock = threading.Lock()
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def _handle(self):
                length = int(self.headers.get("Content-Length") or 0)
                body = self.rfile.read(length) if length else b""
                path = self.path.split("?", 1)[0]
                with stub._lock:
                    stub.requests.append(
                        {"method": self.command, "path": self.path, "headers": dict(self.headers), "body": body})
                    route = stub.routes.get(path)
                    if isinstance(route, list):
                        spec = route.pop(0) if len(route) > 1 else route[0]
                    else:
                        spec = route
                if spec is None:
                    spec = {"status": 404, "body": b"no such stub route"}
                if spec.get("delay"):
                    time.sleep(spec["delay"])
                body_out = spec.get("body", b"")
                if isinstance(body_out, str):
                    body_out = body_out.encode("utf-8")
                self.send_response(spec.get("status", 200))
                for k, v in spec.get("headers", ()):
                    self.send_header(k, v)
                if spec.get("content_length", True):
                    self.send_header("Content-Length", str(len(body_out)))
                self.end_headers()
                if self.command != "HEAD":
                    self.wfile.write(body_out)

            do_GET = do_POST = do_PUT = do_PATCH = do_DELETE = do_HEAD = do_OPTIONS = _handle

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.server.daemon_threads = True
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self.thread.start()

    @property
    def base(self):
        host, port = self.server.server_address[:2]
        return f"http://{host}:{port}"

    def url(self, path="/"):
        return self.base + path

    def add(self, path, spec):
        with self._lock:
            self.routes[path] = spec

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def stub():
    server = StubServer()
    yield server
    server.close()


def photos_route():
    return {"status": 200, "headers": [("Content-Type", "application/json")], "body": PHOTOS_BODY}


def chat_reply(content):
    """A chat-completions response carrying ``content`` as the first choice."""
    return {
        "status": 200,
        "headers": [("Content-Type", "application/json")],
        "body": json.dumps({"id": "cmpl-1", "object": "chat.completion",
                            "choices": [{"index": 0, "message": {"role": "assistant", "content": content}}]}),
    }


# --------------------------------------------------------------------------
# acceptance summary: one PASS/FAIL line per criterion

_acceptance = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _acceptance[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, outcome in _acceptance.items():
        name = nodeid.split("::")[-1]
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")
