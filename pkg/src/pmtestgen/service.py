"""HTTP front end: POST /chat generates tests, GET /download/<id> serves the collection."""

from __future__ import annotations

import json
import logging
import random
import re
import secrets
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Callable, Optional, Sequence

from .collection import FILE_SUFFIX, HTTP_METHODS, PostmanCollection, is_absolute_url, serialize_collection
from .corpus import ExemplarRecord
from .generator import CatalogExhausted
from .llm import ProviderConfig
from .pipeline import MAX_COUNT, MODES, GenerationJob, run_job
from .probe import ProbeError, probe

log = logging.getLogger(__name__)

DEFAULT_PORT = 3011
DOWNLOAD_TTL_S = 3600.0


class ServiceError(Exception):
    def __init__(self, status: int, message: str, **extra: Any):
        self.status = status
        self.message = message
        self.extra = extra
        super().__init__(message)

    def body(self) -> dict[str, Any]:
        return {"error": self.message, **self.extra}


@dataclass(frozen=True)
class GenerateRequest:
    api_url: str
    count: int
    mode: str
    method: str = "GET"

    @classmethod
    def from_payload(cls, payload: Any, llm_available: bool) -> "GenerateRequest":
        if not isinstance(payload, dict):
            raise ServiceError(400, "request body must be a JSON object")
        api_url = payload.get("api_url")
        if not isinstance(api_url, str) or not is_absolute_url(api_url):
            raise ServiceError(400, "api_url must be an absolute URL")
        count = payload.get("count")
        if isinstance(count, bool) or not isinstance(count, int) or not 1 <= count <= MAX_COUNT:
            raise ServiceError(400, f"count must be an integer between 1 and {MAX_COUNT}")
        mode = payload.get("mode")
        if mode is None:
            mode = "llm" if llm_available else "deterministic"
        if mode not in MODES:
            raise ServiceError(400, f"mode must be one of {', '.join(MODES)}")
        if mode == "llm" and not llm_available:
            raise ServiceError(400, "llm mode requested but no provider is configured")
        method = payload.get("method", "GET")
        if not isinstance(method, str) or method.upper() not in HTTP_METHODS:
            raise ServiceError(400, f"method must be one of {', '.join(sorted(HTTP_METHODS))}")
        return cls(api_url=api_url, count=count, mode=mode, method=method.upper())


@dataclass(frozen=True)
class GenerateResponse:
    script_text: str
    download_id: str
    diagnostics: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {"script_text": self.script_text, "download_id": self.download_id,
                "diagnostics": list(self.diagnostics)}


class DownloadStore:
    """In-memory collections keyed by random ids, each living for ``ttl_s`` seconds."""

    def __init__(self, ttl_s: float = DOWNLOAD_TTL_S, clock: Callable[[], float] = time.monotonic):
        self.ttl_s = ttl_s
        self.clock = clock
        self._entries: dict[str, tuple[float, PostmanCollection, bytes]] = {}
        self._lock = threading.Lock()

    def put(self, collection: PostmanCollection) -> str:
        download_id = secrets.token_hex(16)
        data = serialize_collection(collection)
        with self._lock:
            self._purge()
            self._entries[download_id] = (self.clock() + self.ttl_s, collection, data)
        return download_id

    def get(self, download_id: str) -> Optional[tuple[PostmanCollection, bytes]]:
        with self._lock:
            self._purge()
            entry = self._entries.get(download_id)
        return None if entry is None else entry[1:]

    def _purge(self):
        now = self.clock()
        for key in [k for k, (expires, _, _) in self._entries.items() if expires <= now]:
            del self._entries[key]

    def __len__(self):
        with self._lock:
            self._purge()
            return len(self._entries)


def attachment_filename(name: str) -> str:
    safe = re.sub(r"[^A-Za-z0-9._-]+", "-", name).strip("-.") or "collection"
    return safe + FILE_SUFFIX


class GenerationService:
    """Transport-independent core behind the HTTP handler."""

    def __init__(
        self,
        provider: Optional[ProviderConfig] = None,
        corpus: Sequence[ExemplarRecord] = (),
        store: Optional[DownloadStore] = None,
        rng: Optional[random.Random] = None,
        probe_fn: Callable = probe,
    ):
        self.provider = provider
        self.corpus = list(corpus)
        self.store = store if store is not None else DownloadStore()
        self.probe_fn = probe_fn
        self._rng = rng
        self._rng_lock = threading.Lock()

    def handle_generate(self, payload: Any) -> GenerateResponse:
        req = GenerateRequest.from_payload(payload, self.provider is not None)
        job = GenerationJob(
            target_url=req.api_url, count=req.count, method=req.method, mode=req.mode,
            provider=self.provider if req.mode == "llm" else None,
        )
        try:
            rng = self._reserve_id_draw()
            done = run_job(job, corpus=self.corpus, rng=rng, probe_fn=self.probe_fn)
        except ProbeError as exc:
            raise ServiceError(502, f"{type(exc).__name__}: {exc}") from None
        except CatalogExhausted as exc:
            raise ServiceError(422, str(exc), available=exc.available) from None
        download_id = self.store.put(done.outcome.collection)
        return GenerateResponse(done.outcome.script_text, download_id, done.outcome.diagnostics)

    def _reserve_id_draw(self) -> Optional[random.Random]:
        # hand the job a copy positioned at the next UUID draw, then advance
        # the shared generator past it; a seeded service then issues the same
        # id sequence as random.Random(seed) used directly
        if self._rng is None:
            return None
        with self._rng_lock:
            copy = random.Random()
            copy.setstate(self._rng.getstate())
            self._rng.getrandbits(128)
        return copy

    def handle_download(self, download_id: str) -> tuple[bytes, str]:
        """Return ``(bytes, filename)`` for a stored collection."""
        entry = self.store.get(download_id)
        if entry is None:
            raise ServiceError(404, "unknown or expired download id")
        collection, data = entry
        return data, attachment_filename(collection.info_name)

    def usage(self) -> dict[str, Any]:
        return {
            "service": "pmtestgen",
            "status": "ready",
            "llm_configured": self.provider is not None,
            "endpoints": {
                "POST /chat": {
                    "body": {"api_url": "absolute URL", "count": f"integer 1..{MAX_COUNT}",
                             "mode": "deterministic | llm (optional)", "method": "HTTP method (optional, GET)"},
                    "returns": {"script_text": "text", "download_id": "text", "diagnostics": ["text"]},
                },
                "GET /download/{id}": "Postman Collection v2.1 JSON attachment",
            },
        }


class _Handler(BaseHTTPRequestHandler):
    service: GenerationService  # set on the per-server subclass
    server_version = "pmtestgen"
    protocol_version = "HTTP/1.1"

    def log_message(self, format, *args):
        log.info("%s - %s", self.address_string(), format % args)

    def _send(self, status: int, body: bytes, content_type: str, extra_headers=()):
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        for k, v in extra_headers:
            self.send_header(k, v)
        self.end_headers()
        if self.command != "HEAD":
            self.wfile.write(body)

    def _send_json(self, status: int, doc: Any):
        body = json.dumps(doc, ensure_ascii=False).encode("utf-8")
        self._send(status, body, "application/json; charset=utf-8")

    def _error(self, exc: ServiceError):
        self._send_json(exc.status, exc.body())

    def do_GET(self):
        path = self.path.split("?", 1)[0]
        if path == "/":
            self._send_json(200, self.service.usage())
        elif path.startswith("/download/"):
            try:
                data, filename = self.service.handle_download(path[len("/download/"):])
            except ServiceError as exc:
                self._error(exc)
                return
            self._send(200, data, "application/json",
                       [("Content-Disposition", f'attachment; filename="{filename}"')])
        elif path == "/chat":
            self._error(ServiceError(405, "use POST /chat with a JSON body"))
        else:
            self._error(ServiceError(404, f"no route for {path}"))

    def do_POST(self):
        try:
            length = int(self.headers.get("Content-Length") or 0)
        except ValueError:
            length = 0
        # drain the body even when rejecting, or the kept-alive connection desyncs
        raw = self.rfile.read(length) if length > 0 else b""
        path = self.path.split("?", 1)[0]
        if path != "/chat":
            self._error(ServiceError(404, f"no route for {path}"))
            return
        try:
            payload = json.loads(raw or b"null")
        except (ValueError, UnicodeDecodeError):
            self._error(ServiceError(400, "request body is not valid JSON"))
            return
        try:
            result = self.service.handle_generate(payload)
        except ServiceError as exc:
            self._error(exc)
            return
        except Exception:
            log.exception("generation failed")
            self._error(ServiceError(500, "internal error"))
            return
        self._send_json(200, result.to_dict())


def make_server(service: GenerationService, host: str = "127.0.0.1", port: int = DEFAULT_PORT) -> ThreadingHTTPServer:
    handler = type("Handler", (_Handler,), {"service": service})
    server = ThreadingHTTPServer((host, port), handler)
    server.daemon_threads = True
    return server


def serve(service: GenerationService, host: str = "127.0.0.1", port: int = DEFAULT_PORT) -> None:
    server = make_server(service, host, port)
    log.info("listening on http://%s:%d", host, server.server_address[1])
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
