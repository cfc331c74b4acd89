"""Issue the single observation request and freeze what came back."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Optional
from urllib.parse import urlsplit

import httpx

from . import collection
from .collection import HTTP_METHODS, is_absolute_url

DEFAULT_TIMEOUT_MS = 10_000
DEFAULT_MAX_BODY_BYTES = 1024 * 1024
MAX_REDIRECTS = 5

# headers worth showing to a model; everything else is noise for test design
SUMMARY_HEADERS = ("content-type", "content-length", "cache-control", "location", "server")


class ProbeError(Exception):
    """Transport-level failure while probing."""


class InvalidUrl(ProbeError, collection.InvalidUrl):
    pass


class ConnectError(ProbeError):
    pass


class ProbeTimeout(ProbeError):
    pass


class BodyTooLarge(ProbeError):
    pass


_MISSING = object()


def _reject_constant(name):
    raise ValueError(f"{name} is not valid JSON")


def _decode_json(body: bytes):
    if not body:
        return _MISSING
    try:
        return json.loads(body, parse_constant=_reject_constant)
    except (ValueError, UnicodeDecodeError, RecursionError):
        return _MISSING


@dataclass(frozen=True)
class ResponseCapture:
    """One observed HTTP exchange.

    ``json_body`` is derived from ``body_bytes`` so it is present exactly when
    the body parses as JSON; check ``is_json`` since the JSON value may be
    ``null``.
    """

    status: int
    headers: tuple[tuple[str, str], ...] = ()
    body_bytes: bytes = b""
    latency_ms: int = 0
    final_url: str = ""

    def __post_init__(self):
        object.__setattr__(self, "headers", tuple((str(k), str(v)) for k, v in self.headers))
        object.__setattr__(self, "body_bytes", bytes(self.body_bytes))
        if isinstance(self.status, bool) or not isinstance(self.status, int) or not 100 <= self.status <= 599:
            raise ValueError(f"status must be in [100, 599], got {self.status!r}")
        if isinstance(self.latency_ms, bool) or not isinstance(self.latency_ms, int) or self.latency_ms < 0:
            raise ValueError(f"latency_ms must be a non-negative integer, got {self.latency_ms!r}")

    @cached_property
    def _json(self):
        return _decode_json(self.body_bytes)

    @property
    def is_json(self) -> bool:
        return self._json is not _MISSING

    @property
    def json_body(self) -> Any:
        value = self._json
        return None if value is _MISSING else value

    def header(self, name: str) -> Optional[str]:
        """Case-insensitive lookup; first match wins."""
        lowered = name.lower()
        for key, value in self.headers:
            if key.lower() == lowered:
                return value
        return None

    def has_header(self, name: str) -> bool:
        return self.header(name) is not None


@dataclass(frozen=True)
class ProbeConfig:
    url: str
    method: str = "GET"
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    max_body_bytes: int = DEFAULT_MAX_BODY_BYTES
    extra_headers: tuple[tuple[str, str], ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "extra_headers", tuple(tuple(h) for h in self.extra_headers))
        if self.method not in HTTP_METHODS:
            raise ValueError(f"unsupported method {self.method!r}")
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be positive")
        if self.max_body_bytes <= 0:
            raise ValueError("max_body_bytes must be positive")


def check_probe_url(url: str) -> None:
    if not is_absolute_url(url) or urlsplit(url).scheme.lower() not in ("http", "https"):
        raise InvalidUrl(f"not an absolute http(s) URL: {url!r}")


def probe(config: ProbeConfig, *, transport: Optional[httpx.BaseTransport] = None) -> ResponseCapture:
    """Send one request and capture the response.

    Redirects are followed (at most five hops). Non-2xx answers are returned
    as captures. ``latency_ms`` runs from just before the request is written
    until the last body byte has been read, redirects included.
    """
    check_probe_url(config.url)
    headers = {"Accept": "application/json"}
    headers.update(dict(config.extra_headers))
    timeout = config.timeout_ms / 1000
    client = httpx.Client(
        follow_redirects=True,
        max_redirects=MAX_REDIRECTS,
        timeout=timeout,
        trust_env=True,
        transport=transport,
    )
    try:
        with client:
            started = time.perf_counter()
            with client.stream(config.method, config.url, headers=headers) as response:
                declared = response.headers.get("content-length")
                if declared and declared.isdigit() and int(declared) > config.max_body_bytes:
                    raise BodyTooLarge(
                        f"declared body of {declared} bytes exceeds limit of {config.max_body_bytes}")
                chunks = []
                size = 0
                for chunk in response.iter_bytes():
                    size += len(chunk)
                    if size > config.max_body_bytes:
                        raise BodyTooLarge(f"body exceeds limit of {config.max_body_bytes} bytes")
                    chunks.append(chunk)
                    if time.perf_counter() - started > timeout:
                        raise ProbeTimeout(f"no complete response within {config.timeout_ms} ms")
                finished = time.perf_counter()
                raw_headers = [
                    (k.decode("latin-1"), v.decode("latin-1")) for k, v in response.headers.raw
                ]
                return ResponseCapture(
                    status=response.status_code,
                    headers=tuple(raw_headers),
                    body_bytes=b"".join(chunks),
                    latency_ms=max(0, round((finished - started) * 1000)),
                    final_url=str(response.url),
                )
    except httpx.TimeoutException as exc:
        raise ProbeTimeout(f"timed out after {config.timeout_ms} ms: {exc}") from None
    except httpx.TooManyRedirects:
        raise ConnectError(f"more than {MAX_REDIRECTS} redirects") from None
    except httpx.UnsupportedProtocol as exc:
        raise InvalidUrl(str(exc)) from None
    except (httpx.TransportError, httpx.InvalidURL) as exc:
        raise ConnectError(f"{type(exc).__name__}: {exc or 'connection failed'}") from None


def _body_preview(c: ResponseCapture) -> str:
    if c.is_json:
        return "Body (JSON):\n" + json.dumps(c.json_body, indent=2, ensure_ascii=False)
    if not c.body_bytes:
        return "Body: (empty)"
    return "Body (text):\n" + c.body_bytes.decode("utf-8", errors="replace")


def summarize_capture(c: ResponseCapture, max_chars: int = 2000) -> str:
    """Deterministic plain-text digest of a capture, at most ``max_chars`` long."""
    if max_chars <= 0:
        raise ValueError("max_chars must be positive")
    lines = [f"Status: {c.status}"]
    if c.final_url:
        lines.append(f"URL: {c.final_url}")
    lines.append(f"Response time: {c.latency_ms} ms")
    for name in SUMMARY_HEADERS:
        value = c.header(name)
        if value is not None:
            lines.append(f"Header {name}: {value}")
    if c.is_json and isinstance(c.json_body, dict):
        lines.append("Top-level keys: " + ", ".join(str(k) for k in c.json_body))
    lines.append(_body_preview(c))
    text = "\n".join(lines)
    if len(text) <= max_chars:
        return text
    marker = "\n...[truncated]"
    if max_chars <= len(marker):
        return text[:max_chars]
    return text[: max_chars - len(marker)] + marker

