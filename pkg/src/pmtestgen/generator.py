"""Rule-based test generation from a single observed response."""

from __future__ import annotations

from typing import Any

from .dsl import (
    IDENTIFIER_RE,
    Assertion,
    BodyNotEmpty,
    HeaderPresent,
    JsonPath,
    JsonPathEquals,
    JsonPathIsNonEmptyArray,
    ResponseTimeBelow,
    StatusEquals,
    TestScript,
)
from .probe import ResponseCapture

DEFAULT_RESPONSE_TIME_MS = 200
MAX_EQUALITY_ASSERTIONS = 5


class CatalogExhausted(Exception):
    def __init__(self, available: int, requested: int):
        self.available = available
        self.requested = requested
        super().__init__(f"requested {requested} tests but only {available} can be derived from the response")


def _is_scalar(value: Any) -> bool:
    if isinstance(value, float):
        return value == value and value not in (float("inf"), float("-inf"))
    return value is None or isinstance(value, (bool, int, str))


def catalog(capture: ResponseCapture, response_time_ms: int = DEFAULT_RESPONSE_TIME_MS) -> list[TestScript]:
    """Every test the rules can derive from ``capture``, in priority order.

    Each entry is a claim that holds on the capture itself, so the status
    test always appears but the body, header, timing and JSON tests appear
    only when the response backs them up.
    """
    out: list[TestScript] = []

    def add(title: str, assertion: Assertion):
        out.append(TestScript(title, (assertion,)))

    add(f"Response status code is {capture.status}", StatusEquals(capture.status))
    if capture.body_bytes:
        add("Response body is not empty", BodyNotEmpty())
    if capture.has_header("content-type"):
        add("Response headers contain content-type", HeaderPresent("content-type"))
    if capture.latency_ms < response_time_ms:
        add(f"Response time is less than {response_time_ms}ms", ResponseTimeBelow(response_time_ms))

    body = capture.json_body if capture.is_json else None
    if not isinstance(body, dict):
        return out

    arrays = [key for key, value in body.items()
              if IDENTIFIER_RE.match(key) and isinstance(value, list) and value]
    for key in arrays:
        add(f"Response includes {key} data", JsonPathIsNonEmptyArray(JsonPath((key,))))

    if arrays:
        first = arrays[0]
        element = body[first][0]
        if isinstance(element, dict):
            emitted = 0
            for field, value in element.items():
                if emitted == MAX_EQUALITY_ASSERTIONS:
                    break
                if not IDENTIFIER_RE.match(field) or not _is_scalar(value):
                    continue
                add(f"Response has correct {field} parameter",
                    JsonPathEquals(JsonPath((first, 0, field)), value))
                emitted += 1
    return out


def generate_deterministic(
    capture: ResponseCapture, count: int, response_time_ms: int = DEFAULT_RESPONSE_TIME_MS
) -> list[TestScript]:
    if count < 1:
        raise ValueError("count must be at least 1")
    available = catalog(capture, response_time_ms)
    if count > len(available):
        raise CatalogExhausted(len(available), count)
    return available[:count]
