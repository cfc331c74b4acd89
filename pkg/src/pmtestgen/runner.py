"""Evaluate assertions against captured responses, without Postman."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

from .collection import PostmanCollection
from .dsl import (
    Assertion,
    BodyNotEmpty,
    HeaderPresent,
    JsonPath,
    JsonPathEquals,
    JsonPathIsNonEmptyArray,
    ResponseTimeBelow,
    StatusEquals,
    TestScript,
    render_assertion,
)
from .probe import ProbeConfig, ProbeError, ResponseCapture, probe


@dataclass(frozen=True)
class AssertionResult:
    # None only for transport pseudo-results produced by run_collection
    assertion: Optional[Assertion]
    passed: bool
    message: str = ""

    def __post_init__(self):
        if self.passed and self.message:
            raise ValueError("a passing result carries no message")


@dataclass(frozen=True)
class RunReport:
    per_script: tuple[tuple[str, tuple[AssertionResult, ...]], ...] = ()
    passed_count: int = field(init=False)
    failed_count: int = field(init=False)

    def __post_init__(self):
        per_script = tuple((title, tuple(results)) for title, results in self.per_script)
        object.__setattr__(self, "per_script", per_script)
        results = [r for _, rs in per_script for r in rs]
        object.__setattr__(self, "passed_count", sum(r.passed for r in results))
        object.__setattr__(self, "failed_count", sum(not r.passed for r in results))

    @property
    def ok(self) -> bool:
        return self.failed_count == 0

    def merged(self, other: "RunReport") -> "RunReport":
        return RunReport(self.per_script + other.per_script)

    def to_dict(self) -> dict[str, Any]:
        return {
            "scripts": [
                {
                    "title": title,
                    "results": [
                        {
                            "assertion": render_assertion(r.assertion) if r.assertion is not None else None,
                            "passed": r.passed,
                            "message": r.message,
                        }
                        for r in results
                    ],
                }
                for title, results in self.per_script
            ],
            "passed_count": self.passed_count,
            "failed_count": self.failed_count,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False)

    def to_text(self) -> str:
        lines = []
        for title, results in self.per_script:
            for r in results:
                mark = "PASS" if r.passed else "FAIL"
                line = f"[{mark}] {title}"
                if not r.passed:
                    line += f": {r.message}"
                lines.append(line)
        total = self.passed_count + self.failed_count
        lines.append(f"{self.passed_count}/{total} assertions passed")
        return "\n".join(lines)


_NOT_FOUND = object()


def resolve_path(document: Any, path: JsonPath) -> Any:
    node = document
    for seg in path.segments:
        if isinstance(seg, int):
            if not isinstance(node, list) or seg >= len(node):
                return _NOT_FOUND
            node = node[seg]
        else:
            if not isinstance(node, dict) or seg not in node:
                return _NOT_FOUND
            node = node[seg]
    return node


def json_equal(actual: Any, literal: Any) -> bool:
    """Scalar equality where 0 == 0.0 but booleans, numbers and strings stay apart."""
    if isinstance(literal, bool) or isinstance(actual, bool):
        return isinstance(literal, bool) and isinstance(actual, bool) and actual is literal
    if isinstance(literal, (int, float)):
        return isinstance(actual, (int, float)) and actual == literal
    if isinstance(literal, str):
        return isinstance(actual, str) and actual == literal
    if literal is None:
        return actual is None
    return False


def _describe(value: Any) -> str:
    return json.dumps(value, ensure_ascii=False)[:80]


def _check(a: Assertion, c: ResponseCapture) -> str:
    """Return an empty string on success, else the failure message."""
    if isinstance(a, StatusEquals):
        return "" if c.status == a.code else f"expected status {a.code}, got {c.status}"
    if isinstance(a, BodyNotEmpty):
        return "" if c.body_bytes else "response body is empty"
    if isinstance(a, HeaderPresent):
        return "" if c.has_header(a.name) else f"header {a.name!r} not present"
    if isinstance(a, ResponseTimeBelow):
        if c.latency_ms < a.ms:
            return ""
        return f"response time {c.latency_ms} ms is not below {a.ms} ms"
    if isinstance(a, (JsonPathIsNonEmptyArray, JsonPathEquals)):
        if not c.is_json:
            return "body is not JSON"
        value = resolve_path(c.json_body, a.path)
        where = a.path.render() or "(root)"
        if value is _NOT_FOUND:
            return f"path not found: {where}"
        if isinstance(a, JsonPathIsNonEmptyArray):
            if not isinstance(value, list):
                return f"{where} is not an array"
            return "" if value else f"{where} is an empty array"
        if json_equal(value, a.literal):
            return ""
        return f"{where} is {_describe(value)}, expected {_describe(a.literal)}"
    raise TypeError(f"not an assertion: {a!r}")


def eval_assertion(a: Assertion, c: ResponseCapture) -> AssertionResult:
    message = _check(a, c)
    return AssertionResult(assertion=a, passed=not message, message=message)


def run_scripts(scripts: Sequence[TestScript], c: ResponseCapture) -> RunReport:
    """Evaluate every assertion of every script; blocks never stop at the first failure."""
    return RunReport(
        tuple((s.title, tuple(eval_assertion(a, c) for a in s.assertions)) for s in scripts)
    )


def run_collection(
    collection: PostmanCollection,
    url_override: Optional[str] = None,
    probe_config: Optional[ProbeConfig] = None,
    probe_fn: Callable[[ProbeConfig], ResponseCapture] = probe,
) -> RunReport:
    """Probe each item's endpoint in order and run its test event.

    ``probe_config`` supplies timeout/body limits/headers; its URL and method
    are replaced per item. Transport failures become a failed pseudo-result
    for that item instead of aborting the run.
    """
    report = RunReport()
    for item in collection.items:
        url = url_override or item.request_url
        base = probe_config or ProbeConfig(url=url, method=item.request_method)
        config = ProbeConfig(
            url=url,
            method=item.request_method,
            timeout_ms=base.timeout_ms,
            max_body_bytes=base.max_body_bytes,
            extra_headers=base.extra_headers,
        )
        try:
            capture = probe_fn(config)
        except ProbeError as exc:
            failed = AssertionResult(None, False, f"{type(exc).__name__}: {exc}")
            report = report.merged(RunReport(((f"{item.name} (request)", (failed,)),)))
            continue
        report = report.merged(run_scripts(item.scripts(), capture))
    return report
