import itertools
import json
import socket

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pmtestgen.collection import build_collection
from pmtestgen.dsl import (
    BodyNotEmpty,
    HeaderPresent,
    JsonPath,
    JsonPathEquals,
    JsonPathIsNonEmptyArray,
    ResponseTimeBelow,
    StatusEquals,
    TestScript,
    parse_script,
    render_assertion,
)
from pmtestgen.probe import ResponseCapture
from pmtestgen.runner import AssertionResult, RunReport, eval_assertion, run_collection, run_scripts

from conftest import GOLDEN, photos_route
from oracle import oracle

P = JsonPath

STATUSES = [200, 404]
HEADER_SETS = [[], [("Content-Type", "application/json")], [("X-Other", "1")]]
BODIES = [
    b"",
    b"plain text",
    b"null",
    b"[1, 2]",
    b'{"a": []}',
    b'{"a": [{"b": 0, "c": "x", "d": true, "e": null}]}',
    b'{"a": [{"b": 0.0}], "f": {"g": [1]}}',
    b'{"a": "str", "b": false}',
    b"{bad json",
]
LATENCIES = [0, 199, 200, 250]

ASSERTIONS = [
    StatusEquals(200), StatusEquals(404), StatusEquals(500),
    BodyNotEmpty(),
    HeaderPresent("content-type"), HeaderPresent("CONTENT-TYPE"), HeaderPresent("x-other"), HeaderPresent("missing"),
    ResponseTimeBelow(1), ResponseTimeBelow(199), ResponseTimeBelow(200), ResponseTimeBelow(201),
    ResponseTimeBelow(1000),
    JsonPathIsNonEmptyArray(P()), JsonPathIsNonEmptyArray(P(("a",))), JsonPathIsNonEmptyArray(P(("a", 0))),
    JsonPathIsNonEmptyArray(P(("f", "g"))), JsonPathIsNonEmptyArray(P(("b",))),
    JsonPathEquals(P(("a", 0, "b")), 0), JsonPathEquals(P(("a", 0, "b")), 0.0),
    JsonPathEquals(P(("a", 0, "b")), "0"), JsonPathEquals(P(("a", 0, "b")), False),
    JsonPathEquals(P(("a", 0, "c")), "x"), JsonPathEquals(P(("a", 0, "d")), True),
    JsonPathEquals(P(("a", 0, "d")), 1), JsonPathEquals(P(("a", 0, "e")), None),
    JsonPathEquals(P(("b",)), False), JsonPathEquals(P(("a",)), "str"), JsonPathEquals(P(), None),
    JsonPathEquals(P(("f", "g", 0)), 1), JsonPathEquals(P(("f", "g", 0)), 1.0), JsonPathEquals(P(("a", 5, "b")), 0),
    JsonPathEquals(P((0,)), 1),
]


def enumerated_cases():
    for status, headers, body, latency in itertools.product(STATUSES, HEADER_SETS, BODIES, LATENCIES):
        yield {"status": status, "headers": headers, "body": body, "latency": latency}


def to_capture(case):
    return ResponseCapture(case["status"], tuple(case["headers"]), case["body"], case["latency"])


def oracle_disagreements():
    cases = list(enumerated_cases())
    mismatches = []
    for case in cases:
        capture = to_capture(case)
        for a in ASSERTIONS:
            got = eval_assertion(a, capture).passed
            want = oracle(render_assertion(a), case)
            if got != want:
                mismatches.append((case, a, got, want))
    return len(cases), mismatches


class TestEvalAssertion:
    def test_status(self):
        assert eval_assertion(StatusEquals(200), ResponseCapture(200)).passed

    def test_below_is_strict(self):
        result = eval_assertion(ResponseTimeBelow(200), ResponseCapture(200, latency_ms=200))
        assert not result.passed
        assert "200 ms" in result.message

    def test_header_case_insensitive(self):
        c = ResponseCapture(200, headers=(("Content-Type", "application/json"),))
        assert eval_assertion(HeaderPresent("content-type"), c).passed

    def test_integer_valued_decimal(self):
        c = ResponseCapture(200, body_bytes=b'{"x": 0.0}')
        assert eval_assertion(JsonPathEquals(P(("x",)), 0), c).passed
        assert not eval_assertion(JsonPathEquals(P(("x",)), "0"), c).passed

    def test_messages(self):
        assert eval_assertion(JsonPathEquals(P(("x",)), 1), ResponseCapture(200, body_bytes=b"hi")).message == \
            "body is not JSON"
        r = eval_assertion(JsonPathEquals(P(("x", 0)), 1), ResponseCapture(200, body_bytes=b'{"y": 1}'))
        assert r.message == "path not found: .x[0]"

    def test_pass_has_empty_message(self):
        with pytest.raises(ValueError):
            AssertionResult(StatusEquals(200), True, "oops")

    def test_oracle_table(self):
        n_cases, mismatches = oracle_disagreements()
        assert n_cases >= 200
        assert mismatches == []

    @given(st.integers(0, 10_000), st.integers(1, 10_000), st.integers(1, 10_000))
    def test_monotone_threshold(self, latency, t, bump):
        c = ResponseCapture(200, latency_ms=latency)
        if eval_assertion(ResponseTimeBelow(t), c).passed:
            assert eval_assertion(ResponseTimeBelow(t + bump), c).passed


class TestRunScripts:
    def test_golden_all_pass(self, photos_capture):
        report = run_scripts(parse_script(GOLDEN), photos_capture)
        assert (report.passed_count, report.failed_count) == (6, 0)
        assert report.ok

    def test_status_failure_is_independent(self, photos_capture):
        c = ResponseCapture(404, photos_capture.headers, photos_capture.body_bytes, 150)
        report = run_scripts(parse_script(GOLDEN), c)
        assert (report.passed_count, report.failed_count) == (5, 1)
        title, [result] = report.per_script[0]
        assert title == "Response status code is 200" and not result.passed

    def test_no_short_circuit(self):
        script = TestScript("multi", [StatusEquals(500), BodyNotEmpty(), StatusEquals(501)])
        report = run_scripts([script], ResponseCapture(200))
        assert report.failed_count == 3

    def test_empty(self, photos_capture):
        report = run_scripts([], photos_capture)
        assert (report.passed_count, report.failed_count) == (0, 0)

    def test_json_report(self, photos_capture):
        c = ResponseCapture(404, photos_capture.headers, photos_capture.body_bytes, 150)
        doc = json.loads(run_scripts(parse_script(GOLDEN), c).to_json())
        assert set(doc) == {"scripts", "passed_count", "failed_count"}
        first = doc["scripts"][0]
        assert first["title"] == "Response status code is 200"
        assert first["results"][0] == {"assertion": "pm.response.to.have.status(200);", "passed": False,
                                       "message": "expected status 200, got 404"}

    def test_text_report(self, photos_capture):
        text = run_scripts(parse_script(GOLDEN), photos_capture).to_text()
        assert text.splitlines()[-1] == "6/6 assertions passed"

    def test_counts_invariant(self):
        report = RunReport((("a", (AssertionResult(None, False, "x"),)),))
        assert report.passed_count + report.failed_count == 1


class TestRunCollection:
    def test_against_stub(self, stub):
        stub.add("/photos", photos_route())
        collection = build_collection("mars", stub.url("/photos"), "GET", parse_script(GOLDEN))
        report = run_collection(collection)
        assert (report.passed_count, report.failed_count) == (6, 0)

    def test_url_override(self, stub):
        stub.add("/photos", photos_route())
        collection = build_collection("mars", "https://api.nasa.gov/photos", "GET", parse_script(GOLDEN))
        report = run_collection(collection, url_override=stub.url("/photos"))
        assert report.ok
        assert stub.requests[0]["path"] == "/photos"

    def test_unreachable(self):
        with socket.socket() as s:
            s.bind(("127.0.0.1", 0))
            port = s.getsockname()[1]
        collection = build_collection("down", f"http://127.0.0.1:{port}/", "GET", parse_script(GOLDEN))
        report = run_collection(collection)
        assert report.failed_count == 1 and report.passed_count == 0
        title, [result] = report.per_script[0]
        assert result.assertion is None and result.message.startswith("ConnectError")
