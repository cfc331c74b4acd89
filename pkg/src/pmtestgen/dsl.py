"""Assertion values, the Postman test-script renderer, and its parser.

Only a small subset of the Postman sandbox language is understood: a
sequence of ``pm.test("title", function () { ... });`` blocks whose bodies
hold the six expectation statements below. Anything else inside a block is
reported as :class:`UnsupportedStatement`; anything that is not even shaped
like a block is a :class:`ParseError`.

    pm.response.to.have.status(200);
    pm.expect(pm.response.text()).not.equal('');
    pm.response.to.have.header("content-type");
    pm.expect(pm.response.responseTime).to.be.below(200);
    pm.expect(pm.response.json().photos).to.be.an('array').that.is.not.empty;
    pm.expect(pm.response.json().photos[0].sol).to.equal(0);
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Union

MAX_PATH_SEGMENTS = 8

IDENTIFIER_RE = re.compile(r"[A-Za-z_$][A-Za-z0-9_$]*\Z")

Scalar = Union[None, bool, int, float, str]


class DslError(Exception):
    """Base class for script parsing failures."""


class ParseError(DslError):
    """The text is not a well-formed sequence of ``pm.test`` blocks."""

    def __init__(self, message: str, line: int, column: int, expected: Iterable[str] = ()):
        self.message = message
        self.line = line
        self.column = column
        self.expected = frozenset(expected)
        detail = f"line {line}, column {column}: {message}"
        if self.expected:
            detail += " (expected " + ", ".join(sorted(self.expected)) + ")"
        super().__init__(detail)


class UnsupportedStatement(DslError):
    """A statement inside a block is well-formed but outside the subset."""

    def __init__(self, text: str, line: int, column: int, reason: str = ""):
        self.text = text
        self.line = line
        self.column = column
        self.reason = reason
        detail = f"line {line}, column {column}: unsupported statement: {text}"
        if reason:
            detail += f" ({reason})"
        super().__init__(detail)


# --------------------------------------------------------------------------
# Values


@dataclass(frozen=True)
class JsonPath:
    """Field/index segments applied to ``pm.response.json()``.

    A ``str`` segment is an object field, an ``int`` segment an array index.
    """

    segments: tuple[Union[str, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if len(self.segments) > MAX_PATH_SEGMENTS:
            raise ValueError(f"path has more than {MAX_PATH_SEGMENTS} segments")
        for seg in self.segments:
            if isinstance(seg, bool) or not isinstance(seg, (str, int)):
                raise TypeError(f"invalid path segment {seg!r}")
            if isinstance(seg, int) and seg < 0:
                raise ValueError(f"negative index {seg}")
            if isinstance(seg, str) and not IDENTIFIER_RE.match(seg):
                raise ValueError(f"field {seg!r} is not an identifier")

    def render(self) -> str:
        return "".join(f"[{s}]" if isinstance(s, int) else f".{s}" for s in self.segments)

    def __str__(self):
        return self.render()


@dataclass(frozen=True)
class StatusEquals:
    code: int

    def __post_init__(self):
        if isinstance(self.code, bool) or not isinstance(self.code, int) or not 100 <= self.code <= 599:
            raise ValueError(f"status code must be an integer in [100, 599], got {self.code!r}")


@dataclass(frozen=True)
class BodyNotEmpty:
    pass


@dataclass(frozen=True)
class HeaderPresent:
    name: str

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise ValueError("header name must be non-empty")


@dataclass(frozen=True)
class ResponseTimeBelow:
    ms: int

    def __post_init__(self):
        if isinstance(self.ms, bool) or not isinstance(self.ms, int) or self.ms <= 0:
            raise ValueError(f"response time bound must be a positive integer, got {self.ms!r}")


@dataclass(frozen=True)
class JsonPathIsNonEmptyArray:
    path: JsonPath


def _scalar_key(value):
    # bool is an int subclass and 0 == 0.0 in Python; keep kinds apart so
    # that value equality matches rendered-text equality
    return type(value).__name__, value


@dataclass(frozen=True, eq=False)
class JsonPathEquals:
    path: JsonPath
    literal: Scalar

    def __post_init__(self):
        lit = self.literal
        if lit is not None and not isinstance(lit, (bool, int, float, str)):
            raise TypeError(f"literal must be a JSON scalar, got {type(lit).__name__}")
        if isinstance(lit, float) and (lit != lit or lit in (float("inf"), float("-inf"))):
            raise ValueError("literal must be a finite number")

    def __eq__(self, other):
        if not isinstance(other, JsonPathEquals):
            return NotImplemented
        return self.path == other.path and _scalar_key(self.literal) == _scalar_key(other.literal)

    def __hash__(self):
        return hash((self.path, _scalar_key(self.literal)))


Assertion = Union[
    StatusEquals, BodyNotEmpty, HeaderPresent, ResponseTimeBelow, JsonPathIsNonEmptyArray, JsonPathEquals
]
ASSERTION_TYPES = (
    StatusEquals, BodyNotEmpty, HeaderPresent, ResponseTimeBelow, JsonPathIsNonEmptyArray, JsonPathEquals
)


@dataclass(frozen=True)
class TestScript:
    """One ``pm.test`` block."""

    __test__ = False  # keep pytest from collecting this class

    title: str
    assertions: tuple[Assertion, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "assertions", tuple(self.assertions))
        if not isinstance(self.title, str) or not self.title:
            raise ValueError("test title must be non-empty")
        if not self.assertions:
            raise ValueError(f"test {self.title!r} has no assertions")
        for a in self.assertions:
            if not isinstance(a, ASSERTION_TYPES):
                raise TypeError(f"not an assertion: {a!r}")


# --------------------------------------------------------------------------
# Rendering


def render_literal(value: Scalar) -> str:
    if isinstance(value, str):
        return _quote(value)
    if isinstance(value, float):
        return repr(value)
    return json.dumps(value)


def _quote(text: str) -> str:
    return json.dumps(text, ensure_ascii=False)


def render_assertion(a: Assertion) -> str:
    """Render one assertion as its canonical statement (with trailing ``;``)."""
    if isinstance(a, StatusEquals):
        return f"pm.response.to.have.status({a.code});"
    if isinstance(a, BodyNotEmpty):
        return "pm.expect(pm.response.text()).not.equal('');"
    if isinstance(a, HeaderPresent):
        return f"pm.response.to.have.header({_quote(a.name)});"
    if isinstance(a, ResponseTimeBelow):
        return f"pm.expect(pm.response.responseTime).to.be.below({a.ms});"
    if isinstance(a, JsonPathIsNonEmptyArray):
        return f"pm.expect(pm.response.json(){a.path.render()}).to.be.an('array').that.is.not.empty;"
    if isinstance(a, JsonPathEquals):
        return f"pm.expect(pm.response.json(){a.path.render()}).to.equal({render_literal(a.literal)});"
    raise TypeError(f"not an assertion: {a!r}")


def render_script(scripts: Iterable[TestScript]) -> str:
    blocks = []
    for script in scripts:
        body = "".join(f"  {render_assertion(a)}\n" for a in script.assertions)
        blocks.append(f"pm.test({_quote(script.title)}, function () {{\n{body}}});")
    return "\n\n".join(blocks)


# --------------------------------------------------------------------------
# Tokenizer

_SCAN_RE = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<comment>//[^\n]*|/\*.*?\*/)"
    r"|(?P<arrow>=>)"
    r"|(?P<punct>[().,;{}\[\]-])"
    r"|(?P<num>\d+(?P<frac>\.\d+)?(?P<exp>[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_$][A-Za-z0-9_$]*)"
    r"|(?P<str>\"[^\"\\\n\r]*\"|'[^'\\\n\r]*')",
    re.S,
)

_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "b": "\b", "f": "\f", "v": "\v", "0": "\0"}


class Token(NamedTuple):
    kind: str  # ident | num | str | punct | arrow | eof | error
    value: object
    line: int
    column: int
    start: int
    end: int

    def describe(self) -> str:
        if self.kind == "eof":
            return "end of input"
        if self.kind == "str":
            return "string " + _quote(self.value)
        return repr(str(self.value))


class _Tokenizer:
    """Scans the whole text up front.

    A lexical error does not raise here; it ends the stream with an ``error``
    token so the parser reports whichever problem comes first in the source.
    """

    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.line_start = 0
        self.comments = 0

    def _error(self, message, expected=()):
        raise ParseError(message, self.line, self.pos - self.line_start + 1, expected)

    def _advance(self, n):
        self.pos += n

    def tokens(self) -> list[Token]:
        out: list[Token] = []
        try:
            self._scan(out)
        except ParseError as exc:
            out.append(Token("error", exc, exc.line, exc.column, self.pos, self.pos))
        return out

    def _scan(self, out):
        text = self.text
        size = len(text)
        match = _SCAN_RE.match
        append = out.append
        pos, line, line_start = 0, 1, 0
        while True:
            m = match(text, pos)
            if m is None:
                self.pos, self.line, self.line_start = pos, line, line_start
                if pos >= size:
                    append(Token("eof", None, line, pos - line_start + 1, pos, pos))
                    return
                ch = text[pos]
                if ch in "'\"":
                    col = pos - line_start + 1
                    value = self._string(ch)
                    append(Token("str", value, line, col, pos, self.pos))
                    pos = self.pos
                    continue
                if text.startswith("/*", pos):
                    self._error("unterminated comment", ["*/"])
                self._error(f"unexpected character {ch!r}")
            kind = m.lastgroup
            end = m.end()
            if kind == "ws" or kind == "comment":
                nl = text.rfind("\n", pos, end)
                if nl >= 0:
                    line += text.count("\n", pos, end)
                    line_start = nl + 1
                if kind == "comment":
                    self.comments += 1
            else:
                raw = m.group()
                if kind == "num":
                    value = float(raw) if (m.group("frac") or m.group("exp")) else int(raw)
                elif kind == "str":
                    value = raw[1:-1]
                else:
                    value = raw
                append(Token(kind, value, line, pos - line_start + 1, pos, end))
            pos = end

    def _string(self, quote):
        text = self.text
        self._advance(1)
        buf = []
        while True:
            if self.pos >= len(text):
                self._error("unterminated string", [quote])
            ch = text[self.pos]
            if ch == quote:
                self._advance(1)
                return "".join(buf)
            if ch in "\n\r":
                self._error("line break inside string", [quote])
            if ch != "\\":
                buf.append(ch)
                self._advance(1)
                continue
            if self.pos + 1 >= len(text):
                self._error("unterminated string", [quote])
            esc = text[self.pos + 1]
            if esc in _ESCAPES:
                buf.append(_ESCAPES[esc])
                self._advance(2)
            elif esc == "u":
                hexdigits = text[self.pos + 2:self.pos + 6]
                if len(hexdigits) != 4 or not all(c in "0123456789abcdefABCDEF" for c in hexdigits):
                    self._error("invalid \\u escape")
                code = int(hexdigits, 16)
                self._advance(6)
                # JSON-style surrogate pairs
                if 0xD800 <= code <= 0xDBFF and text.startswith("\\u", self.pos):
                    low_hex = text[self.pos + 2:self.pos + 6]
                    if len(low_hex) == 4 and all(c in "0123456789abcdefABCDEF" for c in low_hex):
                        low = int(low_hex, 16)
                        if 0xDC00 <= low <= 0xDFFF:
                            code = 0x10000 + ((code - 0xD800) << 10) + (low - 0xDC00)
                            self._advance(6)
                buf.append(chr(code))
            elif esc == "x":
                hexdigits = text[self.pos + 2:self.pos + 4]
                if len(hexdigits) != 2 or not all(c in "0123456789abcdefABCDEF" for c in hexdigits):
                    self._error("invalid \\x escape")
                buf.append(chr(int(hexdigits, 16)))
                self._advance(4)
            elif esc in "\n\r":
                self._error("line continuation inside string")
            else:
                buf.append(esc)
                self._advance(2)


# --------------------------------------------------------------------------
# Parser


class _NoMatch(Exception):
    pass


class _Statement:
    """Cursor over the tokens of one statement, used to try each form."""

    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0

    def _next(self) -> Token:
        if self.i >= len(self.tokens):
            raise _NoMatch
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def peek(self, kind, value=None) -> bool:
        if self.i >= len(self.tokens):
            return False
        tok = self.tokens[self.i]
        return tok.kind == kind and (value is None or tok.value == value)

    def chain(self, *words: str):
        """Match ``w0.w1.w2`` (no leading dot)."""
        for n, word in enumerate(words):
            if n:
                self.punct(".")
            tok = self._next()
            if tok.kind != "ident" or tok.value != word:
                raise _NoMatch

    def dotted(self, *words: str):
        """Match ``.w0.w1``."""
        for word in words:
            self.punct(".")
            tok = self._next()
            if tok.kind != "ident" or tok.value != word:
                raise _NoMatch

    def punct(self, p: str):
        tok = self._next()
        if tok.kind != "punct" or tok.value != p:
            raise _NoMatch

    def integer(self) -> int:
        tok = self._next()
        if tok.kind != "num" or not isinstance(tok.value, int):
            raise _NoMatch
        return tok.value

    def string(self) -> str:
        tok = self._next()
        if tok.kind != "str":
            raise _NoMatch
        return tok.value

    def literal(self) -> Scalar:
        tok = self._next()
        if tok.kind == "str":
            return tok.value
        if tok.kind == "num":
            return tok.value
        if tok.kind == "punct" and tok.value == "-":
            num = self._next()
            if num.kind != "num":
                raise _NoMatch
            return -num.value
        if tok.kind == "ident" and tok.value in ("true", "false", "null"):
            return {"true": True, "false": False, "null": None}[tok.value]
        raise _NoMatch

    def path(self) -> list[Union[str, int]]:
        segments: list[Union[str, int]] = []
        while True:
            if self.peek("punct", "."):
                save = self.i
                self.i += 1
                if self.peek("ident"):
                    segments.append(self._next().value)
                    continue
                self.i = save
                return segments
            if self.peek("punct", "["):
                self.i += 1
                segments.append(self.integer())
                self.punct("]")
                continue
            return segments

    def done(self):
        if self.i != len(self.tokens):
            raise _NoMatch


def _form_status(s: _Statement, warn):
    s.chain("pm", "response", "to", "have", "status")
    s.punct("(")
    code = s.integer()
    s.punct(")")
    s.done()
    return StatusEquals(code)


def _form_body_not_empty(s: _Statement, warn):
    s.chain("pm", "expect")
    s.punct("(")
    s.chain("pm", "response", "text")
    s.punct("(")
    s.punct(")")
    s.punct(")")
    s.punct(".")
    tok = s._next()
    if tok.kind == "ident" and tok.value == "to":
        warn(tok, "'.to.not.equal' accepted; canonical spelling is '.not.equal'")
        s.dotted("not")
    elif not (tok.kind == "ident" and tok.value == "not"):
        raise _NoMatch
    s.dotted("equal")
    s.punct("(")
    if s.string() != "":
        raise _NoMatch
    s.punct(")")
    s.done()
    return BodyNotEmpty()


def _form_header(s: _Statement, warn):
    s.chain("pm", "response", "to", "have", "header")
    s.punct("(")
    name = s.string()
    s.punct(")")
    s.done()
    return HeaderPresent(name)


def _form_response_time(s: _Statement, warn):
    s.chain("pm", "expect")
    s.punct("(")
    s.chain("pm", "response", "responseTime")
    s.punct(")")
    s.dotted("to", "be", "below")
    s.punct("(")
    ms = s.integer()
    s.punct(")")
    s.done()
    return ResponseTimeBelow(ms)


def _json_subject(s: _Statement) -> list:
    s.chain("pm", "expect")
    s.punct("(")
    s.chain("pm", "response", "json")
    s.punct("(")
    s.punct(")")
    segments = s.path()
    s.punct(")")
    return segments


def _form_non_empty_array(s: _Statement, warn):
    segments = _json_subject(s)
    s.dotted("to", "be", "an")
    s.punct("(")
    if s.string() != "array":
        raise _NoMatch
    s.punct(")")
    s.dotted("that", "is", "not", "empty")
    s.done()
    return JsonPathIsNonEmptyArray(JsonPath(segments))


def _form_equals(s: _Statement, warn):
    segments = _json_subject(s)
    s.dotted("to", "equal")
    s.punct("(")
    value = s.literal()
    s.punct(")")
    s.done()
    return JsonPathEquals(JsonPath(segments), value)


_FORMS = (
    _form_status, _form_body_not_empty, _form_header,
    _form_response_time, _form_non_empty_array, _form_equals,
)


class _Parser:
    """Recursive descent; a lexical error is raised only when parsing reaches it."""

    def __init__(self, text: str, tokens: list[Token]):
        self.text = text
        self.tokens = tokens
        self.i = 0
        self.warnings: list[str] = []

    @property
    def tok(self) -> Token:
        tok = self.tokens[self.i]
        if tok.kind == "error":
            raise tok.value
        return tok

    def _fail(self, expected: Iterable[str], tok: Token | None = None):
        tok = tok or self.tok
        raise ParseError(f"unexpected {tok.describe()}", tok.line, tok.column, expected)

    def _expect(self, kind: str, value=None, label: str | None = None) -> Token:
        tok = self.tok
        if tok.kind != kind or (value is not None and tok.value != value):
            self._fail([label or repr(value if value is not None else kind)])
        self.i += 1
        return tok

    def warn(self, tok: Token, message: str):
        self.warnings.append(f"line {tok.line}, column {tok.column}: {message}")

    def parse(self) -> list[TestScript]:
        scripts = []
        while self.tok.kind != "eof":
            scripts.append(self._block())
        return scripts

    def _block(self) -> TestScript:
        self._expect("ident", "pm", "'pm.test'")
        self._expect("punct", ".")
        self._expect("ident", "test", "'test'")
        self._expect("punct", "(")
        title_tok = self._expect("str", label="test title string")
        if title_tok.value == "":
            raise ParseError("empty test title", title_tok.line, title_tok.column)
        self._expect("punct", ",")
        self._function_head()
        self._expect("punct", "{")
        assertions = []
        while not (self.tok.kind == "punct" and self.tok.value == "}"):
            assertions.append(self._statement())
        close = self.tok
        if not assertions:
            raise ParseError("test block has no statements", close.line, close.column, ["statement"])
        self.i += 1
        self._expect("punct", ")")
        self._expect("punct", ";")
        return TestScript(title_tok.value, tuple(assertions))

    def _function_head(self):
        tok = self.tok
        if tok.kind == "ident" and tok.value == "function":
            self.i += 1
            self._expect("punct", "(")
            self._expect("punct", ")")
            return
        if tok.kind == "punct" and tok.value == "(":
            self.i += 1
            self._expect("punct", ")")
            self._expect("arrow", "=>")
            self.warn(tok, "arrow function accepted; canonical form is 'function ()'")
            return
        self._fail(["'function'", "'('"])

    def _statement(self):
        first = self.tok
        depth = 0
        body: list[Token] = []
        while True:
            tok = self.tok
            if tok.kind == "eof":
                self._fail(["';'"] if body else ["'}'"])
            if tok.kind == "punct":
                if tok.value in "([{":
                    depth += 1
                elif tok.value in ")]}":
                    if depth == 0:
                        if tok.value == "}" and body:
                            self._fail(["';'"])
                        self._fail(["';'", "statement"])
                    depth -= 1
                elif tok.value == ";" and depth == 0:
                    self.i += 1
                    break
            body.append(tok)
            self.i += 1
        if not body:
            raise ParseError("empty statement", first.line, first.column, ["statement"])
        source = self.text[body[0].start:body[-1].end]
        pending: list[tuple[Token, str]] = []
        for form in _FORMS:
            pending.clear()
            try:
                result = form(_Statement(body), lambda t, m: pending.append((t, m)))
            except _NoMatch:
                continue
            except (ValueError, TypeError) as exc:
                raise UnsupportedStatement(source, first.line, first.column, str(exc)) from None
            for t, m in pending:
                self.warn(t, m)
            return result
        raise UnsupportedStatement(source, first.line, first.column)


def parse_script_with_warnings(text: Union[str, bytes]) -> tuple[list[TestScript], list[str]]:
    """Parse script text into test blocks, returning ``(scripts, warnings)``.

    Warnings flag accepted non-canonical spellings and dropped comments.

    Raises:
        ParseError: structural problem, with line/column and expected tokens.
        UnsupportedStatement: a statement outside the supported subset.
    """
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"input is not valid UTF-8 at byte {exc.start}", 1, 1) from None
    if text.startswith("﻿"):
        text = text[1:]
    tokenizer = _Tokenizer(text)
    parser = _Parser(text, tokenizer.tokens())
    scripts = parser.parse()
    warnings = parser.warnings
    if tokenizer.comments:
        warnings.insert(0, f"{tokenizer.comments} comment(s) ignored")
    return scripts, warnings


def parse_script(text: Union[str, bytes]) -> list[TestScript]:
    return parse_script_with_warnings(text)[0]


def canonicalize(text: Union[str, bytes]) -> str:
    return render_script(parse_script(text))
