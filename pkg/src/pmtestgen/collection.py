"""Postman Collection v2.1 model with deterministic JSON serialization."""

from __future__ import annotations

import json
import random
import uuid
from dataclasses import dataclass
from typing import Any, Optional, Sequence
from urllib.parse import parse_qsl, urlsplit

from .dsl import DslError, TestScript, parse_script_with_warnings, render_script

SCHEMA_URL = "https://schema.getpostman.com/json/collection/v2.1.0/collection.json"
FILE_SUFFIX = ".postman_collection.json"
HTTP_METHODS = frozenset({"GET", "POST", "PUT", "PATCH", "DELETE", "HEAD", "OPTIONS"})


class CollectionError(Exception):
    pass


class EmptyScripts(CollectionError):
    pass


class InvalidUrl(CollectionError, ValueError):
    pass


class MalformedJson(CollectionError):
    pass


class SchemaMismatch(CollectionError):
    pass


class InvariantViolation(CollectionError):
    """A document field breaks a model invariant; ``path`` locates it."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def is_absolute_url(url: str) -> bool:
    if not isinstance(url, str) or not url or any(c.isspace() for c in url):
        return False
    try:
        parts = urlsplit(url)
        parts.port  # raises on a malformed port
    except ValueError:
        return False
    return bool(parts.scheme and parts.netloc and parts.hostname)


@dataclass(frozen=True)
class CollectionItem:
    name: str
    request_method: str
    request_url: str
    test_script_lines: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "test_script_lines", tuple(self.test_script_lines))
        if not isinstance(self.name, str):
            raise InvariantViolation("name", "must be text")
        if self.request_method not in HTTP_METHODS:
            raise InvariantViolation("request.method", f"unsupported method {self.request_method!r}")
        if not is_absolute_url(self.request_url):
            raise InvariantViolation("request.url", f"not an absolute URL: {self.request_url!r}")
        if any(not isinstance(line, str) or "\n" in line for line in self.test_script_lines):
            raise InvariantViolation("event.script.exec", "script lines must be single-line text")
        try:
            parse_script_with_warnings(self.script_text)
        except DslError as exc:
            raise InvariantViolation("event.script.exec", str(exc)) from None

    @property
    def script_text(self) -> str:
        return "\n".join(self.test_script_lines)

    def scripts(self) -> list[TestScript]:
        return parse_script_with_warnings(self.script_text)[0]


@dataclass(frozen=True)
class PostmanCollection:
    info_name: str
    info_id: str
    items: tuple[CollectionItem, ...]
    schema_url: str = SCHEMA_URL

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        if self.schema_url != SCHEMA_URL:
            raise InvariantViolation("info.schema", f"expected {SCHEMA_URL}")
        try:
            uuid.UUID(self.info_id)
        except (ValueError, TypeError, AttributeError):
            raise InvariantViolation("info._postman_id", f"not a UUID: {self.info_id!r}") from None
        if not isinstance(self.info_name, str):
            raise InvariantViolation("info.name", "must be text")
        if not self.items:
            raise InvariantViolation("item", "collection has no items")


def new_collection_id(rng: Optional[random.Random] = None) -> str:
    if rng is None:
        return str(uuid.uuid4())
    return str(uuid.UUID(int=rng.getrandbits(128), version=4))


def build_collection(
    name: str,
    url: str,
    method: str,
    scripts: Sequence[TestScript],
    rng: Optional[random.Random] = None,
) -> PostmanCollection:
    """Wrap rendered scripts in a single-item collection.

    ``rng`` seeds the collection UUID; leave it ``None`` for a random one.
    """
    if not scripts:
        raise EmptyScripts("at least one test script is required")
    if not is_absolute_url(url):
        raise InvalidUrl(f"not an absolute URL: {url!r}")
    lines = render_script(scripts).split("\n")
    item = CollectionItem(name=name, request_method=method.upper(), request_url=url, test_script_lines=lines)
    return PostmanCollection(info_name=name, info_id=new_collection_id(rng), items=(item,))


# --------------------------------------------------------------------------
# JSON


def _url_object(url: str) -> dict[str, Any]:
    parts = urlsplit(url)
    obj: dict[str, Any] = {"raw": url, "protocol": parts.scheme}
    obj["host"] = parts.hostname.split(".") if parts.hostname else []
    if parts.port is not None:
        obj["port"] = str(parts.port)
    obj["path"] = [seg for seg in parts.path.split("/") if seg]
    if parts.query:
        obj["query"] = [{"key": k, "value": v} for k, v in parse_qsl(parts.query, keep_blank_values=True)]
    return obj


def to_document(c: PostmanCollection) -> dict[str, Any]:
    return {
        "info": {"_postman_id": c.info_id, "name": c.info_name, "schema": c.schema_url},
        "item": [
            {
                "name": item.name,
                "event": [
                    {
                        "listen": "test",
                        "script": {"type": "text/javascript", "exec": list(item.test_script_lines)},
                    }
                ],
                "request": {"method": item.request_method, "header": [], "url": _url_object(item.request_url)},
            }
            for item in c.items
        ],
    }


def serialize_collection(c: PostmanCollection) -> bytes:
    return json.dumps(to_document(c), indent=2, ensure_ascii=False).encode("utf-8")


_KNOWN = {
    "": {"info", "item"},
    "info": {"_postman_id", "name", "schema"},
    "item": {"name", "event", "request"},
    "event": {"listen", "script"},
    "script": {"type", "exec"},
    "request": {"method", "header", "url"},
    "url": {"raw", "protocol", "host", "port", "path", "query"},
}


def _note_unknown(obj: dict, kind: str, path: str, warnings: list[str]):
    for key in obj:
        if key not in _KNOWN[kind]:
            warnings.append(f"{path}.{key}: unknown field ignored" if path else f"{key}: unknown field ignored")


def _require(obj: Any, key: str, typ, path: str):
    if not isinstance(obj, dict) or key not in obj:
        raise InvariantViolation(path, "missing field")
    value = obj[key]
    if not isinstance(value, typ):
        raise InvariantViolation(path, f"expected {getattr(typ, '__name__', typ)}")
    return value


def _parse_item(raw: Any, path: str, warnings: list[str]) -> CollectionItem:
    if not isinstance(raw, dict):
        raise InvariantViolation(path, "item must be an object")
    if "item" in raw:
        raise InvariantViolation(f"{path}.item", "folders are not supported")
    _note_unknown(raw, "item", path, warnings)
    name = _require(raw, "name", str, f"{path}.name")
    request = _require(raw, "request", (dict, str), f"{path}.request")
    if isinstance(request, str):
        method, url = "GET", request
    else:
        _note_unknown(request, "request", f"{path}.request", warnings)
        method = request.get("method", "GET")
        if not isinstance(method, str):
            raise InvariantViolation(f"{path}.request.method", "expected str")
        url_field = _require(request, "url", (dict, str), f"{path}.request.url")
        if isinstance(url_field, dict):
            _note_unknown(url_field, "url", f"{path}.request.url", warnings)
            url = _require(url_field, "raw", str, f"{path}.request.url.raw")
        else:
            url = url_field
    if method not in HTTP_METHODS:
        raise InvariantViolation(f"{path}.request.method", f"unsupported method {method!r}")
    if not is_absolute_url(url):
        raise InvariantViolation(f"{path}.request.url", f"not an absolute URL: {url!r}")

    lines: list[str] = []
    events = raw.get("event", [])
    if not isinstance(events, list):
        raise InvariantViolation(f"{path}.event", "expected list")
    seen_test = False
    for n, event in enumerate(events):
        epath = f"{path}.event[{n}]"
        if not isinstance(event, dict):
            raise InvariantViolation(epath, "event must be an object")
        _note_unknown(event, "event", epath, warnings)
        if event.get("listen") != "test":
            warnings.append(f"{epath}: non-test event {event.get('listen')!r} ignored")
            continue
        if seen_test:
            warnings.append(f"{epath}: additional test event ignored")
            continue
        seen_test = True
        script = _require(event, "script", dict, f"{epath}.script")
        _note_unknown(script, "script", f"{epath}.script", warnings)
        exec_ = script.get("exec", [])
        if isinstance(exec_, str):
            lines = exec_.split("\n")
        elif isinstance(exec_, list) and all(isinstance(x, str) for x in exec_):
            # a single exec entry may itself hold several lines
            lines = [part for entry in exec_ for part in entry.split("\n")]
        else:
            raise InvariantViolation(f"{epath}.script.exec", "expected text or list of text")
    try:
        _, script_warnings = parse_script_with_warnings("\n".join(lines))
    except DslError as exc:
        raise InvariantViolation(f"{path}.event", str(exc)) from None
    warnings.extend(f"{path}.event: {w}" for w in script_warnings)
    return CollectionItem(name=name, request_method=method, request_url=url, test_script_lines=tuple(lines))


def parse_collection(data: bytes | str) -> tuple[PostmanCollection, list[str]]:
    """Load a collection document, returning ``(collection, warnings)``.

    Unknown fields are reported in the warning list rather than rejected.

    Raises:
        MalformedJson: the input is not JSON (or not UTF-8).
        SchemaMismatch: ``info.schema`` is absent or not the v2.1.0 URL.
        InvariantViolation: a field breaks a model invariant.
    """
    try:
        doc = json.loads(data)
    except (ValueError, UnicodeDecodeError) as exc:
        raise MalformedJson(str(exc)) from None
    if not isinstance(doc, dict):
        raise SchemaMismatch("document root is not an object")
    info = doc.get("info")
    if not isinstance(info, dict) or "schema" not in info:
        raise SchemaMismatch("info.schema is missing")
    if info["schema"] != SCHEMA_URL:
        raise SchemaMismatch(f"unsupported schema {info['schema']!r}")

    warnings: list[str] = []
    _note_unknown(doc, "", "", warnings)
    _note_unknown(info, "info", "info", warnings)
    name = _require(info, "name", str, "info.name")
    info_id = _require(info, "_postman_id", str, "info._postman_id")
    items_raw = _require(doc, "item", list, "item")
    items = tuple(_parse_item(raw, f"item[{n}]", warnings) for n, raw in enumerate(items_raw))
    collection = PostmanCollection(info_name=name, info_id=info_id, items=items)
    return collection, warnings
