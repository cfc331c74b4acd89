"""Exemplar corpus: hand-collected test scripts used as few-shot examples."""

from __future__ import annotations

import hashlib
import json
import re
import threading
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

from filelock import FileLock

from .dsl import DslError, canonicalize, parse_script_with_warnings

_WORD_RE = re.compile(r"[a-z0-9]+")


class ExemplarInvalid(Exception):
    def __init__(self, cause: Exception | str):
        self.cause = cause
        super().__init__(f"exemplar script does not parse: {cause}")


@dataclass(frozen=True)
class ExemplarRecord:
    id: str
    description: str
    script_text: str
    tags: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "tags", tuple(self.tags))
        try:
            scripts, warnings = parse_script_with_warnings(self.script_text)
        except DslError as exc:
            raise ExemplarInvalid(exc) from None
        if warnings:
            raise ExemplarInvalid("; ".join(warnings))
        if not scripts:
            raise ExemplarInvalid("no pm.test blocks")

    def to_json(self) -> str:
        data = asdict(self)
        data["tags"] = list(self.tags)
        return json.dumps(data, ensure_ascii=False, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "ExemplarRecord":
        data = json.loads(line)
        return cls(data["id"], data["description"], data["script_text"], tuple(data.get("tags", ())))


def normalize_tags(tags: Iterable[str]) -> tuple[str, ...]:
    return tuple(sorted({t.strip().lower() for t in tags if t and t.strip()}))


def ingest_exemplar(description: str, script_text: str, tags: Iterable[str] = ()) -> ExemplarRecord:
    """Canonicalize a collected script and give it a content-derived id.

    Identical (description, script, tags) content always yields the same id,
    which is what the store uses to drop duplicates.
    """
    try:
        text = canonicalize(script_text)
    except DslError as exc:
        raise ExemplarInvalid(exc) from None
    if not text:
        raise ExemplarInvalid("no pm.test blocks")
    description = " ".join(description.split())
    tags = normalize_tags(tags)
    digest = hashlib.sha256(
        json.dumps([description, text, list(tags)], ensure_ascii=False).encode("utf-8")
    ).hexdigest()
    return ExemplarRecord(id=f"ex-{digest[:16]}", description=description, script_text=text, tags=tags)


def tokens(text: str) -> set[str]:
    return set(_WORD_RE.findall(text.lower()))


def overlap_score(record: ExemplarRecord, summary_tokens: set[str]) -> int:
    return len(tokens(record.description + " " + " ".join(record.tags)) & summary_tokens)


def select_exemplars(corpus: Sequence[ExemplarRecord], capture_summary: str, k: int) -> list[ExemplarRecord]:
    """Top ``k`` records by word overlap with the summary; ties go to the smaller id."""
    if k < 1:
        raise ValueError("k must be at least 1")
    wanted = tokens(capture_summary)
    ranked = sorted(corpus, key=lambda r: (-overlap_score(r, wanted), r.id))
    return ranked[:k]


class CorpusStore:
    """JSON-lines file of exemplar records.

    Reads may run concurrently; writes take both a thread lock and a file
    lock so separate processes can share the file.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._file_lock = FileLock(str(self.path) + ".lock")

    def load(self) -> list[ExemplarRecord]:
        if not self.path.exists():
            return []
        records = []
        with self.path.open(encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    records.append(ExemplarRecord.from_json(line))
        return records

    def add(self, record: ExemplarRecord) -> bool:
        """Append ``record`` unless its id is already stored. Returns whether it was written."""
        with self._lock, self._file_lock:
            if any(r.id == record.id for r in self.load()):
                return False
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(record.to_json() + "\n")
            return True


def builtin_corpus() -> list[ExemplarRecord]:
    text = resources.files("pmtestgen").joinpath("data/exemplars.jsonl").read_text(encoding="utf-8")
    return [ExemplarRecord.from_json(line) for line in text.splitlines() if line.strip()]


def load_corpus(path: Optional[str | Path] = None) -> list[ExemplarRecord]:
    """Built-in exemplars plus, when given, those stored at ``path`` (deduplicated by id)."""
    records = {r.id: r for r in builtin_corpus()}
    if path is not None:
        for r in CorpusStore(path).load():
            records.setdefault(r.id, r)
    return list(records.values())
