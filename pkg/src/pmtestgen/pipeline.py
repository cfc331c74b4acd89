"""One generation job end to end: probe, generate, package as a collection."""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence
from urllib.parse import urlsplit

from .collection import HTTP_METHODS, PostmanCollection, build_collection
from .corpus import ExemplarRecord
from .dsl import TestScript, render_script
from .generator import DEFAULT_RESPONSE_TIME_MS, generate_deterministic
from .llm import ProviderConfig, generate_llm
from .probe import DEFAULT_MAX_BODY_BYTES, DEFAULT_TIMEOUT_MS, ProbeConfig, ResponseCapture, check_probe_url, probe

MODES = ("deterministic", "llm")
MAX_COUNT = 50


@dataclass(frozen=True)
class JobOutcome:
    scripts: tuple[TestScript, ...]
    collection: PostmanCollection
    diagnostics: tuple[str, ...] = ()

    @property
    def script_text(self) -> str:
        return render_script(self.scripts)


@dataclass(frozen=True)
class GenerationJob:
    target_url: str
    count: int
    method: str = "GET"
    mode: str = "deterministic"
    provider: Optional[ProviderConfig] = field(default=None, repr=False)
    outcome: Optional[JobOutcome] = None

    def __post_init__(self):
        if isinstance(self.count, bool) or not isinstance(self.count, int) or self.count < 1:
            raise ValueError("count must be a positive integer")
        if self.method not in HTTP_METHODS:
            raise ValueError(f"unsupported method {self.method!r}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {', '.join(MODES)}")
        if self.mode == "llm" and self.provider is None:
            raise ValueError("llm mode needs a provider configuration")
        if self.outcome is not None and len(self.outcome.scripts) != self.count:
            raise ValueError("outcome must hold exactly count scripts")

    def to_dict(self) -> dict:
        data = {
            "target_url": self.target_url,
            "method": self.method,
            "count": self.count,
            "mode": self.mode,
            "provider": self.provider.to_dict() if self.provider else None,
        }
        if self.outcome is not None:
            data["outcome"] = {
                "script_text": self.outcome.script_text,
                "collection_id": self.outcome.collection.info_id,
                "diagnostics": list(self.outcome.diagnostics),
            }
        return data


def collection_name_for(url: str) -> str:
    parts = urlsplit(url)
    raw = (parts.hostname or "api") + parts.path
    slug = re.sub(r"[^a-z0-9]+", "-", raw.lower()).strip("-")
    return slug[:80] or "api"


def run_job(
    job: GenerationJob,
    *,
    corpus: Sequence[ExemplarRecord] = (),
    name: Optional[str] = None,
    rng: Optional[random.Random] = None,
    timeout_ms: int = DEFAULT_TIMEOUT_MS,
    max_body_bytes: int = DEFAULT_MAX_BODY_BYTES,
    response_time_ms: int = DEFAULT_RESPONSE_TIME_MS,
    probe_fn: Callable[[ProbeConfig], ResponseCapture] = probe,
) -> GenerationJob:
    """Run ``job`` and return a copy carrying its outcome.

    Raises ProbeError for transport failures and CatalogExhausted when the
    response cannot support ``job.count`` tests.
    """
    check_probe_url(job.target_url)
    capture = probe_fn(ProbeConfig(job.target_url, job.method, timeout_ms, max_body_bytes))
    diagnostics: list[str] = []
    if job.mode == "llm":
        scripts, diagnostics = generate_llm(
            capture, job.count, job.provider, corpus, response_time_ms=response_time_ms)
    else:
        scripts = generate_deterministic(capture, job.count, response_time_ms)
    collection = build_collection(
        name or collection_name_for(job.target_url), job.target_url, job.method, scripts, rng=rng)
    outcome = JobOutcome(tuple(scripts), collection, tuple(diagnostics))
    return replace(job, outcome=outcome)
