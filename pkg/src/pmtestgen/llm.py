"""LLM-backed generation: prompt assembly, provider calls, validation and repair."""

from __future__ import annotations

import logging
import os
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

import httpx

from .corpus import ExemplarRecord, select_exemplars
from .dsl import DslError, TestScript, parse_script
from .generator import DEFAULT_RESPONSE_TIME_MS, generate_deterministic
from .probe import ResponseCapture, summarize_capture

log = logging.getLogger(__name__)

PROMPT_LIMIT = 16_000
SUMMARY_CHARS = 4_000
EXEMPLAR_COUNT = 3
DEFAULT_MAX_ATTEMPTS = 2
REDACTED = "[REDACTED]"

INSTRUCTIONS = """\
You write Postman test scripts for a REST API.
Write exactly {count} pm.test blocks for the response described below.
Each block has the form:

pm.test("<title>", function () {{
  <statement>
}});

Use only these statement forms:
pm.response.to.have.status(<code>);
pm.expect(pm.response.text()).not.equal('');
pm.response.to.have.header("<name>");
pm.expect(pm.response.responseTime).to.be.below(<ms>);
pm.expect(pm.response.json()<path>).to.be.an('array').that.is.not.empty;
pm.expect(pm.response.json()<path>).to.equal(<literal>);

<path> is a chain of .field and [index] steps, for example .photos[0].sol.
Reply with the {count} test blocks only: no prose, no code fences."""

REPAIR_NOTE = (
    "\n\nYour previous answer failed validation: {error}\n"
    "Resend only the {count} pm.test blocks, using only the allowed statement forms."
)


class ProviderError(Exception):
    pass


class ProviderHttpError(ProviderError):
    def __init__(self, status: int, detail: str = ""):
        self.status = status
        super().__init__(f"provider returned HTTP {status}" + (f": {detail}" if detail else ""))


class ProviderTimeout(ProviderError):
    pass


class ProviderMalformedReply(ProviderError):
    pass


class CompletionError(Exception):
    pass


class CompletionUnparseable(CompletionError):
    def __init__(self, cause: Exception | str):
        self.cause = cause
        super().__init__(f"completion is not a valid test script: {cause}")


class CompletionCountMismatch(CompletionError):
    def __init__(self, got: int, want: int):
        self.got = got
        self.want = want
        super().__init__(f"completion has {got} test blocks, expected {want}")


@dataclass(frozen=True)
class ProviderConfig:
    base_url: str
    model: str
    api_key: str = field(default="", repr=False)
    temperature: float = 0.2
    max_attempts: int = DEFAULT_MAX_ATTEMPTS
    timeout_s: float = 60.0

    def __post_init__(self):
        if not 0 <= self.temperature <= 2:
            raise ValueError("temperature must be within [0, 2]")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be at least 1")

    @classmethod
    def from_env(cls, environ=None, **overrides) -> Optional["ProviderConfig"]:
        """Read LLM_BASE_URL / LLM_MODEL / LLM_API_KEY; ``None`` overrides are ignored."""
        env = os.environ if environ is None else environ
        values = {
            "base_url": env.get("LLM_BASE_URL"),
            "model": env.get("LLM_MODEL"),
            "api_key": env.get("LLM_API_KEY", ""),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        if not values["base_url"] or not values["model"]:
            return None
        return cls(**values)

    def to_dict(self) -> dict:
        """Public view of the config; the key is never included."""
        return {
            "base_url": self.base_url,
            "model": self.model,
            "temperature": self.temperature,
            "max_attempts": self.max_attempts,
        }

    def redact(self, text: str) -> str:
        if self.api_key and self.api_key in text:
            return text.replace(self.api_key, REDACTED)
        return text


def build_prompt(summary: str, count: int, exemplars: Sequence[ExemplarRecord]) -> str:
    """Instructions, then exemplar blocks, then the capture summary.

    The result never exceeds PROMPT_LIMIT characters: the summary is cut
    first, then exemplars are dropped from the end.
    """
    head = INSTRUCTIONS.format(count=count)
    examples = [f"Example: {ex.description}\n{ex.script_text}" for ex in exemplars]
    summary_label = "\n\nResponse to test:\n"

    def assemble(exs, summ):
        parts = [head]
        if exs:
            parts.append("\n\n" + "\n\n".join(exs))
        parts.append(summary_label + summ)
        return "".join(parts)

    while True:
        fixed = len(assemble(examples, ""))
        if fixed <= PROMPT_LIMIT:
            return assemble(examples, summary[: PROMPT_LIMIT - fixed])
        if not examples:
            return assemble([], "")[:PROMPT_LIMIT]
        examples = examples[:-1]


def _endpoint(base_url: str) -> str:
    return base_url.rstrip("/") + "/chat/completions"


def complete(provider: ProviderConfig, prompt: str, *, transport: Optional[httpx.BaseTransport] = None) -> str:
    """One chat-completions round trip; returns the first choice's message text."""
    url = _endpoint(provider.base_url)
    payload = {
        "model": provider.model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": provider.temperature,
    }
    headers = {"Content-Type": "application/json"}
    if provider.api_key:
        headers["Authorization"] = f"Bearer {provider.api_key}"
    log.debug("provider request POST %s model=%s prompt_chars=%d authorization=%s",
              url, provider.model, len(prompt), REDACTED if provider.api_key else "none")
    try:
        with httpx.Client(timeout=provider.timeout_s, transport=transport) as client:
            response = client.post(url, json=payload, headers=headers)
    except httpx.TimeoutException:
        raise ProviderTimeout(f"no reply from provider within {provider.timeout_s} s") from None
    except httpx.HTTPError as exc:
        raise ProviderError(provider.redact(f"{type(exc).__name__}: {exc}")) from None
    log.debug("provider response status=%d bytes=%d", response.status_code, len(response.content))
    if response.status_code >= 400:
        detail = provider.redact(response.text[:200])
        raise ProviderHttpError(response.status_code, detail)
    try:
        data = response.json()
        content = data["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError):
        raise ProviderMalformedReply("reply is not a chat-completions document") from None
    if not isinstance(content, str):
        raise ProviderMalformedReply("first choice has no text content")
    return content


_FENCE_RE = re.compile(r"```[A-Za-z]*\n(.*?)```", re.DOTALL)


def strip_fences(text: str) -> str:
    blocks = _FENCE_RE.findall(text)
    return "\n".join(blocks) if blocks else text


def validate_completion(text: str, count: int) -> tuple[list[TestScript], list[str]]:
    """Parse a completion and hold it to exactly ``count`` blocks.

    Extra blocks are dropped (reported in the returned diagnostics);
    missing ones are an error.
    """
    try:
        scripts = parse_script(strip_fences(text))
    except DslError as exc:
        raise CompletionUnparseable(exc) from None
    if not scripts:
        raise CompletionUnparseable("no pm.test blocks found")
    if len(scripts) < count:
        raise CompletionCountMismatch(len(scripts), count)
    diagnostics = []
    if len(scripts) > count:
        diagnostics.append(f"completion had {len(scripts)} test blocks; kept the first {count}")
    return scripts[:count], diagnostics


def generate_llm(
    capture: ResponseCapture,
    count: int,
    provider: ProviderConfig,
    corpus: Sequence[ExemplarRecord],
    *,
    response_time_ms: int = DEFAULT_RESPONSE_TIME_MS,
    transport: Optional[httpx.BaseTransport] = None,
) -> tuple[list[TestScript], list[str]]:
    """Few-shot generation with repair retries and a rule-based fallback.

    Only ``CatalogExhausted`` escapes, and only when the fallback cannot
    produce ``count`` tests either.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    summary = summarize_capture(capture, SUMMARY_CHARS)
    exemplars = select_exemplars(corpus, summary, EXEMPLAR_COUNT) if corpus else []
    base_prompt = build_prompt(summary, count, exemplars)
    prompt = base_prompt
    diagnostics: list[str] = []
    for attempt in range(1, provider.max_attempts + 1):
        try:
            text = complete(provider, prompt, transport=transport)
        except ProviderError as exc:
            diagnostics.append(provider.redact(f"attempt {attempt}: provider error: {exc}"))
            continue
        try:
            scripts, notes = validate_completion(text, count)
        except CompletionError as exc:
            error = provider.redact(str(exc))[:500]
            diagnostics.append(f"attempt {attempt}: completion failed validation: {error}")
            prompt = base_prompt + REPAIR_NOTE.format(error=error, count=count)
            continue
        diagnostics.extend(notes)
        return scripts, diagnostics
    diagnostics.append(f"fell back to deterministic generation after {provider.max_attempts} attempt(s)")
    return generate_deterministic(capture, count, response_time_ms), diagnostics
