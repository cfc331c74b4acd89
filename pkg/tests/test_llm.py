import json
import logging

import pytest

from pmtestgen.corpus import builtin_corpus
from pmtestgen.dsl import parse_script, render_script
from pmtestgen.generator import CatalogExhausted, generate_deterministic
from pmtestgen.llm import (
    PROMPT_LIMIT,
    CompletionCountMismatch,
    CompletionUnparseable,
    ProviderConfig,
    ProviderHttpError,
    ProviderMalformedReply,
    ProviderTimeout,
    build_prompt,
    complete,
    generate_llm,
    validate_completion,
)
from pmtestgen.pipeline import GenerationJob
from pmtestgen.probe import ResponseCapture

from conftest import GOLDEN, chat_reply

SECRET = "sk-test-5f1d9c2e7a-do-not-leak"
GARBAGE = "I'm sorry, I can only describe tests in prose. The API returns photos."


def provider_for(stub, **kw):
    return ProviderConfig(base_url=stub.url("/v1"), model="mock-model", api_key=SECRET, **kw)


class TestPrompt:
    def test_instruction_count(self):
        prompt = build_prompt("Status: 200", 6, [])
        assert "Write exactly 6 pm.test blocks" in prompt
        assert prompt.endswith("Status: 200")

    def test_deterministic(self):
        corpus = builtin_corpus()[:2]
        assert build_prompt("s", 3, corpus) == build_prompt("s", 3, corpus)

    def test_exemplars_included(self):
        [ex] = builtin_corpus()[:1]
        prompt = build_prompt("summary", 2, [ex])
        assert ex.script_text in prompt
        assert prompt.index(ex.script_text) < prompt.index("summary")

    def test_overlong_summary_cut_first(self):
        corpus = builtin_corpus()
        prompt = build_prompt("x" * 50_000, 6, corpus)
        assert len(prompt) == PROMPT_LIMIT
        assert all(ex.script_text in prompt for ex in corpus)

    def test_overlong_exemplars_dropped(self):
        big = builtin_corpus()[0]
        prompt = build_prompt("summary", 6, [big] * 100)
        assert len(prompt) <= PROMPT_LIMIT


class TestComplete:
    def test_wire_format(self, stub):
        stub.add("/v1/chat/completions", chat_reply(GOLDEN))
        provider = provider_for(stub, temperature=0.5)
        assert complete(provider, "hello") == GOLDEN
        [req] = stub.requests
        assert req["method"] == "POST"
        assert req["headers"]["Authorization"] == f"Bearer {SECRET}"
        body = json.loads(req["body"])
        assert body == {"model": "mock-model", "messages": [{"role": "user", "content": "hello"}],
                        "temperature": 0.5}

    def test_http_error(self, stub):
        stub.add("/v1/chat/completions", {"status": 500, "body": "boom"})
        with pytest.raises(ProviderHttpError) as info:
            complete(provider_for(stub), "p")
        assert info.value.status == 500

    def test_non_json(self, stub):
        stub.add("/v1/chat/completions", {"status": 200, "body": "<html>"})
        with pytest.raises(ProviderMalformedReply):
            complete(provider_for(stub), "p")

    def test_missing_choices(self, stub):
        stub.add("/v1/chat/completions", {"status": 200, "body": json.dumps({"choices": []})})
        with pytest.raises(ProviderMalformedReply):
            complete(provider_for(stub), "p")

    def test_timeout(self, stub):
        stub.add("/v1/chat/completions", dict(chat_reply(GOLDEN), delay=1.0))
        with pytest.raises(ProviderTimeout):
            complete(provider_for(stub, timeout_s=0.2), "p")

    def test_error_body_echoing_key_is_redacted(self, stub):
        stub.add("/v1/chat/completions", {"status": 401, "body": f"invalid key {SECRET}"})
        with pytest.raises(ProviderHttpError) as info:
            complete(provider_for(stub), "p")
        assert SECRET not in str(info.value)


class TestValidate:
    def test_exact(self):
        scripts, notes = validate_completion(GOLDEN, 6)
        assert render_script(scripts) == GOLDEN and notes == []

    def test_truncates(self):
        scripts, notes = validate_completion(GOLDEN, 4)
        assert scripts == parse_script(GOLDEN)[:4]
        assert len(notes) == 1 and "kept the first 4" in notes[0]

    def test_prose(self):
        with pytest.raises(CompletionUnparseable):
            validate_completion(GARBAGE, 3)

    def test_empty(self):
        with pytest.raises(CompletionUnparseable):
            validate_completion("", 1)

    def test_too_few(self):
        with pytest.raises(CompletionCountMismatch) as info:
            validate_completion(GOLDEN, 7)
        assert (info.value.got, info.value.want) == (6, 7)

    def test_code_fence_stripped(self):
        scripts, _ = validate_completion("Here you go:\n```javascript\n" + GOLDEN + "\n```\nEnjoy!", 6)
        assert len(scripts) == 6


class TestGenerateLlm:
    def test_first_try(self, stub, photos_capture):
        stub.add("/v1/chat/completions", chat_reply(GOLDEN))
        scripts, diagnostics = generate_llm(photos_capture, 6, provider_for(stub), builtin_corpus())
        assert render_script(scripts) == GOLDEN
        assert diagnostics == []
        prompt = json.loads(stub.requests[0]["body"])["messages"][0]["content"]
        assert "Mars rover photos" in prompt  # best-overlap exemplar selected

    def test_repair(self, stub, photos_capture):
        stub.add("/v1/chat/completions", [chat_reply(GARBAGE), chat_reply(GOLDEN)])
        scripts, diagnostics = generate_llm(photos_capture, 6, provider_for(stub, max_attempts=2), [])
        assert render_script(scripts) == GOLDEN
        assert len(diagnostics) == 1 and "failed validation" in diagnostics[0]
        second = json.loads(stub.requests[1]["body"])["messages"][0]["content"]
        assert "Your previous answer failed validation:" in second

    def test_fallback(self, stub, photos_capture):
        stub.add("/v1/chat/completions", chat_reply(GARBAGE))
        scripts, diagnostics = generate_llm(photos_capture, 4, provider_for(stub, max_attempts=3), [])
        assert scripts == generate_deterministic(photos_capture, 4)
        assert len(stub.requests) == 3
        assert "fell back to deterministic" in diagnostics[-1]

    def test_provider_errors_fall_back(self, stub, photos_capture):
        stub.add("/v1/chat/completions", {"status": 503})
        scripts, diagnostics = generate_llm(photos_capture, 2, provider_for(stub), [])
        assert len(scripts) == 2
        assert any("HTTP 503" in d for d in diagnostics)

    def test_fallback_exhausted(self, stub):
        stub.add("/v1/chat/completions", chat_reply(GARBAGE))
        with pytest.raises(CatalogExhausted):
            generate_llm(ResponseCapture(200, (), b"", 5), 10, provider_for(stub), [])

    def test_key_never_leaks(self, stub, photos_capture, caplog, capsys):
        caplog.set_level(logging.DEBUG)
        stub.add("/v1/chat/completions", [
            {"status": 400, "body": f"bad request for key {SECRET}"},
            chat_reply(f"not code {SECRET}"),
            chat_reply(GARBAGE),
        ])
        provider = provider_for(stub, max_attempts=3)
        scripts, diagnostics = generate_llm(photos_capture, 3, provider, builtin_corpus())
        job = GenerationJob("http://x.test/", 3, mode="llm", provider=provider)
        surfaces = [caplog.text, "\n".join(diagnostics), repr(provider), repr(job),
                    json.dumps(job.to_dict()), json.dumps(provider.to_dict())]
        out, err = capsys.readouterr()
        surfaces += [out, err]
        assert caplog.text  # logging actually happened
        for text in surfaces:
            assert SECRET not in text


class TestProviderConfig:
    def test_from_env(self):
        env = {"LLM_BASE_URL": "http://x", "LLM_MODEL": "m", "LLM_API_KEY": "k"}
        cfg = ProviderConfig.from_env(env)
        assert (cfg.base_url, cfg.model, cfg.api_key) == ("http://x", "m", "k")
        assert ProviderConfig.from_env(env, model="other").model == "other"
        assert ProviderConfig.from_env({}) is None

    def test_invariants(self):
        with pytest.raises(ValueError):
            ProviderConfig("http://x", "m", max_attempts=0)
        with pytest.raises(ValueError):
            ProviderConfig("http://x", "m", temperature=2.5)
