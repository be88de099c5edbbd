from __future__ import annotations

import json
import threading

import pytest

from polyforge.llm import (
    BackendUnavailable,
    GenerationParams,
    LLMClient,
    MalformedResponse,
    MockBackend,
    prompt_key,
    testgen_params as _testgen_params,
    translation_params,
    truncate_at_stop,
)


class FlakyBackend:
    def __init__(self, failures: int, result: list[str]):
        self.failures = failures
        self.result = result
        self.calls = 0

    def raw_complete(self, prompt, params):
        self.calls += 1
        if self.calls <= self.failures:
            raise BackendUnavailable("down")
        return list(self.result)


class TestParams:
    def test_defaults(self):
        assert _testgen_params().n == 5
        assert _testgen_params().temperature == 0.8
        assert translation_params().n == 50
        assert translation_params(n=100).n == 100

    def test_validation(self):
        with pytest.raises(ValueError):
            GenerationParams(n=0)
        with pytest.raises(ValueError):
            GenerationParams(n=1, temperature=-0.1)


class TestTruncation:
    def test_stop_token_cuts(self):
        assert truncate_at_stop("abc\n\nlet more", ("\n\nlet",)) == "abc"

    def test_earliest_stop_wins(self):
        assert truncate_at_stop("a;;b\n\nlet c", ("\n\nlet", ";;")) == "a"

    def test_no_stop(self):
        assert truncate_at_stop("abc", ("zz",)) == "abc"


class TestMock:
    def test_scripted(self):
        backend = MockBackend()
        backend.script("p", ["a", "b"])
        client = LLMClient(backend)
        assert client.complete("p", GenerationParams(n=2)) == ["a", "b"]

    def test_n_limit(self):
        backend = MockBackend()
        backend.script("p", ["a", "b", "c"])
        client = LLMClient(backend)
        assert client.complete("p", GenerationParams(n=2)) == ["a", "b"]

    def test_unknown_prompt_empty(self):
        client = LLMClient(MockBackend())
        assert client.complete("nope", GenerationParams(n=1)) == []

    def test_fallback(self):
        backend = MockBackend(fallback=lambda p, params: [p.upper()])
        client = LLMClient(backend)
        assert client.complete("ab", GenerationParams(n=1)) == ["AB"]

    def test_empty_prompt_rejected(self):
        client = LLMClient(MockBackend())
        with pytest.raises(ValueError):
            client.complete("", GenerationParams(n=1))

    def test_stop_applied_identically_to_any_backend(self):
        backend = MockBackend()
        backend.script("p", ["body;;extra"])
        client = LLMClient(backend)
        assert client.complete("p", GenerationParams(n=1, stop=(";;",))) == ["body"]


class TestRetries:
    def test_retries_then_success(self):
        backend = FlakyBackend(failures=2, result=["ok"])
        sleeps = []
        client = LLMClient(backend, max_retries=3, backoff_base=0.5,
                           sleep=sleeps.append)
        assert client.complete("p", GenerationParams(n=1)) == ["ok"]
        assert sleeps == [0.5, 1.0]

    def test_budget_zero_raises(self):
        backend = FlakyBackend(failures=1, result=["ok"])
        client = LLMClient(backend, max_retries=0, sleep=lambda s: None)
        with pytest.raises(BackendUnavailable):
            client.complete("p", GenerationParams(n=1))

    def test_budget_exhausted_raises(self):
        backend = FlakyBackend(failures=10, result=["ok"])
        client = LLMClient(backend, max_retries=2, sleep=lambda s: None)
        with pytest.raises(BackendUnavailable):
            client.complete("p", GenerationParams(n=1))


class TestReplayLog:
    def test_log_and_reload(self, tmp_path):
        log_path = str(tmp_path / "replay.jsonl")
        backend = MockBackend()
        backend.script("p1", ["a"])
        backend.script("p2", ["b", "c"])
        client = LLMClient(backend, replay_log_path=log_path)
        client.complete("p1", GenerationParams(n=1))
        client.complete("p2", GenerationParams(n=2))

        records = [json.loads(l) for l in open(log_path)]
        assert len(records) == 2
        assert records[0]["prompt_sha256"] == prompt_key("p1")
        assert all("content_sha256" in r for r in records)

        replayed = LLMClient(MockBackend.from_replay_log(log_path))
        assert replayed.complete("p1", GenerationParams(n=1)) == ["a"]
        assert replayed.complete("p2", GenerationParams(n=2)) == ["b", "c"]

    def test_append_only(self, tmp_path):
        log_path = str(tmp_path / "replay.jsonl")
        backend = MockBackend(fallback=lambda p, params: ["x"])
        client = LLMClient(backend, replay_log_path=log_path)
        client.complete("a", GenerationParams(n=1))
        client.complete("b", GenerationParams(n=1))
        assert len(open(log_path).readlines()) == 2


class TestConcurrency:
    def test_thread_safe(self):
        backend = MockBackend(fallback=lambda p, params: [p])
        client = LLMClient(backend, max_in_flight=2)
        results = {}

        def work(i):
            results[i] = client.complete(f"p{i}", GenerationParams(n=1))

        threads = [threading.Thread(target=work, args=(i,)) for i in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert results == {i: [f"p{i}"] for i in range(8)}

    def test_in_flight_cap_validated(self):
        with pytest.raises(ValueError):
            LLMClient(MockBackend(), max_in_flight=0)


class TestHTTPParsing:
    def _client(self, monkeypatch, response):
        import requests

        from polyforge.llm import HTTPBackend

        class FakeResp:
            def __init__(self, status, payload):
                self.status_code = status
                self._payload = payload

            def json(self):
                if isinstance(self._payload, Exception):
                    raise self._payload
                return self._payload

        def fake_post(url, json=None, headers=None, timeout=None):
            return FakeResp(*response)

        monkeypatch.setattr(requests, "post", fake_post)
        return HTTPBackend(endpoint="http://example.invalid/v1/complete")

    def test_good_response(self, monkeypatch):
        backend = self._client(
            monkeypatch, (200, {"choices": [{"text": "a"}, {"text": "b"}]})
        )
        assert backend.raw_complete("p", GenerationParams(n=2)) == ["a", "b"]

    def test_server_error_unavailable(self, monkeypatch):
        backend = self._client(monkeypatch, (503, {}))
        with pytest.raises(BackendUnavailable):
            backend.raw_complete("p", GenerationParams(n=1))

    def test_bad_schema_malformed(self, monkeypatch):
        backend = self._client(monkeypatch, (200, {"nope": []}))
        with pytest.raises(MalformedResponse):
            backend.raw_complete("p", GenerationParams(n=1))

    def test_missing_endpoint_rejected(self, monkeypatch):
        from polyforge.llm import HTTPBackend

        monkeypatch.delenv("LLM_ENDPOINT", raising=False)
        with pytest.raises(ValueError):
            HTTPBackend()
