import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from nitireward.answers import ContradictionLabel, CoverageLabel
from nitireward.clients import (
    HttpEmbedderClient,
    HttpJudgeClient,
    HttpTokenCounter,
    JudgeReplyError,
    UpstreamError,
    probe_reachable,
)
from nitireward.embedding import HashEmbedder


class StubUpstream:
    """Local HTTP server whose reply is programmed per test."""

    def __init__(self):
        self.responder = lambda payload: (200, {})
        self.requests: list[dict] = []
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                payload = json.loads(self.rfile.read(length) or b"{}")
                stub.requests.append(payload)
                status, body = stub.responder(payload)
                raw = body if isinstance(body, (bytes, str)) else json.dumps(body)
                if isinstance(raw, str):
                    raw = raw.encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(raw)))
                self.end_headers()
                self.wfile.write(raw)

            def do_GET(self):
                self.send_response(200)
                self.send_header("Content-Length", "2")
                self.end_headers()
                self.wfile.write(b"ok")

            def log_message(self, *args):
                pass

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self.thread.start()

    @property
    def url(self) -> str:
        return f"http://127.0.0.1:{self.server.server_port}"

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def upstream():
    stub = StubUpstream()
    yield stub
    stub.close()


# ---------------------------------------------------------------------------
# Embedder client
# ---------------------------------------------------------------------------


def test_embedder_round_trip(upstream):
    bundles = HashEmbedder(dense_dim=8, token_dim=4).embed(["alpha", "beta"])

    def responder(payload):
        assert payload == {"texts": ["alpha", "beta"]}
        return 200, {"embeddings": [b.to_json() for b in bundles]}

    upstream.responder = responder
    client = HttpEmbedderClient(upstream.url)
    got = client.embed(["alpha", "beta"])
    assert len(got) == 2
    assert np.array_equal(got[0].dense, bundles[0].dense)
    assert got[0].sparse == bundles[0].sparse
    assert np.array_equal(got[1].tokens, bundles[1].tokens)
    client.close()


def test_embedder_5xx_is_retryable_error(upstream):
    upstream.responder = lambda payload: (503, {"error": "overloaded"})
    client = HttpEmbedderClient(upstream.url)
    with pytest.raises(UpstreamError) as err:
        client.embed(["x"])
    assert err.value.retryable
    assert err.value.upstream == "embedder"
    client.close()


def test_embedder_4xx_not_retryable(upstream):
    upstream.responder = lambda payload: (400, {"error": "bad"})
    client = HttpEmbedderClient(upstream.url)
    with pytest.raises(UpstreamError) as err:
        client.embed(["x"])
    assert not err.value.retryable
    client.close()


def test_embedder_count_mismatch_rejected(upstream):
    upstream.responder = lambda payload: (200, {"embeddings": []})
    client = HttpEmbedderClient(upstream.url)
    with pytest.raises(UpstreamError, match="expected 1"):
        client.embed(["x"])
    client.close()


def test_embedder_unreachable_is_transport_error():
    client = HttpEmbedderClient("http://127.0.0.1:9", timeout=0.2)
    with pytest.raises(UpstreamError) as err:
        client.embed(["x"])
    assert err.value.retryable
    client.close()


def test_embedder_non_json_rejected(upstream):
    upstream.responder = lambda payload: (200, "not json {")
    client = HttpEmbedderClient(upstream.url)
    with pytest.raises(UpstreamError, match="not JSON"):
        client.embed(["x"])
    client.close()


# ---------------------------------------------------------------------------
# Judge client
# ---------------------------------------------------------------------------


def _chat_reply(content: str):
    return {"choices": [{"message": {"content": content}}]}


def test_judge_labels_happy_path(upstream):
    def responder(payload):
        assert payload["temperature"] == 0.5
        assert payload["seed"] == 69420
        assert payload["max_tokens"] == 2048
        prompt = payload["messages"][0]["content"]
        if "coverage" in prompt:
            return 200, _chat_reply("Reasoning...\ncoverage: partial")
        return 200, _chat_reply("contradiction: no")

    upstream.responder = responder
    client = HttpJudgeClient(upstream.url)
    labels = client.labels("q", "gen", "ref")
    assert labels == (CoverageLabel.PARTIAL, ContradictionLabel.NO_CONTRADICTION)
    # templated slots made it into the request
    assert "gen" in upstream.requests[0]["messages"][0]["content"]
    client.close()


def test_judge_contradiction_yes(upstream):
    def responder(payload):
        prompt = payload["messages"][0]["content"]
        if "coverage" in prompt:
            return 200, _chat_reply("coverage: none")
        return 200, _chat_reply("contradiction: yes")

    upstream.responder = responder
    client = HttpJudgeClient(upstream.url)
    assert client.labels("q", "g", "r") == (
        CoverageLabel.NONE,
        ContradictionLabel.CONTRADICTS,
    )
    client.close()


def test_judge_unparseable_reply_carries_raw(upstream):
    upstream.responder = lambda payload: (200, _chat_reply("I dunno, seems fine"))
    client = HttpJudgeClient(upstream.url)
    with pytest.raises(JudgeReplyError) as err:
        client.labels("q", "g", "r")
    assert err.value.raw_reply == "I dunno, seems fine"
    assert not err.value.retryable
    client.close()


# ---------------------------------------------------------------------------
# Tokenizer client
# ---------------------------------------------------------------------------


def test_token_counter_round_trip(upstream):
    upstream.responder = lambda payload: (
        200,
        {"counts": [len(t) for t in payload["texts"]]},
    )
    client = HttpTokenCounter(upstream.url)
    assert client.counts(["ab", "abcd"]) == [2, 4]
    assert client.count("hello") == 5
    client.close()


def test_token_counter_malformed(upstream):
    upstream.responder = lambda payload: (200, {"counts": "nope"})
    client = HttpTokenCounter(upstream.url)
    with pytest.raises(UpstreamError):
        client.counts(["x"])
    client.close()


def test_probe_reachable(upstream):
    assert probe_reachable(upstream.url)
    assert not probe_reachable("http://127.0.0.1:9", timeout=0.2)
