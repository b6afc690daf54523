"""HTTP clients for the embedding, judge and tokenizer upstreams.

All clients share one httpx client per instance (safe for concurrent use),
bound the number of in-flight requests with a semaphore, and surface
failures as typed errors — an upstream problem must never be silently
scored as zero.
"""

from __future__ import annotations

import re
import threading

import httpx

from .answers import ContradictionLabel, CoverageLabel
from .embedding import EmbeddingBundle

DEFAULT_TIMEOUT = 30.0
JUDGE_TEMPERATURE = 0.5
JUDGE_SEED = 69420
JUDGE_MAX_TOKENS = 2048

COVERAGE_TEMPLATE = """You compare a generated answer with a reference answer.

Question: {question}
Reference answer: {reference}
Generated answer: {generated}

How much of the reference answer is covered by the generated answer?
Reply with exactly one line of the form:
coverage: none|partial|full
"""

CONTRADICTION_TEMPLATE = """You compare a generated answer with a reference answer.

Question: {question}
Reference answer: {reference}
Generated answer: {generated}

Does the generated answer contradict the reference answer?
Reply with exactly one line of the form:
contradiction: yes|no
"""

_COVERAGE_LINE = re.compile(r"^\s*coverage\s*:\s*(none|partial|full)\s*$", re.I | re.M)
_CONTRA_LINE = re.compile(r"^\s*contradiction\s*:\s*(yes|no)\s*$", re.I | re.M)


class UpstreamError(RuntimeError):
    """An upstream call failed; retryable says whether a retry makes sense."""

    def __init__(self, upstream: str, message: str, retryable: bool = True):
        self.upstream = upstream
        self.retryable = retryable
        super().__init__(f"{upstream}: {message}")


class JudgeReplyError(UpstreamError):
    """The judge answered but the reply had no parseable label line."""

    def __init__(self, raw_reply: str):
        self.raw_reply = raw_reply
        super().__init__("judge", f"unparseable reply: {raw_reply!r}", retryable=False)


class _HttpBase:
    def __init__(self, url: str, name: str, timeout: float, max_in_flight: int):
        self.url = url.rstrip("/")
        self.name = name
        self._client = httpx.Client(timeout=timeout)
        self._slots = threading.Semaphore(max_in_flight)

    def close(self) -> None:
        self._client.close()

    def _post(self, payload: dict) -> dict:
        with self._slots:
            try:
                response = self._client.post(self.url, json=payload)
            except httpx.HTTPError as exc:
                raise UpstreamError(self.name, f"transport failure: {exc}") from exc
        if response.status_code >= 500:
            raise UpstreamError(self.name, f"server error {response.status_code}")
        if response.status_code >= 400:
            raise UpstreamError(
                self.name, f"rejected request ({response.status_code})", retryable=False
            )
        try:
            return response.json()
        except ValueError as exc:
            raise UpstreamError(self.name, "response is not JSON", retryable=False) from exc


class HttpEmbedderClient(_HttpBase):
    """POST {"texts": [...]} -> {"embeddings": [{dense, sparse, tokens}]}."""

    def __init__(
        self, url: str, timeout: float = DEFAULT_TIMEOUT, max_in_flight: int = 8
    ):
        super().__init__(url, "embedder", timeout, max_in_flight)

    def embed(self, texts: list[str]) -> list[EmbeddingBundle]:
        body = self._post({"texts": texts})
        try:
            rows = body["embeddings"]
            bundles = [EmbeddingBundle.from_json(row) for row in rows]
        except (KeyError, TypeError, ValueError) as exc:
            raise UpstreamError(
                self.name, f"malformed embeddings payload: {exc}", retryable=False
            ) from exc
        if len(bundles) != len(texts):
            raise UpstreamError(
                self.name,
                f"expected {len(texts)} embeddings, got {len(bundles)}",
                retryable=False,
            )
        return bundles


class HttpJudgeClient(_HttpBase):
    """Chat-completions style judge: one request per label, fixed decoding
    settings (temperature 0.5, seed 69420, max_tokens 2048)."""

    def __init__(
        self,
        url: str,
        coverage_template: str = COVERAGE_TEMPLATE,
        contradiction_template: str = CONTRADICTION_TEMPLATE,
        timeout: float = DEFAULT_TIMEOUT,
        max_in_flight: int = 8,
    ):
        super().__init__(url, "judge", timeout, max_in_flight)
        self.coverage_template = coverage_template
        self.contradiction_template = contradiction_template

    def _ask(self, prompt: str) -> str:
        body = self._post(
            {
                "messages": [{"role": "user", "content": prompt}],
                "temperature": JUDGE_TEMPERATURE,
                "seed": JUDGE_SEED,
                "max_tokens": JUDGE_MAX_TOKENS,
            }
        )
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise UpstreamError(
                self.name, f"malformed completion payload: {exc}", retryable=False
            ) from exc

    def labels(
        self, question: str, generated: str, reference: str
    ) -> tuple[CoverageLabel, ContradictionLabel]:
        slots = {"question": question, "generated": generated, "reference": reference}
        cov_reply = self._ask(self.coverage_template.format(**slots))
        cov_match = _COVERAGE_LINE.search(cov_reply)
        if cov_match is None:
            raise JudgeReplyError(cov_reply)
        con_reply = self._ask(self.contradiction_template.format(**slots))
        con_match = _CONTRA_LINE.search(con_reply)
        if con_match is None:
            raise JudgeReplyError(con_reply)
        coverage = CoverageLabel(cov_match.group(1).lower())
        contradiction = (
            ContradictionLabel.CONTRADICTS
            if con_match.group(1).lower() == "yes"
            else ContradictionLabel.NO_CONTRADICTION
        )
        return coverage, contradiction


class HttpTokenCounter(_HttpBase):
    """POST {"texts": [...]} -> {"counts": [...]}."""

    def __init__(
        self, url: str, timeout: float = DEFAULT_TIMEOUT, max_in_flight: int = 8
    ):
        super().__init__(url, "tokenizer", timeout, max_in_flight)

    def counts(self, texts: list[str]) -> list[int]:
        body = self._post({"texts": texts})
        try:
            counts = [int(c) for c in body["counts"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise UpstreamError(
                self.name, f"malformed counts payload: {exc}", retryable=False
            ) from exc
        if len(counts) != len(texts):
            raise UpstreamError(
                self.name, f"expected {len(texts)} counts, got {len(counts)}", retryable=False
            )
        return counts

    def count(self, text: str) -> int:
        return self.counts([text])[0]


def probe_reachable(url: str, timeout: float = 1.0) -> bool:
    """Health-probe an upstream: any HTTP response counts as reachable."""
    try:
        httpx.get(url, timeout=timeout)
        return True
    except httpx.HTTPError:
        return False
