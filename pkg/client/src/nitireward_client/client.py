"""Scoring-service client for RL training loops.

Synchronous surface: splits group batches to the configured size, preserves
ordering across splits, retries transport failures and 5xx responses with
exponential backoff, and validates both sides of the wire against the
service's published schema shape. One instance is safe to share across
workers; connection pooling lives in the underlying httpx client.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from importlib import resources
from typing import Callable

import httpx

from .errors import SchemaError, ServerError, TransportError

MODES = ("citation_only", "semantic", "cov_con", "combined")
_REQUIRED_GROUP_KEYS = ("prompt_id", "completions", "gold_citations", "context_codes")

OnBatch = Callable[[int, int, list[dict]], None]


@dataclass
class ClientConfig:
    base_url: str
    timeout_seconds: float = 30.0
    max_retries: int = 3
    backoff_base_seconds: float = 0.25
    backoff_cap_seconds: float = 5.0
    max_batch_size: int = 10

    def validate(self) -> "ClientConfig":
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.max_batch_size < 1:
            raise ValueError("max_batch_size must be >= 1")
        if self.timeout_seconds <= 0:
            raise ValueError("timeout_seconds must be positive")
        return self


def published_schema() -> dict:
    """The wire schema this client was built against (the service's
    --schema dump, vendored)."""
    raw = resources.files("nitireward_client").joinpath("schema.json").read_text("utf-8")
    return json.loads(raw)


def _validate_group(group: dict, index: int) -> None:
    if not isinstance(group, dict):
        raise SchemaError(f"group {index} is not an object")
    for key in _REQUIRED_GROUP_KEYS:
        if key not in group:
            raise SchemaError(f"group {index} is missing required field {key!r}")
    if not isinstance(group["completions"], list) or not group["completions"]:
        raise SchemaError(f"group {index}: completions must be a non-empty list")


def _validate_result(group: dict, result: dict, index: int) -> None:
    if not isinstance(result, dict):
        raise SchemaError(f"result {index} is not an object")
    for key in ("prompt_id", "breakdowns", "advantages"):
        if key not in result:
            raise SchemaError(f"result {index} is missing field {key!r}")
    if result["prompt_id"] != group["prompt_id"]:
        raise SchemaError(
            f"result {index} prompt_id {result['prompt_id']!r} does not match "
            f"request {group['prompt_id']!r}"
        )
    n = len(group["completions"])
    if len(result["breakdowns"]) != n or len(result["advantages"]) != n:
        raise SchemaError(f"result {index} arrays do not align with {n} completions")


class ScoringClient:
    def __init__(self, config: ClientConfig):
        self.config = config.validate()
        self._http = httpx.Client(
            base_url=config.base_url.rstrip("/"), timeout=config.timeout_seconds
        )

    def close(self) -> None:
        self._http.close()

    def __enter__(self) -> "ScoringClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- internals ----------------------------------------------------------

    def _sleep_before(self, attempt: int) -> None:
        delay = min(
            self.config.backoff_cap_seconds,
            self.config.backoff_base_seconds * (2**attempt),
        )
        time.sleep(delay)

    def _post_with_retries(self, path: str, payload: dict) -> dict:
        last_error: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                self._sleep_before(attempt - 1)
            try:
                response = self._http.post(path, json=payload)
            except httpx.HTTPError as exc:
                last_error = TransportError(str(exc))
                continue
            if response.status_code >= 500:
                last_error = ServerError(response.status_code, response.text[:200])
                continue
            if response.status_code >= 400:
                raise ServerError(response.status_code, response.text[:200])
            try:
                return response.json()
            except ValueError as exc:
                raise SchemaError(f"response is not JSON: {exc}") from exc
        assert last_error is not None
        raise last_error

    # -- public surface -----------------------------------------------------

    def score_groups(
        self, groups: list[dict], mode: str, on_batch: OnBatch | None = None
    ) -> list[dict]:
        """Score rollout groups, splitting into batches of at most
        max_batch_size. Returns one result object per group, in request
        order; raises a typed error after retry exhaustion."""
        if mode not in MODES:
            raise SchemaError(f"unknown mode {mode!r}; expected one of {MODES}")
        for i, group in enumerate(groups):
            _validate_group(group, i)

        batches = [
            groups[i : i + self.config.max_batch_size]
            for i in range(0, len(groups), self.config.max_batch_size)
        ]
        results: list[dict] = []
        for batch_index, batch in enumerate(batches):
            body = self._post_with_retries(
                "/v1/score", {"mode": mode, "groups": batch}
            )
            batch_results = body.get("groups")
            if not isinstance(batch_results, list) or len(batch_results) != len(batch):
                raise SchemaError(
                    f"batch {batch_index}: expected {len(batch)} results, "
                    f"got {type(batch_results).__name__}"
                )
            for offset, (group, result) in enumerate(zip(batch, batch_results)):
                _validate_result(group, result, len(results) + offset)
            results.extend(batch_results)
            if on_batch is not None:
                on_batch(batch_index, len(batches), batch_results)
        return results

    def healthcheck(self) -> dict:
        """Mirror of /healthz; degraded upstreams come back in the report,
        only transport problems raise."""
        try:
            response = self._http.get("/healthz")
        except httpx.HTTPError as exc:
            raise TransportError(str(exc)) from exc
        if response.status_code != 200:
            raise ServerError(response.status_code, response.text[:200])
        try:
            return response.json()
        except ValueError as exc:
            raise SchemaError(f"health response is not JSON: {exc}") from exc
