"""Typed client errors: transport, schema and server failures are distinct
so training loops can decide what to retry themselves."""

from __future__ import annotations


class ClientError(Exception):
    """Base class for all scoring-client failures."""


class TransportError(ClientError):
    """The service could not be reached (connect, timeout, protocol)."""


class ServerError(ClientError):
    """The service answered with an error status."""

    def __init__(self, status_code: int, detail: str = ""):
        self.status_code = status_code
        self.detail = detail
        super().__init__(f"server returned {status_code}: {detail}")

    @property
    def retryable(self) -> bool:
        return self.status_code >= 500


class SchemaError(ClientError):
    """A request or response violated the published wire schema."""
