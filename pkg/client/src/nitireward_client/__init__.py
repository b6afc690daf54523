"""Client SDK for the nitireward batch-scoring service."""

__version__ = "0.1.0"

from .client import ClientConfig, ScoringClient, published_schema
from .errors import ClientError, SchemaError, ServerError, TransportError

__all__ = [
    "__version__",
    "ClientConfig",
    "ClientError",
    "SchemaError",
    "ScoringClient",
    "ServerError",
    "TransportError",
    "published_schema",
]
