from .base import (
    BackendConfig,
    CountingBackend,
    ReasoningBackend,
    ReasoningRequest,
    ReasoningResponse,
    RequestKind,
    degraded_result,
)
from .oracle_backend import OracleBackend, parse_contracts
from .remote import RemoteBackend, TranscriptCache, replay_backend

__all__ = [
    "BackendConfig",
    "CountingBackend",
    "OracleBackend",
    "ReasoningBackend",
    "ReasoningRequest",
    "ReasoningResponse",
    "RemoteBackend",
    "RequestKind",
    "TranscriptCache",
    "degraded_result",
    "parse_contracts",
    "replay_backend",
]
