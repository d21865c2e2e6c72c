"""The pluggable semantic-reasoning interface.

Every use of external reasoning in the pipeline is reified as one request
kind with a JSON payload, served either by the deterministic oracle or by a
remote chat-completion endpoint. Payloads are plain JSON so requests can be
hashed for the replay cache and shipped over the wire unchanged.
"""

from __future__ import annotations

import hashlib
import json
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum

from ..errors import BackendError


class RequestKind(str, Enum):
    GENERATE_ENTRY_SPEC = "GenerateEntrySpec"
    GENERATE_INTERNAL_SPEC = "GenerateInternalSpec"
    INFER_POSTCONDITION = "InferPostcondition"
    CHECK_ENTAILMENT = "CheckEntailment"
    PROPOSE_INVARIANT = "ProposeInvariant"
    MERGE_CONDITIONS = "MergeConditions"
    GENERATE_TEST_CASE = "GenerateTestCase"
    PROPOSE_PHASE_PARTITION = "ProposePhasePartition"
    FORMALIZE_CONDITION = "FormalizeCondition"


@dataclass(frozen=True)
class ReasoningRequest:
    kind: RequestKind
    payload: dict

    def canonical_json(self) -> str:
        return json.dumps(
            {"kind": self.kind.value, "payload": self.payload},
            sort_keys=True,
            separators=(",", ":"),
        )

    def hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ReasoningResponse:
    kind: RequestKind
    result: dict | None  # kind-specific; None when the backend could not answer
    raw: str = ""
    tokens_used: int = 0

    @property
    def verdict(self) -> str:
        if isinstance(self.result, dict) and "verdict" in self.result:
            return self.result["verdict"]
        return "unknown"


@dataclass(frozen=True)
class BackendConfig:
    endpoint: str = ""
    model: str = ""
    api_key_env: str = "SPECFORGE_API_KEY"
    batch_size: int = 8
    max_concurrent_requests: int = 16
    timeout_seconds: float = 60.0
    retries: int = 2
    cache_dir: str | None = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.timeout_seconds <= 0:
            raise ValueError("timeout must be positive")


def degraded_result(kind: RequestKind) -> dict | None:
    """The safe 'could not answer' result for a kind: verdict-shaped kinds
    degrade to unknown, everything else to no result."""
    if kind is RequestKind.CHECK_ENTAILMENT:
        return {"verdict": "unknown", "counterexample": None}
    return None


class ReasoningBackend(ABC):
    """Thread-safe request service. Batching is semantically transparent:
    responses are positionally aligned with requests, and one failing item
    degrades to an unknown-style response instead of failing the batch."""

    batch_size: int = 8

    @abstractmethod
    def submit(self, req: ReasoningRequest) -> ReasoningResponse:
        raise NotImplementedError

    def submit_batch(self, reqs: list[ReasoningRequest]) -> list[ReasoningResponse]:
        if len(reqs) > self.batch_size:
            raise BackendError(
                f"batch of {len(reqs)} exceeds the batch size {self.batch_size}"
            )
        out: list[ReasoningResponse] = []
        for req in reqs:
            try:
                out.append(self.submit(req))
            except BackendError as exc:
                out.append(
                    ReasoningResponse(
                        req.kind, degraded_result(req.kind),
                        raw=f"backend error: {exc}",
                    )
                )
        return out


class CountingBackend(ReasoningBackend):
    """Wrapper that accumulates token usage across all traffic it carries."""

    def __init__(self, inner: ReasoningBackend):
        self.inner = inner
        self.batch_size = inner.batch_size
        self.tokens_used = 0
        self.requests = 0

    def _note(self, resp: ReasoningResponse) -> ReasoningResponse:
        self.tokens_used += resp.tokens_used
        self.requests += 1
        return resp

    def submit(self, req: ReasoningRequest) -> ReasoningResponse:
        return self._note(self.inner.submit(req))

    def submit_batch(self, reqs: list[ReasoningRequest]) -> list[ReasoningResponse]:
        return [self._note(r) for r in self.inner.submit_batch(reqs)]
