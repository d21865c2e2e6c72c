"""Remote chat-completion backend with bounded concurrency, retries, a
request-hash-keyed transcript cache, and a zero-network replay mode.

Wire format: POST {endpoint}/chat/completions with a JSON body holding
``model`` and a ``messages`` array; the API key is read from the configured
environment variable and sent as a bearer token. The model must reply with a
single fenced JSON block; a reply that does not parse degrades to an
unknown-style response instead of failing the pipeline.
"""

from __future__ import annotations

import json
import os
import re
import threading
import time
from pathlib import Path

import requests

from ..errors import BackendError, TransportError
from .base import (
    BackendConfig,
    ReasoningBackend,
    ReasoningRequest,
    ReasoningResponse,
    RequestKind,
    degraded_result,
)

_SYSTEM_PROMPT = (
    "You are a program-analysis assistant. Answer every request with exactly "
    "one fenced JSON block (```json ... ```) matching the requested schema. "
    "No prose outside the block."
)

_KIND_INSTRUCTIONS: dict[RequestKind, str] = {
    RequestKind.GENERATE_ENTRY_SPEC: (
        "Write the function's expected pre/post specification from the domain "
        "knowledge and the implementation, plus an expected specification for "
        "each callee call site. Schema: {\"specs\": {name: {\"function\", "
        "\"pre\": {\"text\", \"formula\"}, \"post\": {...}, \"provenance\"}}, "
        "\"expectations\": [{\"caller\", \"callee\", \"call_site\", "
        "\"callee_params\", \"pre\": {...}, \"post\": {...}}]}"
    ),
    RequestKind.GENERATE_INTERNAL_SPEC: (
        "Combine the caller expectations (disjoin preconditions, conjoin "
        "postconditions), refine with the implementation and domain text, and "
        "emit expectations for callees. Same schema as GenerateEntrySpec."
    ),
    RequestKind.INFER_POSTCONDITION: (
        "Infer the postcondition of the code block from the given "
        "precondition. Schema: {\"post\": {\"text\", \"formula\"}}"
    ),
    RequestKind.CHECK_ENTAILMENT: (
        "Decide whether the antecedent entails the consequent. Schema: "
        "{\"verdict\": \"holds\"|\"fails\"|\"unknown\", \"counterexample\": "
        "{var: int} | null}"
    ),
    RequestKind.PROPOSE_INVARIANT: (
        "Propose a loop invariant that the precondition implies, every "
        "iteration preserves, and that, with the negated guard, implies the "
        "loop postcondition. Schema: {\"invariant\": {\"text\", \"formula\"} | null}"
    ),
    RequestKind.MERGE_CONDITIONS: (
        "Merge the conditions (mode 'any': a state satisfying any input "
        "satisfies the merge; mode 'all': the merge implies every input), "
        "rephrasing redundancies. Schema: {\"merged\": {\"text\", \"formula\"}}"
    ),
    RequestKind.GENERATE_TEST_CASE: (
        "Produce a system-entry input that would trigger the described bug, "
        "different from all prior attempts. Schema: {\"input\": string, "
        "\"expected_signal\": \"crash\"|\"divergence\"|\"spec_violation\"}"
    ),
    RequestKind.PROPOSE_PHASE_PARTITION: (
        "Group the functions into self-contained phases. Schema: "
        "{\"phases\": {label: [function names]}}"
    ),
    RequestKind.FORMALIZE_CONDITION: (
        "Translate the condition into a quantifier-free integer formula; use "
        "U_<name>(args) for concepts that stay ambiguous. Schema: "
        "{\"formula\": string | null}"
    ),
}

_JSON_BLOCK_RE = re.compile(r"```json\s*\n(.*?)```", re.DOTALL)


def build_messages(req: ReasoningRequest) -> list[dict]:
    """Deterministic prompt assembly; the payload rides along as JSON so the
    request is reproducible and the transcript cache key is semantic."""
    user = "\n".join(
        [
            f"REQUEST KIND: {req.kind.value}",
            "",
            _KIND_INSTRUCTIONS[req.kind],
            "",
            "PAYLOAD:",
            "```json",
            json.dumps(req.payload, sort_keys=True, indent=2),
            "```",
        ]
    )
    return [
        {"role": "system", "content": _SYSTEM_PROMPT},
        {"role": "user", "content": user},
    ]


def parse_envelope(kind: RequestKind, content: str) -> dict | None:
    """Extract the single fenced JSON block; None when malformed."""
    m = _JSON_BLOCK_RE.search(content)
    if not m:
        return None
    try:
        doc = json.loads(m.group(1))
    except json.JSONDecodeError:
        return None
    return doc if isinstance(doc, dict) else None


class TranscriptCache:
    """One JSON file per request hash with the request, the raw model output
    and the token count; enough to replay a run with zero network."""

    def __init__(self, directory: str | Path):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)

    def path(self, req: ReasoningRequest) -> Path:
        return self.dir / f"{req.hash()}.json"

    def load(self, req: ReasoningRequest) -> tuple[str, int] | None:
        p = self.path(req)
        if not p.exists():
            return None
        doc = json.loads(p.read_text(encoding="utf-8"))
        return doc["raw"], int(doc.get("tokens_used", 0))

    def store(self, req: ReasoningRequest, raw: str, tokens_used: int) -> None:
        doc = {
            "kind": req.kind.value,
            "payload": req.payload,
            "raw": raw,
            "tokens_used": tokens_used,
        }
        self.path(req).write_text(
            json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )

    def total_tokens(self) -> int:
        total = 0
        for p in sorted(self.dir.glob("*.json")):
            total += int(json.loads(p.read_text(encoding="utf-8")).get("tokens_used", 0))
        return total


class RemoteBackend(ReasoningBackend):
    """HTTP backend; max_concurrent_requests is enforced with an admission
    semaphore so a worker pool of any width cannot overrun the proxy."""

    def __init__(self, config: BackendConfig, cache: TranscriptCache | None = None,
                 replay_only: bool = False):
        if not replay_only and not config.endpoint:
            raise BackendError("remote backend needs an endpoint URL")
        self.config = config
        self.batch_size = config.batch_size
        self.cache = cache
        self.replay_only = replay_only
        self._gate = threading.Semaphore(config.max_concurrent_requests)
        self._session = requests.Session() if not replay_only else None

    def submit(self, req: ReasoningRequest) -> ReasoningResponse:
        if self.cache is not None:
            hit = self.cache.load(req)
            if hit is not None:
                raw, tokens = hit
                return self._decode(req, raw, tokens)
        if self.replay_only:
            raise BackendError(
                f"replay cache has no transcript for request {req.hash()[:12]} "
                f"({req.kind.value})"
            )
        raw, tokens = self._post(req)
        if self.cache is not None:
            self.cache.store(req, raw, tokens)
        return self._decode(req, raw, tokens)

    def submit_batch(self, reqs: list[ReasoningRequest]) -> list[ReasoningResponse]:
        if len(reqs) > self.batch_size:
            raise BackendError(
                f"batch of {len(reqs)} exceeds the batch size {self.batch_size}"
            )
        if len(reqs) <= 1:
            return super().submit_batch(reqs)
        from concurrent.futures import ThreadPoolExecutor

        def one(req: ReasoningRequest) -> ReasoningResponse:
            try:
                return self.submit(req)
            except BackendError as exc:
                return ReasoningResponse(
                    req.kind, degraded_result(req.kind), raw=f"backend error: {exc}"
                )

        with ThreadPoolExecutor(max_workers=len(reqs)) as pool:
            return list(pool.map(one, reqs))

    def _decode(self, req: ReasoningRequest, raw: str, tokens: int) -> ReasoningResponse:
        doc = parse_envelope(req.kind, raw)
        if doc is None:
            # malformed model output is never fatal: degrade to unknown
            return ReasoningResponse(
                req.kind, degraded_result(req.kind), raw=raw, tokens_used=tokens
            )
        return ReasoningResponse(req.kind, doc, raw=raw, tokens_used=tokens)

    def _post(self, req: ReasoningRequest) -> tuple[str, int]:
        url = self.config.endpoint.rstrip("/") + "/chat/completions"
        body = {"model": self.config.model, "messages": build_messages(req)}
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"

        last_error: Exception | None = None
        delay = 0.1
        for attempt in range(self.config.retries + 1):
            try:
                with self._gate:
                    resp = self._session.post(
                        url, json=body, headers=headers,
                        timeout=self.config.timeout_seconds,
                    )
                if resp.status_code >= 500 or resp.status_code == 429:
                    raise TransportError(f"server answered {resp.status_code}")
                resp.raise_for_status()
                doc = resp.json()
                content = doc["choices"][0]["message"]["content"]
                tokens = int((doc.get("usage") or {}).get("total_tokens", 0))
                return str(content), tokens
            except (requests.RequestException, TransportError, KeyError,
                    ValueError) as exc:
                last_error = exc
                if attempt < self.config.retries:
                    time.sleep(delay)
                    delay = min(delay * 2, 2.0)
        raise TransportError(
            f"request failed after {self.config.retries + 1} attempts: {last_error}"
        )


def replay_backend(config: BackendConfig) -> RemoteBackend:
    """A backend that serves everything from the transcript cache and
    touches no network."""
    if not config.cache_dir:
        raise BackendError("replay mode requires a transcript cache directory")
    cache_dir = Path(config.cache_dir)
    if not cache_dir.exists():
        raise BackendError(f"replay cache directory {cache_dir} does not exist")
    return RemoteBackend(config, TranscriptCache(cache_dir), replay_only=True)
