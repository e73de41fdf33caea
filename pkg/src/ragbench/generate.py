"""Client for the external generation and relevance-scoring services, plus a
deterministic stub generator for model-free runs.

Wire contracts (JSON over HTTP):

    POST <base>/generate  {prompt, beam_size, length_penalty, max_new_tokens}
                          -> {text, model_tag}
    POST <base>/score     {query, document} -> {score}
"""

from __future__ import annotations

import json
import time
import urllib.error
import urllib.request
from dataclasses import asdict, dataclass
from typing import Sequence

from .rerank import RankedContext


class GenerationError(RuntimeError):
    """Raised for transport failures or contract violations of a service."""


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    beam_size: int = 4
    length_penalty: float = 1.0
    max_new_tokens: int = 256
    timeout: float = 30.0  # seconds, client-side only

    def __post_init__(self) -> None:
        if self.beam_size < 1:
            raise ValueError(f"beam_size must be >= 1, got {self.beam_size}")
        if self.max_new_tokens < 1:
            raise ValueError(f"max_new_tokens must be >= 1, got {self.max_new_tokens}")

    def wire_payload(self) -> dict:
        """The /generate request body; field names are part of the contract."""
        return {
            "prompt": self.prompt,
            "beam_size": self.beam_size,
            "length_penalty": self.length_penalty,
            "max_new_tokens": self.max_new_tokens,
        }


@dataclass(frozen=True)
class GenerationResponse:
    text: str
    latency: float  # seconds
    model_tag: str


@dataclass(frozen=True)
class EndpointConfig:
    url: str  # base URL, e.g. http://localhost:8600
    timeout: float = 30.0
    retries: int = 0  # at most one retry is supported

    def __post_init__(self) -> None:
        if self.retries not in (0, 1):
            raise ValueError("retries must be 0 or 1")


def request_to_json(request: GenerationRequest) -> str:
    return json.dumps(asdict(request), sort_keys=True)


def request_from_json(data: str) -> GenerationRequest:
    return GenerationRequest(**json.loads(data))


def _post_json(url: str, payload: dict, timeout: float) -> dict:
    body = json.dumps(payload).encode("utf-8")
    req = urllib.request.Request(url, data=body, headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            raw = resp.read()
    except urllib.error.HTTPError as exc:
        detail = exc.read().decode("utf-8", "replace")[:200]
        raise GenerationError(f"{url}: HTTP {exc.code} {detail}") from None
    except (urllib.error.URLError, OSError) as exc:
        raise GenerationError(f"{url}: {exc}") from None
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        raise GenerationError(f"{url}: response is not valid JSON") from None


def generate(endpoint: EndpointConfig, request: GenerationRequest) -> GenerationResponse:
    """Call the /generate service, echoing the decoding parameters verbatim."""
    url = endpoint.url.rstrip("/") + "/generate"
    start = time.monotonic()
    attempts = endpoint.retries + 1
    last_error: GenerationError | None = None
    for _ in range(attempts):
        try:
            data = _post_json(url, request.wire_payload(), request.timeout)
            break
        except GenerationError as exc:
            last_error = exc
    else:
        raise last_error  # type: ignore[misc]
    text = data.get("text")
    if not isinstance(text, str) or not text:
        raise GenerationError(f"{url}: service returned empty text")
    return GenerationResponse(
        text=text,
        latency=time.monotonic() - start,
        model_tag=str(data.get("model_tag", "")),
    )


def stub_generate(request: GenerationRequest, contexts: Sequence[RankedContext]) -> GenerationResponse:
    """Model-free generator: echo the rank-1 context's answer verbatim.

    Makes the whole pipeline deterministic so experiments are byte-for-byte
    reproducible without a model server.
    """
    if not contexts:
        raise GenerationError("stub generator needs at least one context")
    top = min(contexts, key=lambda ctx: ctx.rank)
    return GenerationResponse(text=top.qa.answer, latency=0.0, model_tag="stub-echo-top1")


class RelevanceClient:
    """Callable client for the /score contract; usable as a seq2seq scorer."""

    def __init__(self, endpoint: EndpointConfig):
        self.endpoint = endpoint
        self._url = endpoint.url.rstrip("/") + "/score"

    def __call__(self, query: str, document: str) -> float:
        data = _post_json(self._url, {"query": query, "document": document}, self.endpoint.timeout)
        score = data.get("score")
        if not isinstance(score, (int, float)):
            raise GenerationError(f"{self._url}: missing numeric score")
        return float(score)
