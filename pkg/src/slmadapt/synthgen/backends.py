"""Generation backends: a deterministic mock and an HTTP JSON client."""

from __future__ import annotations

import hashlib
import json
import os
import random
import re
import socket
import urllib.error
import urllib.request
from collections.abc import Callable
from dataclasses import asdict, dataclass
from typing import Protocol

from slmadapt.errors import BackendError, BackendTimeout
from slmadapt.synthgen.grammar import render_pairs
from slmadapt.synthgen.prompt import CONTEXT_LABEL


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    temperature: float
    top_p: float
    max_new_tokens: int
    seed: int | None = None


class GenerationBackend(Protocol):
    backend_id: str

    def generate(self, request: GenerationRequest) -> str:
        """Return the completion text; raise BackendError/BackendTimeout on failure."""
        ...


def target_context_of(prompt: str) -> str:
    """The passage after the last context label of a rendered prompt."""
    marker = CONTEXT_LABEL + "\n"
    idx = prompt.rfind(marker)
    return prompt[idx + len(marker):].strip() if idx >= 0 else prompt.strip()


_SENTENCE_END = re.compile(r"[।?!]+|\.(?=\s|$)")


class MockGenerationBackend:
    """Emits ``pairs_per_context`` canonical Q/A blocks built from the target passage.

    Output is a pure function of (prompt, seed). ``fail_when`` receives the
    target passage and makes every call for matching passages time out.
    """

    def __init__(
        self,
        backend_id: str = "mock",
        pairs_per_context: int = 5,
        *,
        fail_when: Callable[[str], bool] | None = None,
        truncate_last: bool = False,
    ):
        self.backend_id = backend_id
        self.pairs_per_context = pairs_per_context
        self.fail_when = fail_when
        self.truncate_last = truncate_last
        self.calls = 0

    def generate(self, request: GenerationRequest) -> str:
        self.calls += 1
        passage = target_context_of(request.prompt)
        if self.fail_when is not None and self.fail_when(passage):
            raise BackendTimeout(f"{self.backend_id}: simulated timeout")
        sentences = [s.strip() for s in _SENTENCE_END.split(passage) if s.strip()] or [passage]
        base = hashlib.sha256(f"{request.seed}\x1f{request.prompt}".encode("utf-8")).hexdigest()
        pairs = []
        for i in range(self.pairs_per_context):
            sentence = sentences[i % len(sentences)]
            words = sentence.split()
            rng = random.Random(f"{base}:{i}")
            start = rng.randrange(max(1, len(words) - 2))
            topic = " ".join(words[start : start + 3])
            pairs.append((f"प्रसंग के अनुसार '{topic}' के बारे में क्या बताया गया है? ({i + 1})", f"{sentence}।"))
        text = render_pairs(pairs)
        if self.truncate_last:
            text += f"\n\nQ{len(pairs) + 1}: {sentences[0]} कहाँ"
        return text + "\n"


class CallableBackend:
    """Wrap ``fn(request) -> str`` as a backend (handy for scripted tests)."""

    def __init__(self, backend_id: str, fn: Callable[[GenerationRequest], str]):
        self.backend_id = backend_id
        self.fn = fn

    def generate(self, request: GenerationRequest) -> str:
        return self.fn(request)


class HttpGenerationBackend:
    """POST ``{"prompt", "temperature", "top_p", "max_new_tokens", "seed"}`` as JSON.

    The completion is read from ``response_field`` of the JSON reply, falling
    back to an OpenAI-style ``choices[0].text``. The bearer token comes from
    the environment variable named by ``api_key_env``.
    """

    def __init__(
        self,
        endpoint: str,
        backend_id: str,
        *,
        api_key_env: str = "SLMADAPT_API_KEY",
        timeout: float = 120.0,
        response_field: str = "completion",
    ):
        self.endpoint = endpoint
        self.backend_id = backend_id
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.response_field = response_field

    def generate(self, request: GenerationRequest) -> str:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        body = json.dumps(asdict(request), ensure_ascii=False).encode("utf-8")
        req = urllib.request.Request(self.endpoint, data=body, headers=headers, method="POST")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
        except (socket.timeout, TimeoutError) as exc:
            raise BackendTimeout(f"{self.backend_id}: request timed out") from exc
        except urllib.error.HTTPError as exc:
            raise BackendError(f"{self.backend_id}: HTTP {exc.code}") from exc
        except urllib.error.URLError as exc:
            if isinstance(exc.reason, (socket.timeout, TimeoutError)):
                raise BackendTimeout(f"{self.backend_id}: request timed out") from exc
            raise BackendError(f"{self.backend_id}: {exc.reason}") from exc
        except json.JSONDecodeError as exc:
            raise BackendError(f"{self.backend_id}: response is not JSON") from exc
        if isinstance(payload, dict) and isinstance(payload.get(self.response_field), str):
            return payload[self.response_field]
        try:
            return payload["choices"][0]["text"]
        except (KeyError, IndexError, TypeError):
            raise BackendError(f"{self.backend_id}: no {self.response_field!r} field in response") from None
