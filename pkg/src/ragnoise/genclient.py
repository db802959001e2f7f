"""Generation clients: a deterministic test stub and a chat-completions adapter."""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass

import requests

from ragnoise.errors import TransportError
from ragnoise.retrieval.corpus import Document

logger = logging.getLogger(__name__)

API_KEY_ENV = "RAGNOISE_API_KEY"


class StubGenerator:
    """Deterministic generator for desk-scale runs.

    Constructed with the gold map (record id -> gold answers); returns the
    first gold answer contained case-insensitively in any retrieved document's
    contents, else "unknown".  This makes document relevance the only driver
    of end-to-end scores.
    """

    kind = "stub"

    def __init__(self, gold_map: dict[str, list[str]]):
        self.gold_map = gold_map

    def generate(self, query: str, docs: list[Document], record_id: str | None = None) -> str:
        golds = self.gold_map.get(record_id or "", [])
        haystacks = [d.contents.lower() for d in docs]
        for gold in golds:
            needle = gold.lower()
            if any(needle in h for h in haystacks):
                return gold
        return "unknown"


@dataclass
class ChatCompletionsClient:
    """Minimal OpenAI-compatible chat client with bounded retries.

    Decoding is pinned deterministic (temperature 0, top_p 1); the bearer token
    comes from the environment so configs stay secret-free.
    """

    base_url: str
    model: str
    max_tokens: int = 256
    timeout: float = 30.0
    max_retries: int = 3
    backoff: float = 1.0
    api_key_env: str = API_KEY_ENV

    def complete(self, prompt: str, system: str | None = None) -> str:
        messages = []
        if system:
            messages.append({"role": "system", "content": system})
        messages.append({"role": "user", "content": prompt})
        body = {
            "model": self.model,
            "messages": messages,
            "temperature": 0,
            "top_p": 1,
            "max_tokens": self.max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        url = self.base_url.rstrip("/") + "/chat/completions"
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            try:
                resp = requests.post(url, json=body, headers=headers, timeout=self.timeout)
                if resp.status_code in (429,) or resp.status_code >= 500:
                    raise TransportError(f"HTTP {resp.status_code} from {url}")
                resp.raise_for_status()
                data = resp.json()
                return data["choices"][0]["message"]["content"]
            except (requests.RequestException, TransportError, KeyError, ValueError) as exc:
                last_error = exc
                if attempt < self.max_retries:
                    time.sleep(self.backoff * 2**attempt)
        raise TransportError(f"giving up on {url} after {self.max_retries + 1} attempts: {last_error}")


class ExternalGenerator:
    """Answer generation through a chat-completions endpoint and a prompt template."""

    kind = "external"

    def __init__(self, client: ChatCompletionsClient, prompt_template: str):
        self.client = client
        self.prompt_template = prompt_template

    def generate(self, query: str, docs: list[Document], record_id: str | None = None) -> str:
        numbered = "\n".join(f"{i + 1}. {d.contents}" for i, d in enumerate(docs))
        prompt = self.prompt_template.format(documents=numbered, question=query)
        return self.client.complete(prompt).strip()
