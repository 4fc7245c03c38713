"""Chat provider abstraction with transcript record/replay.

Replay keys responses by a fingerprint of the canonicalized request, so any
prompt edit loudly invalidates stale recordings instead of silently replaying
a mismatched response.
"""
from __future__ import annotations

import hashlib
import os
import time
from dataclasses import dataclass, field

from .errors import ProviderError


@dataclass(frozen=True)
class ChatRequest:
    system_text: str
    user_text: str
    image_ref: str | None = None

    def __post_init__(self):
        if not self.user_text:
            raise ValueError("user_text must be non-empty")

    def canonical(self) -> str:
        return "\n".join(
            [
                "SYSTEM",
                self.system_text,
                "USER",
                self.user_text,
                "IMAGE",
                self.image_ref or "",
            ]
        )

    def fingerprint(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


@dataclass(frozen=True)
class ChatResponse:
    text: str
    provider_id: str
    latency: float = 0.0


@dataclass
class Transcript:
    """Ordered fingerprint -> response-text records."""

    records: dict = field(default_factory=dict)

    def add(self, fingerprint: str, text: str):
        if fingerprint in self.records:
            raise ProviderError(f"duplicate transcript fingerprint {fingerprint}")
        self.records[fingerprint] = text

    def lookup(self, fingerprint: str) -> str:
        if fingerprint not in self.records:
            raise ProviderError(f"no transcript record for fingerprint {fingerprint}")
        return self.records[fingerprint]

    def dump(self) -> str:
        chunks = []
        for fp, text in self.records.items():
            chunks.append(f"FINGERPRINT: {fp}\nRESPONSE:\n{text.rstrip()}")
        return "\n\n".join(chunks) + "\n"

    @classmethod
    def loads(cls, text: str) -> "Transcript":
        transcript = cls()
        fp = None
        body = None
        for raw in text.splitlines():
            if raw.startswith("FINGERPRINT:"):
                if fp is not None:
                    transcript.add(fp, "\n".join(body).rstrip())
                fp = raw.split(":", 1)[1].strip()
                body = None
            elif raw.startswith("RESPONSE:"):
                if fp is None:
                    raise ProviderError("RESPONSE before FINGERPRINT in transcript")
                body = []
            elif body is not None:
                body.append(raw)
        if fp is not None:
            transcript.add(fp, "\n".join(body or []).rstrip())
        return transcript

    @classmethod
    def load(cls, path) -> "Transcript":
        with open(path) as fh:
            return cls.loads(fh.read())

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.dump())


class ReplayChatProvider:
    """Serves responses from a transcript; never touches the network."""

    provider_id = "replay"

    def __init__(self, transcript: Transcript):
        self.transcript = transcript

    def complete(self, request: ChatRequest) -> ChatResponse:
        text = self.transcript.lookup(request.fingerprint())
        return ChatResponse(text=text, provider_id=self.provider_id)


class RecordingChatProvider:
    """Wraps a live provider and records every exchange into a transcript."""

    def __init__(self, inner, transcript: Transcript | None = None):
        self.inner = inner
        self.transcript = transcript if transcript is not None else Transcript()
        self.provider_id = f"recording({inner.provider_id})"

    def complete(self, request: ChatRequest) -> ChatResponse:
        response = self.inner.complete(request)
        self.transcript.add(request.fingerprint(), response.text)
        return response


class OpenAIChatProvider:
    """Minimal live provider against an OpenAI-style chat endpoint.

    One retry, then fail; no silent fallback.  Credentials come from the
    environment and are never read in replay mode.
    """

    def __init__(self, model: str, base_url: str = "https://api.openai.com/v1",
                 api_key_env: str = "OPENAI_API_KEY"):
        self.model = model
        self.base_url = base_url
        self.api_key_env = api_key_env
        self.provider_id = f"openai:{model}"

    def complete(self, request: ChatRequest) -> ChatResponse:
        import requests

        api_key = os.environ.get(self.api_key_env)
        if not api_key:
            raise ProviderError(f"missing credentials in ${self.api_key_env}")
        messages = []
        if request.system_text:
            messages.append({"role": "system", "content": request.system_text})
        messages.append({"role": "user", "content": request.user_text})
        payload = {"model": self.model, "messages": messages}
        last_error = None
        for _ in range(2):  # one retry
            start = time.monotonic()
            try:
                resp = requests.post(
                    f"{self.base_url}/chat/completions",
                    json=payload,
                    headers={"Authorization": f"Bearer {api_key}"},
                    timeout=120,
                )
                resp.raise_for_status()
                text = resp.json()["choices"][0]["message"]["content"]
                return ChatResponse(
                    text=text,
                    provider_id=self.provider_id,
                    latency=time.monotonic() - start,
                )
            except Exception as exc:  # noqa: BLE001 - wrapped below
                last_error = exc
        raise ProviderError(f"provider call failed after retry: {last_error}")
