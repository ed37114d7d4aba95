"""Minimal chat-completions client with retry, backoff, and an in-flight cap.

Endpoint and credentials come from explicit arguments or the environment:
``TSREASON_ENDPOINT``, ``TSREASON_API_KEY``, ``TSREASON_MODEL``.
"""

from __future__ import annotations

import hashlib
import logging
import os
import threading
import time
from dataclasses import dataclass, field

import requests

log = logging.getLogger(__name__)

ENV_ENDPOINT = "TSREASON_ENDPOINT"
ENV_API_KEY = "TSREASON_API_KEY"
ENV_MODEL = "TSREASON_MODEL"

RETRYABLE_STATUS = frozenset({429, 500, 502, 503, 504})


class TransportError(RuntimeError):
    """Base class for anything that went wrong talking to the endpoint."""


class GatewayTimeout(TransportError):
    pass


class GatewayHTTPError(TransportError):
    def __init__(self, status: int, body: str):
        super().__init__(f"endpoint returned HTTP {status}: {body[:200]}")
        self.status = status


class GatewayProtocolError(TransportError):
    """2xx response whose payload does not follow the chat wire format."""


@dataclass
class ChatClient:
    base_url: str
    model: str
    api_key: str | None = None
    timeout: float = 30.0
    max_retries: int = 2
    backoff: float = 0.25
    max_in_flight: int = 8
    _gate: threading.Semaphore = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not self.base_url:
            raise ValueError("endpoint URL required")
        self._gate = threading.Semaphore(self.max_in_flight)

    @classmethod
    def from_env(cls, **overrides) -> "ChatClient":
        endpoint = overrides.pop("base_url", None) or os.environ.get(ENV_ENDPOINT)
        model = overrides.pop("model", None) or os.environ.get(ENV_MODEL, "default")
        if not endpoint:
            raise ValueError(f"no endpoint configured; set {ENV_ENDPOINT}")
        return cls(
            base_url=endpoint,
            model=model,
            api_key=os.environ.get(ENV_API_KEY),
            **overrides,
        )

    def complete(
        self,
        system: str,
        user: str,
        temperature: float = 0.0,
        max_tokens: int = 1024,
    ) -> str:
        payload = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": temperature,
            "max_tokens": max_tokens,
        }
        url = self.base_url.rstrip("/") + "/chat/completions"
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"

        last_error: TransportError | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                with self._gate:
                    response = requests.post(
                        url, json=payload, headers=headers, timeout=self.timeout
                    )
            except requests.Timeout:
                last_error = GatewayTimeout(f"request timed out after {self.timeout}s")
                continue
            except requests.RequestException as exc:
                last_error = TransportError(f"request failed: {exc}")
                continue
            if response.status_code in RETRYABLE_STATUS:
                last_error = GatewayHTTPError(response.status_code, response.text)
                continue
            if not 200 <= response.status_code < 300:
                raise GatewayHTTPError(response.status_code, response.text)
            text = self._extract(response)
            log.debug(
                "chat request=%s response=%s",
                hashlib.sha256(str(payload).encode("utf-8")).hexdigest()[:12],
                hashlib.sha256(text.encode("utf-8")).hexdigest()[:12],
            )
            return text
        assert last_error is not None
        raise last_error

    @staticmethod
    def _extract(response: requests.Response) -> str:
        try:
            body = response.json()
            content = body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise GatewayProtocolError(f"malformed completion payload: {exc}") from None
        if not isinstance(content, str):
            raise GatewayProtocolError("completion content is not text")
        return content
