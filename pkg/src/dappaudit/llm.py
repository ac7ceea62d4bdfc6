"""Minimal text-in/text-out client for the description-analysis model.

The model sits behind an HTTP endpoint: POST {"prompt": ...} returns
{"text": ...}. The transport is injectable so tests run against canned
responses; the endpoint URL comes from the argument or LLM_ENDPOINT_URL.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import requests

from .prompts import PromptBundle

ENDPOINT_ENV = "LLM_ENDPOINT_URL"


class LlmError(Exception):
    pass


def _default_post(url: str, payload: dict, timeout: float) -> dict:
    resp = requests.post(url, json=payload, timeout=timeout)
    resp.raise_for_status()
    return resp.json()


class LlmClient:
    def __init__(self, url: str | None = None, post=_default_post, timeout: float = 30.0):
        self.url = url or os.environ.get(ENDPOINT_ENV)
        if not self.url:
            raise LlmError(f"no endpoint configured; set {ENDPOINT_ENV}")
        self._post = post
        self._timeout = timeout

    def complete(self, prompt: str) -> str:
        try:
            body = self._post(self.url, {"prompt": prompt}, self._timeout)
        except Exception as exc:
            raise LlmError(f"endpoint request failed: {exc}") from exc
        if not isinstance(body, dict) or not isinstance(body.get("text"), str):
            raise LlmError("endpoint response missing text field")
        return body["text"]

    def run_bundle(self, bundle: PromptBundle, jobs: int = 1) -> list[str]:
        """One response per segment, in segment order."""
        prompts = [seg.text() for seg in bundle.segments]
        if jobs <= 1:
            return [self.complete(p) for p in prompts]
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(self.complete, prompts))
