"""HTTP client for a live model server.

``POST /score`` returns the teacher-forced label log-probability for one
(candidate, condition, role) triple; ``POST /sample`` draws one answer.
"""

from __future__ import annotations

import logging
import math
import time
from typing import Callable, Sequence

import httpx
import numpy as np

from ..errors import ProtocolError, ScoringTimeout, ServerError
from ..game import InitScores

log = logging.getLogger(__name__)

MAX_RETRIES = 3
BACKOFF_START = 0.25
RETRY_STATUSES = frozenset({429, 500, 502, 503, 504})
CONDITIONS = ("correct", "incorrect")
ROLES = ("generator", "verifier")


class ScoringClient:
    """Blocking client; safe to share between threads (httpx pools connections)."""

    def __init__(
        self,
        endpoint: str,
        timeout: float = 30.0,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self._client = httpx.Client(base_url=endpoint.rstrip("/"), timeout=timeout, transport=transport)
        self._sleep = sleep

    def close(self) -> None:
        self._client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _post(self, path: str, body: dict, context: dict) -> dict:
        """POST with up to ``MAX_RETRIES`` retries on transient failures, backoff 0.25 s doubling."""
        delay = BACKOFF_START
        for attempt in range(MAX_RETRIES + 1):
            last = attempt == MAX_RETRIES
            try:
                resp = self._client.post(path, json=body)
            except httpx.TimeoutException as exc:
                if last:
                    raise ScoringTimeout(f"{path} timed out after {attempt + 1} attempts: {exc}", **context) from exc
            except httpx.TransportError as exc:
                if last:
                    raise ServerError(f"{path} unreachable after {attempt + 1} attempts: {exc}", **context) from exc
            else:
                if resp.status_code < 400:
                    try:
                        return resp.json()
                    except ValueError as exc:
                        raise ProtocolError(f"{path} returned non-JSON body", **context) from exc
                if resp.status_code not in RETRY_STATUSES:
                    raise ServerError(f"{path} returned HTTP {resp.status_code}", **context)
                if last:
                    raise ServerError(
                        f"{path} returned HTTP {resp.status_code} after {attempt + 1} attempts", **context
                    )
            log.debug("retrying %s in %.2fs (attempt %d)", path, delay, attempt + 1)
            self._sleep(delay)
            delay *= 2
        raise AssertionError("unreachable")

    def score(self, question: str, image_ref: str | None, candidate: str, condition: str, role: str) -> float:
        context = {"candidate": candidate, "condition": condition, "role": role}
        body = {"question": question, "image_ref": image_ref, "candidate": candidate, "condition": condition, "role": role}
        data = self._post("/score", body, context)
        lp = data.get("logprob") if isinstance(data, dict) else None
        if isinstance(lp, bool) or not isinstance(lp, (int, float)):
            raise ProtocolError("response lacks a numeric 'logprob'", **context)
        lp = float(lp)
        if not math.isfinite(lp) or lp > 0:
            raise ProtocolError(f"log-probability must be finite and <= 0, got {lp!r}", **context)
        return lp

    def sample(self, question: str, image_ref: str | None, temperature: float, max_tokens: int = 32) -> tuple[str, list[float]]:
        body = {"question": question, "image_ref": image_ref, "temperature": temperature, "max_tokens": max_tokens}
        data = self._post("/sample", body, {"condition": f"temperature={temperature}"})
        text, emb = data.get("text"), data.get("embedding")
        if not isinstance(text, str) or not isinstance(emb, list) or not emb:
            raise ProtocolError("sample response needs 'text' and a non-empty 'embedding'")
        try:
            vec = [float(x) for x in emb]
        except (TypeError, ValueError):
            raise ProtocolError("embedding entries must be numbers") from None
        return text, vec

    def score_candidates(self, question: str, image_ref: str | None, candidates: Sequence[str]) -> InitScores:
        g = np.empty((len(candidates), 2))
        v = np.empty((len(candidates), 2))
        for i, cand in enumerate(candidates):
            for s, cond in enumerate(CONDITIONS):
                g[i, s] = self.score(question, image_ref, cand, cond, "generator")
                v[i, s] = self.score(question, image_ref, cand, cond, "verifier")
        return InitScores(g, v)


def remote_score(endpoint: str, question: str, image_ref: str | None, candidates: Sequence[str], **client_kw) -> InitScores:
    with ScoringClient(endpoint, **client_kw) as client:
        return client.score_candidates(question, image_ref, candidates)
