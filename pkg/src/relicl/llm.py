"""Completion providers, response caching, and prediction parsing.

Three providers: "http" posts to any completion endpoint; "mock_echo"
returns the prompt verbatim; "mock_oracle" answers with the label of the
demonstration nearest the test block, which makes end-to-end pipelines
testable with known-correct behavior. Temperature 0 is the determinism
contract, so completions are cached by (sampling config, prompt) and a
warm cache never touches the network.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import requests

from .corpus import RelationLabel, RelationSchema, DEFAULT_NULL_NAME
from .errors import (
    BudgetError,
    DataError,
    EmptyCompletionError,
    ProviderError,
    TransientProviderError,
)
from .prompt import (
    CharRatioEstimator,
    LABEL_LINE_PREFIX,
    TokenEstimator,
)

logger = logging.getLogger(__name__)

PROVIDERS = ("mock_oracle", "mock_echo", "http")

ENDPOINT_ENV = "RELICL_LLM_ENDPOINT"
TOKEN_ENV = "RELICL_LLM_TOKEN"


@dataclass(frozen=True)
class LlmConfig:
    provider: str = "mock_oracle"
    model_name: str = "mock"
    temperature: float = 0.0
    max_output_tokens: int = 256
    top_p: float = 1.0
    frequency_penalty: float = 0.0
    presence_penalty: float = 0.0
    input_budget_tokens: int = 4097
    endpoint: Optional[str] = None
    requests_per_minute: Optional[float] = None
    max_in_flight: int = 1
    max_attempts: int = 3
    backoff_s: float = 1.0
    timeout_s: float = 120.0

    def __post_init__(self) -> None:
        if self.provider not in PROVIDERS:
            raise DataError(f"unknown provider {self.provider!r}")
        if self.max_output_tokens < 1 or self.input_budget_tokens < 1:
            raise DataError("token limits must be positive")

    def sampling_key(self) -> str:
        """Hash of every field that can change a completion."""
        payload = json.dumps(
            {
                "provider": self.provider,
                "model_name": self.model_name,
                "temperature": self.temperature,
                "max_output_tokens": self.max_output_tokens,
                "top_p": self.top_p,
                "frequency_penalty": self.frequency_penalty,
                "presence_penalty": self.presence_penalty,
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Prediction:
    test_id: str
    label: RelationLabel
    raw_completion: str
    parse_status: str  # "exact" | "normalized" | "fallback_null"


_DEMO_LABEL_RE = re.compile(
    r"^" + re.escape(LABEL_LINE_PREFIX) + r" '.*' and '.*' is (?P<label>.+)\.$"
)
_TEST_CUE_RE = re.compile(
    r"^" + re.escape(LABEL_LINE_PREFIX) + r" '.*' and '.*' is$"
)


def mock_oracle_complete(prompt: str, null_name: str = DEFAULT_NULL_NAME) -> str:
    """Answer with the label of the demonstration adjacent to the test block.

    Reads only the completed label lines, so reasoning enrichment never
    changes the answer. A prompt with zero demonstrations yields the NULL
    sentinel.
    """
    lines = prompt.splitlines()
    if not lines or not _TEST_CUE_RE.match(lines[-1]):
        raise ProviderError(
            "mock oracle: prompt does not end with the test cue line"
        )
    label = null_name
    for line in lines[:-1]:
        m = _DEMO_LABEL_RE.match(line)
        if m:
            label = m.group("label")
    return label


class ResponseCache:
    """Completion cache keyed by (sampling config, prompt)."""

    def __init__(self, directory: str | Path):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(config: LlmConfig, prompt: str) -> str:
        digest = hashlib.sha256()
        digest.update(config.sampling_key().encode("ascii"))
        digest.update(b"\x1f")
        digest.update(prompt.encode("utf-8"))
        return digest.hexdigest()

    def _path(self, key: str) -> Path:
        return self.dir / f"{key}.json"

    def get(self, key: str) -> Optional[str]:
        path = self._path(key)
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))["completion"]

    def put(self, key: str, prompt: str, completion: str, provider: str) -> None:
        doc = {
            "key": key,
            "prompt": prompt,
            "completion": completion,
            "provider": provider,
            "created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        }
        tmp = self._path(key).with_suffix(".tmp")
        tmp.write_text(json.dumps(doc, sort_keys=True, ensure_ascii=False),
                       encoding="utf-8")
        tmp.replace(self._path(key))


class TokenBucket:
    """Requests-per-minute throttle; acquire() blocks until a slot frees up."""

    def __init__(self, per_minute: float):
        self.capacity = per_minute
        self.tokens = per_minute
        self.fill_rate = per_minute / 60.0
        self.updated = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = time.monotonic()
                self.tokens = min(self.capacity,
                                  self.tokens + (now - self.updated) * self.fill_rate)
                self.updated = now
                if self.tokens >= 1.0:
                    self.tokens -= 1.0
                    return
                wait = (1.0 - self.tokens) / self.fill_rate
            time.sleep(wait)


class Completer:
    """One provider runtime: rate limit, in-flight bound, retries, cache."""

    def __init__(self, config: LlmConfig,
                 cache: Optional[ResponseCache] = None,
                 estimator: Optional[TokenEstimator] = None,
                 session: Optional[requests.Session] = None):
        self.config = config
        self.cache = cache
        self.estimator = estimator or CharRatioEstimator()
        self._bucket = (TokenBucket(config.requests_per_minute)
                        if config.requests_per_minute else None)
        self._gate = threading.Semaphore(max(1, config.max_in_flight))
        self._session = session or requests.Session()

    def complete(self, prompt: str) -> str:
        cfg = self.config
        estimate = self.estimator.estimate(prompt)
        if estimate > cfg.input_budget_tokens:
            raise BudgetError(
                f"prompt estimates at {estimate} tokens, over the input budget "
                f"of {cfg.input_budget_tokens}"
            )
        key = None
        if self.cache is not None:
            key = ResponseCache.key(cfg, prompt)
            cached = self.cache.get(key)
            if cached is not None:
                return cached
        completion = self._dispatch(prompt)
        if not completion.strip():
            raise EmptyCompletionError(
                f"provider {cfg.provider} returned an empty completion"
            )
        if self.cache is not None and key is not None:
            self.cache.put(key, prompt, completion, cfg.provider)
        return completion

    def _dispatch(self, prompt: str) -> str:
        cfg = self.config
        if cfg.provider == "mock_echo":
            return prompt
        if cfg.provider == "mock_oracle":
            return mock_oracle_complete(prompt)
        return self._http_complete(prompt)

    def _http_complete(self, prompt: str) -> str:
        cfg = self.config
        endpoint = cfg.endpoint or os.environ.get(ENDPOINT_ENV)
        if not endpoint:
            raise ProviderError(
                f"no completion endpoint configured (set {ENDPOINT_ENV})"
            )
        payload = {
            "model": cfg.model_name,
            "prompt": prompt,
            "temperature": cfg.temperature,
            "max_tokens": cfg.max_output_tokens,
            "top_p": cfg.top_p,
            "frequency_penalty": cfg.frequency_penalty,
            "presence_penalty": cfg.presence_penalty,
        }
        headers = {}
        token = os.environ.get(TOKEN_ENV)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        last: Exception | None = None
        for attempt in range(cfg.max_attempts):
            if self._bucket is not None:
                self._bucket.acquire()
            try:
                with self._gate:
                    resp = self._session.post(endpoint, json=payload,
                                              headers=headers,
                                              timeout=cfg.timeout_s)
                if resp.status_code == 429 or resp.status_code >= 500:
                    raise TransientProviderError(f"HTTP {resp.status_code}")
                if resp.status_code != 200:
                    raise ProviderError(
                        f"completion endpoint HTTP {resp.status_code}: "
                        f"{resp.text[:200]}"
                    )
                return resp.json()["text"]
            except (requests.RequestException, TransientProviderError) as exc:
                last = exc
                if attempt + 1 < cfg.max_attempts:
                    time.sleep(cfg.backoff_s * (2 ** attempt))
        raise ProviderError(
            f"completion provider failed after {cfg.max_attempts} attempts: {last}"
        )


def complete(config: LlmConfig, prompt: str,
             cache: Optional[ResponseCache] = None,
             estimator: Optional[TokenEstimator] = None) -> str:
    """One-shot completion; long runs should hold a Completer instead."""
    return Completer(config, cache=cache, estimator=estimator).complete(prompt)


_NORM_RE = re.compile(r"[^a-z0-9]+")


def _normalize(text: str) -> str:
    return _NORM_RE.sub("", text.lower())


def parse_prediction(completion: str, schema: RelationSchema,
                     test_id: str = "") -> Prediction:
    """Map generated text onto a schema label.

    Ladder: exact verbalization on the first line; else a unique
    case/punctuation-insensitive match anywhere in the first line; else the
    NULL sentinel with parse_status "fallback_null". Ambiguous normalized
    matches also fall back rather than picking arbitrarily.
    """
    stripped = completion.strip()
    first_line = stripped.splitlines()[0].strip() if stripped else ""
    candidates = [(lab, schema.verbalize(lab)) for lab in schema.all_labels()]
    for label, verbalized in candidates:
        if first_line == verbalized:
            return Prediction(test_id, label, completion, "exact")
    line_norm = _normalize(first_line)
    if line_norm:
        matches = [label for label, verbalized in candidates
                   if _normalize(verbalized) and _normalize(verbalized) in line_norm]
        if len(matches) == 1:
            return Prediction(test_id, matches[0], completion, "normalized")
    return Prediction(test_id, schema.null_label, completion, "fallback_null")
