"""Generation backends: an OpenAI-compatible HTTP client and an offline mock.

Both return raw response text; structural parsing lives in prompting.
"""

from __future__ import annotations

import os
import random
import time
from dataclasses import dataclass

import requests

from .prompting import CandidateFeature, PromptBundle, render_candidate

RETRYABLE_STATUS = {429, 500, 502, 503, 504}


class LlmError(Exception):
    pass


class MissingApiKey(LlmError):
    pass


class HttpStatusError(LlmError):
    def __init__(self, status: int, attempts: int):
        super().__init__(f"HTTP {status} after {attempts} attempt(s)")
        self.status = status
        self.attempts = attempts


class GenerationTimeout(LlmError):
    pass


class MalformedApiResponse(LlmError):
    pass


class NoNumericColumns(LlmError):
    pass


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "mock"              # "http" | "mock"
    base_url: str = ""
    model_name: str = ""
    api_key_env: str = "OPENAI_API_KEY"
    temperature: float = 0.7
    max_tokens: int = 2048
    timeout: float = 60.0
    max_retries: int = 2
    seed: int = 1                   # mock backend only

    def __post_init__(self):
        if self.kind not in ("http", "mock"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.kind == "http" and (not self.base_url or not self.model_name):
            raise ValueError("http backend requires base_url and model_name")


@dataclass(frozen=True)
class GenerationResult:
    text: str
    latency_ms: float
    attempts: int


def backoff_delay(attempt: int, rng: random.Random) -> float:
    """Delay before retry `attempt` (1-based): 2^(attempt-1) s, jitter +/-20%."""
    return (2.0 ** (attempt - 1)) * rng.uniform(0.8, 1.2)


def generate(config: BackendConfig, bundle: PromptBundle,
             sleep=time.sleep) -> GenerationResult:
    if config.kind == "mock":
        start = time.monotonic()
        text = mock_synthesize(config.seed, bundle.numeric_columns,
                               set(bundle.banned_names), bundle.candidates_requested)
        return GenerationResult(text, (time.monotonic() - start) * 1000.0, 1)
    return _http_generate(config, bundle, sleep)


def _http_generate(config: BackendConfig, bundle: PromptBundle, sleep) -> GenerationResult:
    api_key = os.environ.get(config.api_key_env, "")
    if not api_key:
        raise MissingApiKey(f"environment variable {config.api_key_env} is not set")
    url = config.base_url.rstrip("/") + "/chat/completions"
    body = {
        "model": config.model_name,
        "messages": [
            {"role": "system", "content": bundle.system_text},
            {"role": "user", "content": bundle.user_text},
        ],
        "temperature": config.temperature,
        "max_tokens": config.max_tokens,
    }
    headers = {"Authorization": f"Bearer {api_key}"}
    rng = random.Random()
    start = time.monotonic()
    attempts = 0
    last_status = None
    while attempts <= config.max_retries:
        attempts += 1
        try:
            resp = requests.post(url, json=body, headers=headers, timeout=config.timeout)
        except requests.Timeout:
            if attempts > config.max_retries:
                raise GenerationTimeout(f"timed out after {attempts} attempt(s)")
            sleep(backoff_delay(attempts, rng))
            continue
        except requests.RequestException:
            if attempts > config.max_retries:
                raise
            sleep(backoff_delay(attempts, rng))
            continue
        if resp.status_code in RETRYABLE_STATUS:
            last_status = resp.status_code
            if attempts > config.max_retries:
                raise HttpStatusError(last_status, attempts)
            sleep(backoff_delay(attempts, rng))
            continue
        if resp.status_code != 200:
            raise HttpStatusError(resp.status_code, attempts)
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise MalformedApiResponse(f"unexpected response shape: {exc}")
        if not isinstance(content, str):
            raise MalformedApiResponse("message content is not a string")
        return GenerationResult(content, (time.monotonic() - start) * 1000.0, attempts)
    raise HttpStatusError(last_status or 0, attempts)


# ------------------------------------------------------------------ mock lab

def _catalog(numeric_columns):
    """Fixed candidate catalog over numeric column pairs, in a stable order."""
    entries = []
    seen = set()
    names = [name for name, _ in numeric_columns]
    means = dict(numeric_columns)
    for a in names:
        for b in names:
            if a == b:
                continue
            for name, program, desc, use in (
                (f"ratio_{a}_{b}",
                 f"{a} / ({b} + 1.0)",
                 f"Ratio of {a} to shifted {b}.",
                 f"Captures the relative scale of {a} against {b}."),
                (f"product_{a}_{b}",
                 f"{a} * {b}",
                 f"Interaction of {a} and {b}.",
                 f"Joint magnitude of {a} and {b} may separate label combinations."),
                (f"above_mean_{a}",
                 f"if {a} > {means[a]:.6g} then 1.0 else 0.0",
                 f"Indicator that {a} exceeds its mean.",
                 f"Coarse split of {a} that trees can reuse across labels."),
                (f"log1p_abs_{a}",
                 f"log1p(abs({a}))",
                 f"Compressed magnitude of {a}.",
                 f"Dampens heavy tails of {a}."),
            ):
                if name in seen:
                    continue
                seen.add(name)
                mean_a = means[a]
                samples = tuple(f"{mean_a * f:.4f}" for f in (0.5, 1.0, 1.5))
                entries.append(CandidateFeature(name, desc, use, samples, program))
    return entries


def mock_synthesize(seed: int, numeric_columns, banned_names, count: int) -> str:
    """Deterministic well-formed response drawn from the fixed catalog.

    Walks the catalog cyclically starting at an offset set by the seed,
    skipping banned names.  Seed 1 starts at the top of the catalog.
    """
    if not numeric_columns:
        raise NoNumericColumns("mock backend needs at least one numeric column")
    entries = _catalog(numeric_columns)
    offset = (seed - 1) % len(entries)
    blocks = []
    emitted = set()
    for step in range(len(entries)):
        if len(blocks) >= count:
            break
        cand = entries[(offset + step) % len(entries)]
        if cand.name in banned_names or cand.name in emitted:
            continue
        emitted.add(cand.name)
        blocks.append(render_candidate(len(blocks) + 1, cand))
    return "\n\n".join(blocks) + ("\n" if blocks else "")
