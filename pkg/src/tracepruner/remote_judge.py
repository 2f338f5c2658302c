"""Remote judge backed by an OpenAI-chat-compatible endpoint."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import requests

from .model import Segment

DEFAULT_SYSTEM_PROMPT = (
    "You compare two unfinished step-by-step reasoning traces for the same "
    "problem and decide whether they will reach the same final answer. "
    "Reply with exactly one word: SAME or DIFFERENT."
)
DEFAULT_USER_TEMPLATE = (
    "Trace A:\n{left}\n\nTrace B:\n{right}\n\n"
    "Will these two unfinished reasoning traces reach the same final answer? "
    "Answer SAME or DIFFERENT."
)


class RemoteJudgeError(Exception):
    pass


class TransportError(RemoteJudgeError):
    pass


class TimeoutError(RemoteJudgeError):  # noqa: A001 - scoped to this module
    pass


class UnparseableVerdict(RemoteJudgeError):
    pass


@dataclass
class RemoteJudgeConfig:
    endpoint: str                      # full URL of the chat-completions path
    model: str = "judge"
    system_prompt: str = DEFAULT_SYSTEM_PROMPT
    user_template: str = DEFAULT_USER_TEMPLATE
    timeout_s: float = 30.0
    max_retries: int = 3
    backoff_base_s: float = 0.5
    extra_headers: dict = field(default_factory=dict)


def parse_verdict(content: str) -> float:
    """Map a backend reply to a score: SAME -> 1.0, DIFFERENT -> 0.0, or a
    bare probability in [0, 1]; anything else is an UnparseableVerdict."""
    text = content.strip()
    upper = text.upper().rstrip(".")
    if upper == "SAME":
        return 1.0
    if upper == "DIFFERENT":
        return 0.0
    try:
        value = float(text)
    except ValueError:
        raise UnparseableVerdict(f"cannot parse judge reply: {content!r}")
    if 0.0 <= value <= 1.0:
        return value
    raise UnparseableVerdict(f"probability out of range: {content!r}")


class RemoteJudge:
    """POSTs a rendered trace-pair prompt and parses the SAME/DIFFERENT verdict.

    Retries transport failures with exponential backoff; the three failure
    kinds (transport, timeout, unparseable verdict) surface distinctly.
    """

    def __init__(self, config: RemoteJudgeConfig, session: Optional[requests.Session] = None,
                 sleep=time.sleep):
        self.config = config
        self.session = session or requests.Session()
        self._sleep = sleep

    def score(self, left: Segment, right: Segment) -> float:
        return self.score_text(" ".join(left.tokens), " ".join(right.tokens))

    def score_text(self, left: str, right: str) -> float:
        cfg = self.config
        payload = {
            "model": cfg.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": cfg.system_prompt},
                {"role": "user", "content": cfg.user_template.format(left=left, right=right)},
            ],
        }
        last_error: Optional[RemoteJudgeError] = None
        for attempt in range(cfg.max_retries + 1):
            if attempt > 0:
                self._sleep(cfg.backoff_base_s * (2 ** (attempt - 1)))
            try:
                resp = self.session.post(
                    cfg.endpoint, json=payload, timeout=cfg.timeout_s, headers=cfg.extra_headers
                )
                resp.raise_for_status()
                content = resp.json()["choices"][0]["message"]["content"]
            except requests.Timeout as exc:
                last_error = TimeoutError(str(exc))
                continue
            except (requests.RequestException, KeyError, IndexError, ValueError) as exc:
                last_error = TransportError(str(exc))
                continue
            try:
                return parse_verdict(content)
            except UnparseableVerdict as exc:
                last_error = exc
                continue
        assert last_error is not None
        raise last_error
