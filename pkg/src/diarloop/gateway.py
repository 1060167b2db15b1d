"""Text-generation gateway: prompt assets, transport, and offline mocks.

A gateway answers one request shape: a named prompt plus its filled
template. Production uses HTTP; tests and simulations use the echo,
scripted, or rule-based offline implementations.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from importlib import resources
from typing import Protocol

from .errors import GatewayError, ValidationError

PROMPT_NAMES = ("summarization", "feedback_simulation", "correction")

GATEWAY_TOKEN_ENV = "DIARLOOP_GATEWAY_TOKEN"


def load_prompt(name: str) -> str:
    if name not in PROMPT_NAMES:
        raise ValidationError(f"unknown prompt {name!r}")
    return (
        resources.files("diarloop").joinpath(f"prompts/{name}.txt").read_text("utf-8")
    )


def fill_template(template: str, values: list[str]) -> str:
    """Substitute the template's ``[]`` placeholders in order."""
    parts = template.split("[]")
    if len(parts) - 1 != len(values):
        raise ValidationError(
            f"template has {len(parts) - 1} placeholders, got {len(values)} values"
        )
    out = [parts[0]]
    for value, part in zip(values, parts[1:]):
        out.append(value)
        out.append(part)
    return "".join(out)


def fill_prompt(name: str, values: list[str]) -> str:
    return fill_template(load_prompt(name), values)


def request_key(prompt_name: str, filled_template: str) -> str:
    """Stable hash of a gateway request, used to key scripted responses."""
    digest = hashlib.sha256()
    digest.update(prompt_name.encode("utf-8"))
    digest.update(b"\x00")
    digest.update(filled_template.encode("utf-8"))
    return digest.hexdigest()


class TextGateway(Protocol):
    def complete(self, prompt_name: str, filled_template: str) -> str: ...


class EchoGateway:
    """Returns the filled template unchanged. Useful for plumbing tests."""

    def complete(self, prompt_name: str, filled_template: str) -> str:
        return filled_template


class ScriptedGateway:
    """Replays canned responses keyed by the request hash.

    Deterministic by construction; unknown requests raise unless a
    default response is configured.
    """

    def __init__(self, responses: dict[str, str] | None = None, default: str | None = None):
        self.responses = dict(responses or {})
        self.default = default
        self.calls: list[tuple[str, str]] = []

    def script(self, prompt_name: str, filled_template: str, response: str) -> str:
        key = request_key(prompt_name, filled_template)
        self.responses[key] = response
        return key

    def complete(self, prompt_name: str, filled_template: str) -> str:
        self.calls.append((prompt_name, filled_template))
        key = request_key(prompt_name, filled_template)
        if key in self.responses:
            return self.responses[key]
        if self.default is not None:
            return self.default
        raise GatewayError(f"no scripted response for request {key[:12]}…")


def _extract_block(text: str, marker: str, next_markers: list[str]) -> str:
    start = text.find(marker)
    if start < 0:
        return ""
    start += len(marker)
    end = len(text)
    for nm in next_markers:
        idx = text.find(nm, start)
        if 0 <= idx < end:
            end = idx
    block = text[start:end].strip()
    return block.strip('"').strip()


def _tokenize(s: str) -> list[str]:
    return re.sub(r"[^\w\s]", " ", s.lower()).split()


def _overlap_score(a: list[str], b: list[str]) -> float:
    if not a or not b:
        return 0.0
    from collections import Counter

    common = Counter(a) & Counter(b)
    return 2.0 * sum(common.values()) / (len(a) + len(b))


class RuleBasedGateway:
    """Deterministic offline stand-in for the text service.

    Summaries are one clipped line per speaker. Corrections are parsed
    from "Predicted X, saying ..., was actually Y" style feedback and
    resolved to the best-overlapping predicted line of speaker X.
    Feedback simulation diffs ground-truth lines against the predicted
    display and reports the worst mismatch.
    """

    summary_words_per_speaker = 8

    def complete(self, prompt_name: str, filled_template: str) -> str:
        if prompt_name == "summarization":
            return self._summarize(filled_template)
        if prompt_name == "correction":
            return self._correct(filled_template)
        if prompt_name == "feedback_simulation":
            return self._simulate_feedback(filled_template)
        raise GatewayError(f"unsupported prompt {prompt_name!r}")

    @staticmethod
    def _speaker_lines(block: str) -> list[tuple[str, str]]:
        out = []
        for line in block.splitlines():
            m = re.match(r"\s*([^\s:]+):\s*(.*\S)\s*$", line)
            if m:
                out.append((m.group(1), m.group(2)))
        return out

    def _summarize(self, filled: str) -> str:
        block = _extract_block(filled, 'Transcript: "', ["\nGive a short summary"])
        lines = self._speaker_lines(block)
        by_speaker: dict[str, str] = {}
        for spk, text in lines:
            if spk not in by_speaker:
                by_speaker[spk] = text
        out = []
        for spk in sorted(by_speaker):
            words = by_speaker[spk].split()[: self.summary_words_per_speaker]
            out.append(f"{spk} talked about {' '.join(words)}")
        return "\n".join(out) if out else "No speech to summarize."

    def _correct(self, filled: str) -> str:
        predicted = _extract_block(
            filled, 'PREDICTED CONVERSATION:"', ['\nUSER FEEDBACK:"']
        )
        feedback = _extract_block(filled, 'USER FEEDBACK:"', ['\nAVAILABLE SPEAKERS:"'])
        wrong = re.search(r"predicted\s+([\w-]+)", feedback, re.IGNORECASE)
        right = re.search(r"actually\s+([\w-]+)", feedback, re.IGNORECASE)
        if not wrong or not right:
            return "CANNOT_PARSE"
        quote = re.search(
            r"saying\s+(.+?)(?:,\s*was actually|\s+was actually|$)",
            feedback,
            re.IGNORECASE | re.DOTALL,
        )
        quote_tokens = _tokenize(quote.group(1)) if quote else []
        candidates = [
            (spk, text)
            for spk, text in self._speaker_lines(predicted)
            if spk == wrong.group(1)
        ]
        if not candidates:
            return "CANNOT_PARSE"
        best_text = max(
            candidates, key=lambda c: _overlap_score(quote_tokens, _tokenize(c[1]))
        )[1]
        return json.dumps(
            {
                "original_speaker_id": wrong.group(1),
                "original_sentence": best_text,
                "corrected_speaker_id": right.group(1),
                "corrected_sentence": best_text,
            }
        )

    def _simulate_feedback(self, filled: str) -> str:
        truth = _extract_block(
            filled, 'GROUND TRUTH CONVERSATION:"', ['\nSUMMARY OF PREDICTED:"']
        )
        predicted = _extract_block(
            filled, 'SUMMARY OF PREDICTED:"', ['\nAVAILABLE SPEAKERS:"']
        )
        truth_lines = self._speaker_lines(truth)
        pred_lines = self._speaker_lines(predicted)
        best: tuple[float, str, str, str] | None = None
        for true_spk, true_text in truth_lines:
            true_tokens = _tokenize(true_text)
            for pred_spk, pred_text in pred_lines:
                if pred_spk == true_spk:
                    continue
                score = _overlap_score(true_tokens, _tokenize(pred_text))
                if score >= 0.5 and (best is None or score > best[0]):
                    quote = " ".join(pred_text.split()[:5])
                    best = (score, pred_spk, quote, true_spk)
        if best is None:
            return ""
        _, wrong, quote, right = best
        return f"Hey COBI: Predicted {wrong}, saying {quote}, was actually {right}."


class HttpGateway:
    """POSTs requests to a remote completion endpoint.

    Request body: {"prompt_name": ..., "filled_template": ...};
    expected response body: {"text": ...}. A bearer token is read from
    the DIARLOOP_GATEWAY_TOKEN environment variable when present.
    """

    def __init__(self, endpoint: str, timeout_s: float = 30.0):
        self.endpoint = endpoint
        self.timeout_s = timeout_s

    def complete(self, prompt_name: str, filled_template: str) -> str:
        import httpx

        headers = {}
        token = os.environ.get(GATEWAY_TOKEN_ENV)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        try:
            resp = httpx.post(
                self.endpoint,
                json={"prompt_name": prompt_name, "filled_template": filled_template},
                headers=headers,
                timeout=self.timeout_s,
            )
            resp.raise_for_status()
            body = resp.json()
        except Exception as exc:  # transport, HTTP status, or JSON failure
            raise GatewayError(f"gateway request failed: {exc}") from exc
        if not isinstance(body, dict) or "text" not in body:
            raise GatewayError("gateway response missing 'text' field")
        return str(body["text"])


def make_gateway(kind: str, endpoint: str | None = None, scripted: dict[str, str] | None = None) -> TextGateway:
    """Factory used by config files and the service layer."""
    if kind == "echo":
        return EchoGateway()
    if kind == "scripted":
        return ScriptedGateway(scripted or {})
    if kind == "rule":
        return RuleBasedGateway()
    if kind == "http":
        if not endpoint:
            raise ValidationError("http gateway requires an endpoint")
        return HttpGateway(endpoint)
    raise ValidationError(f"unknown gateway kind {kind!r}")
