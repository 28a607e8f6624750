"""Model-inference contracts: extractive QA and free-form generation.

Two implementations ship here: an HTTP client speaking the sidecar wire
protocol, and a deterministic fixture backend that answers from a scripted
JSON file so the whole pipeline can run offline and reproducibly. The
no-answer decision threshold lives in the extraction layer, not here; a
backend only reports probabilities.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, runtime_checkable

import requests

from .corpus import Span
from .errors import StoryworldError


class BackendError(StoryworldError):
    """Base backend failure; ``retryable`` hints whether a retry may help."""

    retryable = False


class BackendUnreachableError(BackendError):
    retryable = True


class BackendTimeoutError(BackendError):
    retryable = True


class ProtocolError(BackendError):
    """The remote spoke, but not the documented wire protocol."""

    retryable = False


class FixtureScriptError(StoryworldError):
    pass


@dataclass(frozen=True)
class QaAnswer:
    """One extractive answer: its text, source span, and probabilities."""

    text: str
    span: Span
    span_probability: float
    token_probabilities: tuple[tuple[str, float], ...] = ()


@dataclass(frozen=True)
class QaResult:
    """Ranked answers (descending span probability) plus a no-answer score."""

    answers: tuple[QaAnswer, ...]
    no_answer_probability: float

    @property
    def best(self) -> QaAnswer | None:
        return self.answers[0] if self.answers else None


NO_ANSWER = QaResult(answers=(), no_answer_probability=1.0)


@dataclass(frozen=True)
class GenerationParams:
    max_tokens: int = 60
    temperature: float = 0.7
    stop: tuple[str, ...] = ()
    seed: int = 0


@runtime_checkable
class Backend(Protocol):
    """Blocking request/response contract; calls carry no session state."""

    def qa_extract(self, context: str, question: str, top_k: int = 5) -> QaResult:
        ...

    def generate(self, prompt: str, params: GenerationParams) -> str:
        ...


def _check_probability(value, what: str) -> float:
    if not isinstance(value, (int, float)) or not 0.0 <= value <= 1.0:
        raise ProtocolError(f"{what} must be a number in [0, 1], got {value!r}")
    return float(value)


def qa_result_from_json(doc: dict) -> QaResult:
    """Parse the wire/script representation of a QA result."""
    if not isinstance(doc, dict) or "answers" not in doc or "no_answer_probability" not in doc:
        raise ProtocolError("QA result needs 'answers' and 'no_answer_probability'")
    answers = []
    for i, item in enumerate(doc["answers"]):
        if not isinstance(item, dict):
            raise ProtocolError(f"answer #{i} must be an object")
        try:
            text = item["text"]
            start = item["start"]
            end = item["end"]
        except KeyError as exc:
            raise ProtocolError(f"answer #{i} is missing {exc}") from None
        if not isinstance(text, str) or not isinstance(start, int) or not isinstance(end, int):
            raise ProtocolError(f"answer #{i} has mistyped text/start/end")
        tokens = tuple(
            (str(tok), _check_probability(p, f"answer #{i} token probability"))
            for tok, p in item.get("token_probabilities", [])
        )
        answers.append(
            QaAnswer(
                text=text,
                span=Span(start, end),
                span_probability=_check_probability(item.get("span_probability"), f"answer #{i} span_probability"),
                token_probabilities=tokens,
            )
        )
    # Enforce the ranking invariant regardless of producer ordering.
    answers.sort(key=lambda a: -a.span_probability)
    return QaResult(
        answers=tuple(answers),
        no_answer_probability=_check_probability(doc["no_answer_probability"], "no_answer_probability"),
    )


def qa_result_to_json(result: QaResult) -> dict:
    return {
        "answers": [
            {
                "text": a.text,
                "start": a.span.start,
                "end": a.span.end,
                "span_probability": a.span_probability,
                "token_probabilities": [[tok, p] for tok, p in a.token_probabilities],
            }
            for a in result.answers
        ],
        "no_answer_probability": result.no_answer_probability,
    }


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _truncate_completion(text: str, params: GenerationParams) -> str:
    for stop in params.stop:
        if stop and stop in text:
            text = text[: text.index(stop)]
    # The fixture has no tokenizer; whitespace words stand in for tokens.
    words = text.split()
    if len(words) > params.max_tokens:
        end = 0
        for word in words[: params.max_tokens]:
            end = text.index(word, end) + len(word)
        text = text[:end]
    return text


class FixtureBackend:
    """Scripted backend: a lookup table keyed by hashed context/prompt.

    QA queries key on ``(sha256(context), question)`` so that masking, which
    rewrites the context, naturally selects the next scripted round.
    Unscripted QA queries return the no-answer result; unscripted prompts
    generate the empty string. Referentially transparent across runs.
    """

    def __init__(
        self,
        qa_entries: dict[tuple[str, str], QaResult] | None = None,
        gen_entries: dict[str, str] | None = None,
    ):
        self._qa = dict(qa_entries or {})
        self._gen = dict(gen_entries or {})

    @classmethod
    def from_script(cls, entries: list[dict]) -> "FixtureBackend":
        qa: dict[tuple[str, str], QaResult] = {}
        gen: dict[str, str] = {}
        for i, entry in enumerate(entries):
            if not isinstance(entry, dict):
                raise FixtureScriptError(f"script entry #{i} must be an object")
            if "context_sha256" in entry:
                try:
                    key = (entry["context_sha256"], entry["question"])
                    qa[key] = qa_result_from_json(entry["result"])
                except (KeyError, ProtocolError) as exc:
                    raise FixtureScriptError(f"bad QA script entry #{i}: {exc}") from exc
            elif "prompt_sha256" in entry:
                try:
                    gen[entry["prompt_sha256"]] = str(entry["completion"])
                except KeyError as exc:
                    raise FixtureScriptError(f"bad generation script entry #{i}: {exc}") from None
            else:
                raise FixtureScriptError(
                    f"script entry #{i} needs 'context_sha256' or 'prompt_sha256'"
                )
        return cls(qa, gen)

    def qa_extract(self, context: str, question: str, top_k: int = 5) -> QaResult:
        if not context:
            raise BackendError("context must be non-empty")
        if top_k < 1:
            raise BackendError("top_k must be >= 1")
        result = self._qa.get((sha256_text(context), question), NO_ANSWER)
        return QaResult(answers=result.answers[:top_k], no_answer_probability=result.no_answer_probability)

    def generate(self, prompt: str, params: GenerationParams) -> str:
        if not prompt:
            raise BackendError("prompt must be non-empty")
        if params.max_tokens < 1:
            raise BackendError("max_tokens must be >= 1")
        return _truncate_completion(self._gen.get(sha256_text(prompt), ""), params)


def qa_script_entry(context: str, question: str, result: QaResult) -> dict:
    """Build one fixture script row for a QA query (hashes the context)."""
    return {
        "context_sha256": sha256_text(context),
        "question": question,
        "result": qa_result_to_json(result),
    }


def gen_script_entry(prompt: str, completion: str) -> dict:
    return {"prompt_sha256": sha256_text(prompt), "completion": completion}


def load_fixture(path: str | Path) -> FixtureBackend:
    """Load a fixture script file (a JSON list of QA/generation entries)."""
    try:
        entries = json.loads(Path(path).read_text("utf-8"))
    except OSError as exc:
        raise FixtureScriptError(f"cannot read fixture script {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FixtureScriptError(f"fixture script {path} is not valid JSON: {exc}") from exc
    if not isinstance(entries, list):
        raise FixtureScriptError("fixture script must be a JSON list")
    return FixtureBackend.from_script(entries)


def save_fixture(entries: list[dict], path: str | Path) -> None:
    Path(path).write_text(json.dumps(entries, indent=2, ensure_ascii=False), "utf-8")


class HttpBackend:
    """Client for the sidecar wire protocol (JSON over HTTP).

    Transport failures surface as distinct, retryable-marked errors; this
    client never fabricates an answer. Each call opens its own connection,
    so instances are safe to share across threads.
    """

    def __init__(self, base_url: str, timeout: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def _post(self, route: str, body: dict) -> dict:
        try:
            response = requests.post(self.base_url + route, json=body, timeout=self.timeout)
        except requests.Timeout as exc:
            raise BackendTimeoutError(f"{route} timed out after {self.timeout}s") from exc
        except requests.RequestException as exc:
            raise BackendUnreachableError(f"cannot reach backend at {self.base_url}: {exc}") from exc
        if response.status_code != 200:
            raise ProtocolError(f"{route} returned HTTP {response.status_code}: {response.text[:200]}")
        try:
            doc = response.json()
        except ValueError as exc:
            raise ProtocolError(f"{route} returned non-JSON body") from exc
        if not isinstance(doc, dict):
            raise ProtocolError(f"{route} must return a JSON object")
        return doc

    def qa_extract(self, context: str, question: str, top_k: int = 5) -> QaResult:
        if not context:
            raise BackendError("context must be non-empty")
        if top_k < 1:
            raise BackendError("top_k must be >= 1")
        doc = self._post("/qa", {"context": context, "question": question, "top_k": top_k})
        result = qa_result_from_json(doc)
        return QaResult(answers=result.answers[:top_k], no_answer_probability=result.no_answer_probability)

    def generate(self, prompt: str, params: GenerationParams) -> str:
        if not prompt:
            raise BackendError("prompt must be non-empty")
        if params.max_tokens < 1:
            raise BackendError("max_tokens must be >= 1")
        doc = self._post(
            "/generate",
            {
                "prompt": prompt,
                "max_tokens": params.max_tokens,
                "temperature": params.temperature,
                "stop": list(params.stop),
                "seed": params.seed,
            },
        )
        if "text" not in doc or not isinstance(doc["text"], str):
            raise ProtocolError("/generate must return {'text': str}")
        return doc["text"]

    def health(self) -> dict:
        try:
            response = requests.get(self.base_url + "/health", timeout=self.timeout)
        except requests.Timeout as exc:
            raise BackendTimeoutError("health check timed out") from exc
        except requests.RequestException as exc:
            raise BackendUnreachableError(f"cannot reach backend at {self.base_url}: {exc}") from exc
        if response.status_code != 200:
            raise ProtocolError(f"/health returned HTTP {response.status_code}")
        return response.json()


def resolve_backend(spec: str) -> Backend:
    """Turn a CLI backend spec into a backend: a URL or ``fixture:PATH``."""
    if spec.startswith("fixture:"):
        return load_fixture(spec[len("fixture:"):])
    if spec.startswith("http://") or spec.startswith("https://"):
        return HttpBackend(spec)
    raise BackendError(f"backend spec must be an http(s) URL or 'fixture:PATH', got {spec!r}")
