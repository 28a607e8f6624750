"""Story plots: loading, validation, and deterministic sentence segmentation.

A :class:`StoryPlot` is the extraction context every downstream phase works
from. Sentence indices are load-bearing (location propagation in the
rule-based extractor keys on them), so segmentation is a fixed rule set
rather than a learned model: terminal punctuation closes a sentence unless
the preceding token is on a small abbreviation allowlist.
"""

from __future__ import annotations

import enum
import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

from .errors import StoryworldError


class CorpusError(StoryworldError):
    pass


class UnreadableSourceError(CorpusError):
    """The story source could not be opened or read."""


class EmptyTextError(CorpusError):
    """The story text is empty or whitespace-only."""


class UndecodableTextError(CorpusError):
    """The story bytes are not valid UTF-8."""


class Genre(enum.Enum):
    MYSTERY = "mystery"
    FAIRYTALE = "fairytale"
    OTHER = "other"


class Span(NamedTuple):
    """Half-open character range ``[start, end)`` into some text."""

    start: int
    end: int


# Tokens (lowercased, no trailing dot) after which a '.' never ends a sentence.
_ABBREVIATIONS = frozenset(
    {
        "mr", "mrs", "ms", "dr", "prof", "st", "sr", "jr", "rev", "hon",
        "fr", "col", "gen", "lt", "capt", "sgt", "maj", "mt", "mme", "mlle",
        "msgr", "vs", "e.g", "i.e", "dept", "univ", "inc", "ltd", "co",
        "corp", "approx",
    }
)

_TERMINALS = ".!?"
_CLOSERS = "\"')]}’”"


def _is_abbreviation(text: str, dot_index: int) -> bool:
    """True when the '.' at ``dot_index`` ends an allowlisted abbreviation."""
    j = dot_index - 1
    while j >= 0 and (text[j].isalnum() or text[j] == "."):
        j -= 1
    token = text[j + 1 : dot_index].lower()
    # Single capital letters ("A.") are treated as sentence ends, not initials;
    # the propagation rules need "A. B? C!" to be three sentences.
    return token in _ABBREVIATIONS


def segment_sentences(text: str) -> list[Span]:
    """Split ``text`` into sentence spans.

    A sentence ends at ``. ! ?`` (plus any closing quotes/brackets) followed
    by whitespace or end-of-text, unless the dot closes an abbreviation.
    Spans are trimmed to non-whitespace, ordered, non-overlapping, and
    jointly cover every non-whitespace character. Empty input yields ``[]``.
    """
    spans: list[Span] = []
    n = len(text)
    start = 0
    i = 0
    while i < n:
        ch = text[i]
        if ch in _TERMINALS:
            if ch == "." and (
                _is_abbreviation(text, i)
                # Don't split inside numbers or dotted tokens: "3.5", "e.g.x".
                or (i + 1 < n and not text[i + 1].isspace() and text[i + 1] not in _CLOSERS)
            ):
                i += 1
                continue
            # Absorb runs of terminals ("?!") and trailing closers.
            j = i + 1
            while j < n and text[j] in _TERMINALS:
                j += 1
            while j < n and text[j] in _CLOSERS:
                j += 1
            if j >= n or text[j].isspace():
                span = _trimmed(text, start, j)
                if span is not None:
                    spans.append(span)
                start = j
                i = j
                continue
            i = j
            continue
        i += 1
    tail = _trimmed(text, start, n)
    if tail is not None:
        spans.append(tail)
    return spans


def _trimmed(text: str, start: int, end: int) -> Span | None:
    while start < end and text[start].isspace():
        start += 1
    while end > start and text[end - 1].isspace():
        end -= 1
    if start == end:
        return None
    return Span(start, end)


def slugify(value: str) -> str:
    """Lowercase ``value`` and collapse runs of non-alphanumerics to '-'."""
    slug = re.sub(r"[^a-z0-9]+", "-", value.lower()).strip("-")
    return slug or "untitled"


@dataclass(frozen=True)
class StoryPlot:
    """A plot text plus its sentence segmentation and genre tag.

    Immutable after construction; safe to share across threads.
    """

    id: str
    title: str
    genre: Genre
    text: str
    sentences: tuple[Span, ...] = field(default_factory=tuple)

    def sentence_text(self, index: int) -> str:
        span = self.sentences[index]
        return self.text[span.start : span.end]

    def sentence_index_at(self, offset: int) -> int:
        """Index of the sentence whose span contains ``offset``.

        Offsets falling in inter-sentence whitespace resolve to the next
        sentence (or the last one at end-of-text).
        """
        for i, span in enumerate(self.sentences):
            if offset < span.end:
                return i
        return len(self.sentences) - 1


def load_story(
    source: str | os.PathLike,
    genre: Genre,
    *,
    title: str | None = None,
) -> StoryPlot:
    """Build a :class:`StoryPlot` from a file path or raw text.

    A :class:`~pathlib.Path` (or a string naming an existing file) is read
    as UTF-8; any other string is taken as the plot text itself.
    """
    if isinstance(source, os.PathLike) or (isinstance(source, str) and os.path.isfile(source)):
        path = Path(source)
        try:
            raw = path.read_bytes()
        except OSError as exc:
            raise UnreadableSourceError(f"cannot read {path}: {exc}") from exc
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise UndecodableTextError(f"{path} is not valid UTF-8: {exc}") from exc
        title = title or path.stem
    else:
        text = str(source)
        title = title or "story"
    if not text.strip():
        raise EmptyTextError("story text is empty")
    return StoryPlot(
        id=slugify(title),
        title=title,
        genre=genre,
        text=text,
        sentences=tuple(segment_sentences(text)),
    )


def load_manifest(path: str | os.PathLike) -> dict[str, dict]:
    """Read a corpus manifest: filename -> {"title", "genre"}."""
    try:
        data = json.loads(Path(path).read_text("utf-8"))
    except OSError as exc:
        raise UnreadableSourceError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CorpusError(f"manifest {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise CorpusError("manifest must be a JSON object mapping filename to metadata")
    for name, meta in data.items():
        if not isinstance(meta, dict):
            raise CorpusError(f"manifest entry {name!r} must be an object")
    return data


def parse_genre(value: str) -> Genre:
    try:
        return Genre(value.lower())
    except ValueError:
        raise CorpusError(
            f"unknown genre {value!r}; expected one of "
            + ", ".join(g.value for g in Genre)
        ) from None
