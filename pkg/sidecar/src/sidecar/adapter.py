"""Convert the open-IE tool's native text output into the triple schema.

Native format, one block per input sentence, blocks separated by blank
lines: the first line is the sentence text, each following line is one
extraction of the form

    0.95 (subject; relation; object)
    0.88 (subject; relation; object; L:some location)

Fields prefixed ``L:`` are location annotations; ``T:`` (temporal) fields
are dropped. Sentence indices come from a sentence-span file produced by
``storyworld segment``, matched on whitespace-and-spacing-normalized text,
so the emitted indices always align with the consumer's segmentation.
"""

from __future__ import annotations

import json
import re
from pathlib import Path


class AdapterError(Exception):
    pass


_EXTRACTION_RE = re.compile(r"^(?P<confidence>\d+(?:\.\d+)?)\s*\((?P<body>.*)\)\s*$")
_PUNCT_SPACING_RE = re.compile(r"\s+([.,!?;:'\")\]])")


def _normalize_sentence(text: str) -> str:
    collapsed = " ".join(text.split())
    return _PUNCT_SPACING_RE.sub(r"\1", collapsed).strip().lower()


def load_sentence_index(path: str | Path) -> dict[str, int]:
    doc = json.loads(Path(path).read_text("utf-8"))
    if not isinstance(doc, dict) or "sentences" not in doc:
        raise AdapterError("sentence file needs a 'sentences' list (see `storyworld segment`)")
    index: dict[str, int] = {}
    for row in doc["sentences"]:
        index.setdefault(_normalize_sentence(row["text"]), row["index"])
    return index


def parse_native_blocks(text: str) -> list[tuple[str, list[tuple[int, str]]]]:
    """Split native output into (sentence, [(lineno, extraction line), ...])."""
    blocks: list[tuple[str, list[tuple[int, str]]]] = []
    sentence: str | None = None
    lines: list[tuple[int, str]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            if sentence is not None:
                blocks.append((sentence, lines))
            sentence, lines = None, []
            continue
        if sentence is None:
            sentence = line
        else:
            lines.append((lineno, line))
    if sentence is not None:
        blocks.append((sentence, lines))
    return blocks


def _parse_extraction(lineno: int, line: str) -> tuple[dict, list[str]]:
    match = _EXTRACTION_RE.match(line)
    if match is None:
        return {}, [f"line {lineno}: not a '<confidence> (subject; relation; object)' extraction"]
    confidence = float(match.group("confidence"))
    if confidence > 1.0:
        return {}, [f"line {lineno}: confidence {confidence} outside [0, 1]"]
    fields = [field.strip() for field in match.group("body").split(";")]
    location = None
    core: list[str] = []
    for field in fields:
        if field.startswith("L:"):
            location = field[2:].strip()
        elif field.startswith("T:"):
            continue
        else:
            core.append(field)
    if len(core) < 3 or not all(core[:3]):
        return {}, [f"line {lineno}: extraction needs subject, relation, and object"]
    row = {
        "subject": core[0],
        "relation": core[1],
        "object": core[2],
        "confidence": confidence,
    }
    if location:
        row["location"] = location
    return row, []


def adapt_triples(native_path: str | Path, sentences_path: str | Path) -> list[dict]:
    """Native open-IE output -> triple schema rows, aligned to sentence indices."""
    sentence_index = load_sentence_index(sentences_path)
    problems: list[str] = []
    rows: list[dict] = []
    for sentence, lines in parse_native_blocks(Path(native_path).read_text("utf-8")):
        index = sentence_index.get(_normalize_sentence(sentence))
        if index is None:
            problems.append(f"sentence not found in segmentation: {sentence!r}")
            continue
        for lineno, line in lines:
            row, errors = _parse_extraction(lineno, line)
            if errors:
                problems.extend(errors)
                continue
            row["sentence_index"] = index
            rows.append(row)
    if problems:
        raise AdapterError("; ".join(problems))
    return rows


def write_triples(rows: list[dict], path: str | Path) -> None:
    Path(path).write_text("\n".join(json.dumps(row, ensure_ascii=False) for row in rows) + "\n", "utf-8")
