"""Flavortext generation: grammar templates and prompted neural blurbs.

The template path expands ``#token#`` nonterminals (seeded-uniform choice
among terminal alternatives) and ``<slot>`` bindings in template strings;
it can only say what the graph knows, so it stays faithful by
construction. The neural path builds a prompt from the story prefix up to
an entity's first mention plus a direct question, then post-processes the
completion down to whole sentences, falling back to a template after
repeated empty generations.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

from .backends import Backend, GenerationParams
from .corpus import StoryPlot
from .errors import StoryworldError
from .kg import KnowledgeGraph, Relation, Vertex, VertexKind, require_valid


class GrammarError(StoryworldError):
    pass


class DescriptionError(StoryworldError):
    pass


class EntityNotFoundError(DescriptionError):
    """The vertex never appears in the story text, so no prompt exists."""


ROOM_INTRO_TEMPLATE = "room_intro"
CONTAINER_TEMPLATE = "container"

_NONTERMINAL_RE = re.compile(r"#([^#\s]+)#")
_SLOT_RE = re.compile(r"<([^<>\s]+)>")
_DELIMITERS = ("#", "<", ">")


@dataclass(frozen=True)
class Grammar:
    """Single-level grammar: named templates over terminal alternatives."""

    productions: dict
    templates: dict

    def __post_init__(self):
        for name, alternatives in self.productions.items():
            if not alternatives:
                raise GrammarError(f"production {name!r} has no alternatives")
            for alt in alternatives:
                if any(d in alt for d in _DELIMITERS):
                    raise GrammarError(
                        f"production {name!r} alternative {alt!r} contains a delimiter; "
                        "productions must be terminal"
                    )
        for name, template in self.templates.items():
            for token in _NONTERMINAL_RE.findall(template):
                if token not in self.productions:
                    raise GrammarError(f"template {name!r} references unknown nonterminal #{token}#")


@dataclass(frozen=True)
class EntityDescription:
    """Flavortext for one vertex, tagged with how it was produced."""

    vertex_id: str
    text: str
    source: str  # "neural" | "template"
    prompt_used: str | None = None

    def __post_init__(self):
        if not self.text:
            raise DescriptionError(f"description for {self.vertex_id!r} is empty")
        if self.source not in ("neural", "template"):
            raise DescriptionError(f"unknown description source {self.source!r}")


def load_grammar(path: str | Path) -> Grammar:
    try:
        doc = json.loads(Path(path).read_text("utf-8"))
    except OSError as exc:
        raise GrammarError(f"cannot read grammar {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise GrammarError(f"grammar {path} is not valid JSON: {exc}") from exc
    return grammar_from_json(doc)


def grammar_from_json(doc: dict) -> Grammar:
    if not isinstance(doc, dict) or "productions" not in doc or "templates" not in doc:
        raise GrammarError("grammar needs 'productions' and 'templates' objects")
    productions = {
        str(name): tuple(str(alt) for alt in alternatives)
        for name, alternatives in doc["productions"].items()
    }
    templates = {str(name): str(template) for name, template in doc["templates"].items()}
    return Grammar(productions=productions, templates=templates)


def default_grammar() -> Grammar:
    data = resources.files("storyworld").joinpath("data/grammar.json").read_text("utf-8")
    return grammar_from_json(json.loads(data))


def _expand(grammar: Grammar, template: str, bindings: dict, rng: random.Random) -> str:
    def pick(match: re.Match) -> str:
        token = match.group(1)
        alternatives = grammar.productions.get(token)
        if alternatives is None:
            raise GrammarError(f"unknown nonterminal #{token}#")
        return alternatives[rng.randrange(len(alternatives))]

    def bind(match: re.Match) -> str:
        slot = match.group(1)
        if slot not in bindings:
            raise GrammarError(f"unbound slot <{slot}>")
        value = str(bindings[slot])
        if any(d in value for d in _DELIMITERS):
            raise GrammarError(f"binding for <{slot}> contains a grammar delimiter")
        return value

    expanded = _NONTERMINAL_RE.sub(pick, template)
    expanded = _SLOT_RE.sub(bind, expanded)
    if any(d in expanded for d in _DELIMITERS):
        raise GrammarError(f"expansion left residual delimiters: {expanded!r}")
    return expanded


def expand_template(grammar: Grammar, template_name: str, bindings: dict, seed: int) -> str:
    """Expand a named template; same seed, same output."""
    template = grammar.templates.get(template_name)
    if template is None:
        raise GrammarError(f"unknown template {template_name!r}")
    return _expand(grammar, template, bindings, random.Random(seed))


def _sentence_terminated(text: str) -> str:
    return text if text.rstrip()[-1:] in ".!?" else text + "."


def describe_with_templates(graph: KnowledgeGraph, grammar: Grammar, seed: int) -> list[EntityDescription]:
    """One room intro per location, one container blurb per placement."""
    require_valid(graph)
    for required in (ROOM_INTRO_TEMPLATE, CONTAINER_TEMPLATE):
        if required not in grammar.templates:
            raise GrammarError(f"grammar is missing the {required!r} template")
    rng = random.Random(seed)
    by_id = {v.id: v for v in graph.vertices}
    descriptions: list[EntityDescription] = []
    for vertex in graph.vertices:
        if vertex.kind is VertexKind.LOCATION:
            text = _expand(
                grammar,
                grammar.templates[ROOM_INTRO_TEMPLATE],
                {"location-name": vertex.name},
                rng,
            )
            descriptions.append(
                EntityDescription(vertex_id=vertex.id, text=_sentence_terminated(text), source="template")
            )
    for edge in graph.edges:
        if edge.relation is not Relation.HAS:
            continue
        text = _expand(
            grammar,
            grammar.templates[CONTAINER_TEMPLATE],
            {"location-name": by_id[edge.src].name, "entity-name": by_id[edge.dst].name},
            rng,
        )
        descriptions.append(
            EntityDescription(vertex_id=edge.dst, text=_sentence_terminated(text), source="template")
        )
    return descriptions


# --- neural path ----------------------------------------------------------

def _first_mention(story: StoryPlot, vertex: Vertex) -> int:
    """Offset of the earliest mention of the vertex name or any alias."""
    best = -1
    for surface in (vertex.name, *vertex.aliases):
        pattern = re.compile(r"\b" + re.escape(surface) + r"\b", re.IGNORECASE)
        match = pattern.search(story.text)
        if match and (best == -1 or match.start() < best):
            best = match.start()
    if best == -1:
        raise EntityNotFoundError(f"{vertex.name!r} does not occur in the story text")
    return best


def build_prompt(story: StoryPlot, vertex: Vertex) -> str:
    """Story prefix through the first-mention sentence plus a direct question."""
    offset = _first_mention(story, vertex)
    sentence = story.sentences[story.sentence_index_at(offset)]
    prefix = story.text[: sentence.end]
    interrogative = "Who" if vertex.kind is VertexKind.CHARACTER else "What"
    return f"{prefix}\nQ: {interrogative} is {vertex.name}? A:"


_SENTENCE_END_RE = re.compile(r"[.!?][\"'’”)\]]*")


def _truncate_to_sentence(text: str) -> str:
    text = text.lstrip().lstrip("\"'‘“").lstrip()
    last = None
    for match in _SENTENCE_END_RE.finditer(text):
        last = match
    if last is None:
        return ""
    return text[: last.end()].strip()


def generate_description(
    story: StoryPlot,
    vertex: Vertex,
    backend: Backend,
    params: GenerationParams,
    *,
    grammar: Grammar | None = None,
    location_name: str | None = None,
) -> EntityDescription:
    """Prompted blurb for one vertex, with retry and template fallback.

    Retries (incrementing the seed) up to three attempts when the cleaned
    completion is empty; after that, falls back to the grammar templates
    when available, otherwise raises.
    """
    prompt = build_prompt(story, vertex)
    for attempt in range(3):
        completion = backend.generate(prompt, replace(params, seed=params.seed + attempt))
        text = _truncate_to_sentence(completion)
        if text:
            return EntityDescription(vertex_id=vertex.id, text=text, source="neural", prompt_used=prompt)
    if grammar is None:
        raise DescriptionError(f"generation produced no usable text for {vertex.name!r} and no grammar fallback given")
    rng = random.Random(params.seed)
    if vertex.kind is VertexKind.LOCATION:
        text = _expand(grammar, grammar.templates[ROOM_INTRO_TEMPLATE], {"location-name": vertex.name}, rng)
    elif location_name is not None:
        text = _expand(
            grammar,
            grammar.templates[CONTAINER_TEMPLATE],
            {"location-name": location_name, "entity-name": vertex.name},
            rng,
        )
    else:
        raise DescriptionError(f"no location known for {vertex.name!r}; cannot build a fallback blurb")
    return EntityDescription(vertex_id=vertex.id, text=_sentence_terminated(text), source="template")


def describe_graph_neural(
    story: StoryPlot,
    graph: KnowledgeGraph,
    backend: Backend,
    params: GenerationParams,
    grammar: Grammar | None = None,
) -> list[EntityDescription]:
    """Neural blurbs for every vertex of a graph, in vertex order."""
    require_valid(graph)
    by_id = {v.id: v for v in graph.vertices}
    parent_name = {
        e.dst: by_id[e.src].name for e in graph.edges if e.relation is Relation.HAS
    }
    return [
        generate_description(
            story, vertex, backend, params, grammar=grammar, location_name=parent_name.get(vertex.id)
        )
        for vertex in graph.vertices
    ]


# --- descriptions file I/O -------------------------------------------------

def descriptions_to_json(descriptions: list[EntityDescription]) -> list[dict]:
    rows = []
    for d in descriptions:
        row = {"vertex_id": d.vertex_id, "text": d.text, "source": d.source}
        if d.prompt_used is not None:
            row["prompt_used"] = d.prompt_used
        rows.append(row)
    return rows


def descriptions_from_json(doc) -> list[EntityDescription]:
    if not isinstance(doc, list):
        raise DescriptionError("descriptions file must be a JSON list")
    out = []
    for i, row in enumerate(doc):
        if not isinstance(row, dict) or not {"vertex_id", "text", "source"} <= set(row):
            raise DescriptionError(f"description #{i} needs vertex_id, text, and source")
        out.append(
            EntityDescription(
                vertex_id=str(row["vertex_id"]),
                text=str(row["text"]),
                source=str(row["source"]),
                prompt_used=row.get("prompt_used"),
            )
        )
    return out


def save_descriptions(descriptions: list[EntityDescription], path: str | Path) -> None:
    Path(path).write_text(json.dumps(descriptions_to_json(descriptions), indent=2, ensure_ascii=False), "utf-8")


def load_descriptions(path: str | Path) -> list[EntityDescription]:
    return descriptions_from_json(json.loads(Path(path).read_text("utf-8")))
