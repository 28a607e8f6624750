"""Rule-based graph construction from externally produced open-IE triples.

The open-IE tool and the NER/POS tagger run out of process; their outputs
arrive through two JSON-lines schemas (see README). This module propagates
sparse location annotations across sentence ranges, sorts triple arguments
into characters and objects, and assembles a graph: one room per resolved
location, entities attached where first mentioned, rooms chained in
first-mention order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .corpus import StoryPlot
from .errors import StoryworldError
from .extraction import make_vertex_id, normalize_name, word_tokens
from .kg import Edge, KnowledgeGraph, Provenance, Relation, Vertex, VertexKind, require_valid


class TripleError(StoryworldError):
    pass


class TripleSchemaError(TripleError):
    """Malformed triple/annotation rows, reported with line numbers."""

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


class NoLocationAnnotationError(TripleError):
    """No triple carries a location, so the graph would have no rooms."""


# NER tags treated as person markers and POS prefixes treated as nouns.
PERSON_TAGS = frozenset({"PERSON", "PER"})
NOUN_POS_PREFIX = "NN"


@dataclass(frozen=True)
class Triple:
    subject: str
    relation: str
    object: str
    confidence: float
    sentence_index: int
    location_annotation: str | None = None


@dataclass(frozen=True)
class TokenAnnotation:
    sentence_index: int
    token: str
    pos_tag: str
    ner_tag: str | None = None


def _parse_jsonl(path: str | Path) -> list[tuple[int, dict]]:
    rows: list[tuple[int, dict]] = []
    problems: list[str] = []
    for lineno, line in enumerate(Path(path).read_text("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            problems.append(f"line {lineno}: not valid JSON ({exc.msg})")
            continue
        if not isinstance(doc, dict):
            problems.append(f"line {lineno}: row must be a JSON object")
            continue
        rows.append((lineno, doc))
    if problems:
        raise TripleSchemaError(problems)
    return rows


def ingest_triples(path: str | Path) -> list[Triple]:
    """Read the triple JSON-lines file, returning rows sorted by sentence.

    Every malformed row is reported (with its line number) in one error.
    """
    triples: list[Triple] = []
    problems: list[str] = []
    for lineno, doc in _parse_jsonl(path):
        missing = [key for key in ("subject", "relation", "object", "confidence", "sentence_index") if key not in doc]
        if missing:
            problems.append(f"line {lineno}: missing {', '.join(missing)}")
            continue
        confidence = doc["confidence"]
        if not isinstance(confidence, (int, float)) or not 0.0 <= confidence <= 1.0:
            problems.append(f"line {lineno}: confidence must be in [0, 1], got {confidence!r}")
            continue
        sentence_index = doc["sentence_index"]
        if not isinstance(sentence_index, int) or sentence_index < 0:
            problems.append(f"line {lineno}: sentence_index must be a non-negative integer")
            continue
        location = doc.get("location")
        if location is not None and not isinstance(location, str):
            problems.append(f"line {lineno}: location must be a string when present")
            continue
        triples.append(
            Triple(
                subject=str(doc["subject"]),
                relation=str(doc["relation"]),
                object=str(doc["object"]),
                confidence=float(confidence),
                sentence_index=sentence_index,
                location_annotation=location,
            )
        )
    if problems:
        raise TripleSchemaError(problems)
    triples.sort(key=lambda t: t.sentence_index)  # stable: file order within a sentence
    return triples


def load_annotations(path: str | Path) -> list[TokenAnnotation]:
    """Read the token-annotation JSON-lines file (POS plus optional NER)."""
    annotations: list[TokenAnnotation] = []
    problems: list[str] = []
    for lineno, doc in _parse_jsonl(path):
        missing = [key for key in ("sentence_index", "token", "pos") if key not in doc]
        if missing:
            problems.append(f"line {lineno}: missing {', '.join(missing)}")
            continue
        if not isinstance(doc["sentence_index"], int) or doc["sentence_index"] < 0:
            problems.append(f"line {lineno}: sentence_index must be a non-negative integer")
            continue
        ner = doc.get("ner")
        annotations.append(
            TokenAnnotation(
                sentence_index=doc["sentence_index"],
                token=str(doc["token"]),
                pos_tag=str(doc["pos"]),
                ner_tag=str(ner) if ner is not None else None,
            )
        )
    if problems:
        raise TripleSchemaError(problems)
    return annotations


def propagate_locations(triples: list[Triple], story: StoryPlot) -> list[tuple[Triple, str]]:
    """Resolve every triple to the most recent annotated location.

    A location annotation holds from its sentence until the next annotated
    sentence; triples before the first annotation resolve to the first
    location. Raises when no triple is annotated at all.
    """
    sentence_count = len(story.sentences)
    for t in triples:
        if t.sentence_index >= sentence_count:
            raise TripleError(
                f"triple at sentence {t.sentence_index} is outside the story "
                f"({sentence_count} sentences)"
            )
    annotated: dict[int, str] = {}
    for t in triples:
        if t.location_annotation and t.sentence_index not in annotated:
            annotated[t.sentence_index] = t.location_annotation
    if not annotated:
        raise NoLocationAnnotationError("no triple carries a location annotation")
    boundaries = sorted(annotated)
    first_location = annotated[boundaries[0]]

    resolved: list[tuple[Triple, str]] = []
    for t in sorted(triples, key=lambda t: t.sentence_index):
        current = first_location
        for boundary in boundaries:
            if boundary > t.sentence_index:
                break
            current = annotated[boundary]
        resolved.append((t, current))
    return resolved


def _argument_tokens(argument: str, sentence_annotations: list[TokenAnnotation]) -> list[TokenAnnotation]:
    wanted = set(word_tokens(argument))
    return [a for a in sentence_annotations if word_tokens(a.token) and word_tokens(a.token)[0] in wanted]


def filter_entities(
    triples: list[Triple],
    annotations: list[TokenAnnotation],
) -> tuple[list[str], list[str]]:
    """Split triple arguments into characters and objects.

    Arguments with a person NER tag become characters; remaining noun
    phrases become objects; anything matching an annotated location is
    excluded. With no annotation data an argument counts as a noun phrase.
    Both lists are deduplicated case-insensitively, first mention wins.
    """
    by_sentence: dict[int, list[TokenAnnotation]] = {}
    for a in annotations:
        by_sentence.setdefault(a.sentence_index, []).append(a)
    location_norms = {
        normalize_name(t.location_annotation) for t in triples if t.location_annotation
    }

    characters: list[str] = []
    objects: list[str] = []
    seen: set[str] = set()
    for t in triples:
        for argument in (t.subject, t.object):
            norm = normalize_name(argument)
            if not norm or norm in seen or norm in location_norms:
                continue
            arg_tokens = _argument_tokens(argument, by_sentence.get(t.sentence_index, []))
            is_person = any(a.ner_tag in PERSON_TAGS for a in arg_tokens)
            is_noun = not arg_tokens or any(a.pos_tag.startswith(NOUN_POS_PREFIX) for a in arg_tokens)
            if is_person:
                characters.append(argument)
                seen.add(norm)
            elif is_noun:
                objects.append(argument)
                seen.add(norm)
    return characters, objects


def build_rules_graph(
    located_triples: list[tuple[Triple, str]],
    characters: list[str],
    objects: list[str],
    locations: list[str],
) -> KnowledgeGraph:
    """Assemble the baseline graph from resolved triples.

    One location vertex per distinct resolved location; locations chain in
    first-mention order (the tool gives no adjacency signal, and a chain
    keeps degree variance low); each entity attaches where first mentioned,
    with confidence the best triple confidence at that location.
    """
    if not locations:
        raise TripleError("cannot build a graph without locations")

    taken: set[str] = set()
    location_vertices: dict[str, Vertex] = {}
    ordered_vertices: list[Vertex] = []
    for name in locations:
        norm = normalize_name(name)
        if norm in location_vertices:
            continue
        vertex = Vertex(id=make_vertex_id(VertexKind.LOCATION, name, taken), kind=VertexKind.LOCATION, name=name)
        taken.add(vertex.id)
        location_vertices[norm] = vertex
        ordered_vertices.append(vertex)

    edges: list[Edge] = []
    chain = [location_vertices[normalize_name(name)] for name in locations if normalize_name(name) in location_vertices]
    unique_chain: list[Vertex] = []
    for vertex in chain:
        if vertex not in unique_chain:
            unique_chain.append(vertex)
    for a, b in zip(unique_chain, unique_chain[1:]):
        edges.append(Edge(src=a.id, dst=b.id, relation=Relation.NEXT_TO, confidence=1.0))

    def first_mention(entity_norm: str) -> tuple[str | None, float]:
        """Location of the first mentioning triple and the max confidence there."""
        location: str | None = None
        for triple, resolved in located_triples:
            if normalize_name(triple.subject) == entity_norm or normalize_name(triple.object) == entity_norm:
                location = resolved
                break
        if location is None:
            return None, 0.0
        confidence = max(
            (
                triple.confidence
                for triple, resolved in located_triples
                if resolved == location
                and (normalize_name(triple.subject) == entity_norm or normalize_name(triple.object) == entity_norm)
            ),
            default=0.0,
        )
        return location, confidence

    entity_norms: set[str] = set()
    for names, kind in ((characters, VertexKind.CHARACTER), (objects, VertexKind.OBJECT)):
        for name in names:
            norm = normalize_name(name)
            if not norm or norm in entity_norms or norm in location_vertices:
                continue
            entity_norms.add(norm)
            vertex = Vertex(id=make_vertex_id(kind, name, taken), kind=kind, name=name)
            taken.add(vertex.id)
            ordered_vertices.append(vertex)
            location_name, confidence = first_mention(norm)
            if location_name is not None and normalize_name(location_name) in location_vertices:
                parent = location_vertices[normalize_name(location_name)]
            else:
                # Entity never matched a located triple: park it in the first room.
                parent, confidence = unique_chain[0], 0.5
            edges.append(Edge(src=parent.id, dst=vertex.id, relation=Relation.HAS, confidence=confidence))

    graph = KnowledgeGraph(
        vertices=tuple(ordered_vertices),
        edges=tuple(edges),
        start_location=unique_chain[0].id,
        provenance=Provenance.RULES,
    )
    require_valid(graph)
    return graph


def rules_graph_from_files(
    story: StoryPlot,
    triples_path: str | Path,
    annotations_path: str | Path | None = None,
) -> KnowledgeGraph:
    """Whole baseline pipeline: ingest, propagate, filter, build."""
    triples = ingest_triples(triples_path)
    annotations = load_annotations(annotations_path) if annotations_path else []
    located = propagate_locations(triples, story)
    characters, objects = filter_entities(triples, annotations)
    locations: list[str] = []
    seen: set[str] = set()
    for _, resolved in located:
        norm = normalize_name(resolved)
        if norm not in seen:
            seen.add(norm)
            locations.append(resolved)
    return build_rules_graph(located, characters, objects, locations)
