"""QA-driven knowledge-graph extraction.

Vertices are harvested by repeatedly asking an extractive QA backend a
kind-specific question over the plot, masking each accepted answer in
place, and stopping once the backend's no-answer probability beats the
best remaining span. Edges are then scored by matching relation-question
answers back onto the vertex set: the probability that ``x`` and ``u``
are related is the average of the two directed sums

    p(x, u) = sum over answers o, anchored at x, of p(o)
              when u is the best word-overlap match for o

clamped to [0, 1]. Graph assembly walks a location frontier outward from a
seeded start room; whatever stays unattached afterwards is glued to its
best-scoring location so the result is always playable (connected).

A ``random`` ablation keeps the same vertex set but wires it uniformly at
random into a spanning tree.
"""

from __future__ import annotations

import json
import random
import re
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path

from .backends import Backend, QaAnswer, QaResult
from .corpus import Span, StoryPlot, slugify
from .errors import StoryworldError
from .kg import (
    Edge,
    KnowledgeGraph,
    Provenance,
    Relation,
    Vertex,
    VertexKind,
    is_connected,
    require_valid,
)


class ExtractionError(StoryworldError):
    pass


class NoLocationError(ExtractionError):
    """Graph construction needs at least one location vertex."""


DEFAULT_QUESTIONS = {
    VertexKind.CHARACTER: "Who is a character in the story?",
    VertexKind.LOCATION: "Where is a location in the story?",
    VertexKind.OBJECT: "What is an object in the story?",
}


@dataclass(frozen=True)
class ExtractionConfig:
    """Knobs for the extraction pipeline; defaults ship in-repo.

    ``probability_mode`` selects what p(o) means in the relation sum:
    ``"span"`` uses the answer's span probability (the same quantity that
    ranks answers), ``"token_sum"`` sums the probabilities of the answer
    tokens that overlap the matched vertex.
    """

    questions_by_kind: dict = field(default_factory=lambda: dict(DEFAULT_QUESTIONS))
    next_to_question: str = "What location can I visit from {name}?"
    has_question: str = "Who/What is in {name}?"
    where_question: str = "Where is {name}?"
    no_answer_margin: float = 0.0
    max_vertices_per_kind: int = 20
    max_relations_per_location: int = 6
    top_k: int = 5
    seed: int = 0
    relation_threshold: float = 0.15
    probability_mode: str = "span"

    def __post_init__(self):
        for kind in VertexKind:
            if kind not in self.questions_by_kind:
                raise ExtractionError(f"no question template for kind {kind.value!r}")
        if self.max_vertices_per_kind < 1:
            raise ExtractionError("max_vertices_per_kind must be >= 1")
        if self.probability_mode not in ("span", "token_sum"):
            raise ExtractionError("probability_mode must be 'span' or 'token_sum'")

    @classmethod
    def from_file(cls, path: str | Path) -> "ExtractionConfig":
        doc = json.loads(Path(path).read_text("utf-8"))
        if not isinstance(doc, dict):
            raise ExtractionError("extraction config must be a JSON object")
        kwargs = dict(doc)
        if "questions_by_kind" in kwargs:
            questions = dict(DEFAULT_QUESTIONS)
            for key, template in kwargs["questions_by_kind"].items():
                questions[VertexKind(key)] = template
            kwargs["questions_by_kind"] = questions
        unknown = set(kwargs) - {f.name for f in cls.__dataclass_fields__.values()}
        if unknown:
            raise ExtractionError(f"unknown extraction config keys: {sorted(unknown)}")
        return cls(**kwargs)


# --- text normalization -------------------------------------------------

_ARTICLE_RE = re.compile(r"^(?:the|a|an)\s+", re.IGNORECASE)


def word_tokens(text: str) -> list[str]:
    """Lowercased alphanumeric word tokens; punctuation splits."""
    return re.findall(r"[a-z0-9]+", text.lower())


def normalize_name(text: str) -> str:
    """Canonical key for duplicate detection: article-stripped word tokens."""
    return " ".join(word_tokens(_ARTICLE_RE.sub("", text.strip())))


def clean_answer_text(text: str) -> str:
    """Trim whitespace, wrapping quotes, and edge punctuation off an answer."""
    return text.strip().strip("\"'‘’“”").strip(" \t\n.,;:!?").strip()


# --- masking ------------------------------------------------------------

_MASK_TOKEN = "[MASK]"


def _mask_fill(length: int) -> str:
    if length >= len(_MASK_TOKEN):
        return _MASK_TOKEN + "_" * (length - len(_MASK_TOKEN))
    return "_" * length


class MaskedContext:
    """A context string with in-place, length-preserving masking.

    Every mask replaces exactly as many characters as it hides, so offsets
    in the masked text always map straight back to the original. Re-masking
    clips against already-masked intervals: only still-visible characters
    change.
    """

    def __init__(self, text: str):
        self.original = text
        self._chars = list(text)
        self._masked: list[Span] = []

    @property
    def text(self) -> str:
        return "".join(self._chars)

    def unmasked_runs(self, span: Span) -> list[Span]:
        """Sub-ranges of ``span`` not yet covered by any mask."""
        if span.start < 0 or span.end > len(self._chars) or span.start > span.end:
            raise ExtractionError(f"span {span} out of bounds for context of length {len(self._chars)}")
        runs: list[Span] = []
        cursor = span.start
        for masked in sorted(self._masked):
            if masked.end <= cursor or masked.start >= span.end:
                continue
            if masked.start > cursor:
                runs.append(Span(cursor, masked.start))
            cursor = max(cursor, masked.end)
        if cursor < span.end:
            runs.append(Span(cursor, span.end))
        return runs

    def mask(self, span: Span) -> None:
        for run in self.unmasked_runs(span):
            fill = _mask_fill(run.end - run.start)
            self._chars[run.start : run.end] = list(fill)
            self._masked.append(run)


def mask_span(context: str, span: Span) -> str:
    """One-shot masking of ``span`` inside ``context`` (length-preserving)."""
    masked = MaskedContext(context)
    masked.mask(span)
    return masked.text


# --- vertex extraction ---------------------------------------------------

@dataclass
class ExtractedVertex:
    """A vertex plus every span it was recorded at during extraction."""

    vertex: Vertex
    spans: list[Span] = field(default_factory=list)


def _no_answer_wins(result: QaResult, margin: float) -> bool:
    best = result.best
    return best is None or result.no_answer_probability > best.span_probability + margin


def make_vertex_id(kind: VertexKind, name: str, taken: set[str]) -> str:
    base = f"{kind.value}:{slugify(name)}"
    vid = base
    n = 2
    while vid in taken:
        vid = f"{base}-{n}"
        n += 1
    return vid


def extract_kind_detailed(
    story: StoryPlot,
    kind: VertexKind,
    backend: Backend,
    config: ExtractionConfig,
) -> list[ExtractedVertex]:
    """Ask-and-mask loop for one vertex kind, keeping mention spans.

    Each round queries the progressively masked plot; the best answer is
    recorded as a vertex (or merged into one whose normalized surface
    matches) and its span masked out. Terminates when the no-answer
    probability exceeds the best span's, when answers run out, or at the
    per-kind vertex bound.
    """
    if not story.text.strip():
        raise ExtractionError("story text is empty")
    question = config.questions_by_kind[kind]
    context = MaskedContext(story.text)
    extracted: list[ExtractedVertex] = []
    by_norm: dict[str, ExtractedVertex] = {}
    taken_ids: set[str] = set()
    for _ in range(config.max_vertices_per_kind):
        result = backend.qa_extract(context.text, question, config.top_k)
        if _no_answer_wins(result, config.no_answer_margin):
            break
        best = result.best
        context.mask(best.span)
        name = clean_answer_text(best.text)
        norm = normalize_name(name)
        if not norm:
            continue
        known = by_norm.get(norm)
        if known is not None:
            known.spans.append(best.span)
            if name != known.vertex.name and name not in known.vertex.aliases:
                known.vertex = replace(known.vertex, aliases=known.vertex.aliases + (name,))
            continue
        vertex = Vertex(id=make_vertex_id(kind, name, taken_ids), kind=kind, name=name)
        taken_ids.add(vertex.id)
        record = ExtractedVertex(vertex=vertex, spans=[best.span])
        extracted.append(record)
        by_norm[norm] = record
    return extracted


def extract_kind(
    story: StoryPlot,
    kind: VertexKind,
    backend: Backend,
    config: ExtractionConfig,
) -> list[Vertex]:
    return [record.vertex for record in extract_kind_detailed(story, kind, backend, config)]


def extract_vertices(
    story: StoryPlot,
    backend: Backend,
    config: ExtractionConfig,
) -> list[Vertex]:
    """All three kinds, each against a freshly unmasked plot."""
    vertices: list[Vertex] = []
    for kind in (VertexKind.LOCATION, VertexKind.CHARACTER, VertexKind.OBJECT):
        vertices.extend(extract_kind(story, kind, backend, config))
    return vertices


# --- relation scoring ----------------------------------------------------

def match_vertex(answer: QaAnswer, vertices: list[Vertex]) -> tuple[Vertex, int] | None:
    """Best word-token-overlap vertex for an answer, or None at overlap 0.

    Overlap counts shared tokens between the answer text and the vertex
    name plus aliases; ties break toward the earliest-extracted vertex.
    """
    answer_tokens = set(word_tokens(answer.text))
    best: Vertex | None = None
    best_overlap = 0
    for vertex in vertices:
        vertex_tokens = set(word_tokens(vertex.name))
        for alias in vertex.aliases:
            vertex_tokens.update(word_tokens(alias))
        overlap = len(answer_tokens & vertex_tokens)
        if overlap > best_overlap:
            best, best_overlap = vertex, overlap
    if best is None:
        return None
    return best, best_overlap


def _answer_weight(answer: QaAnswer, vertex: Vertex, mode: str) -> float:
    if mode == "span":
        return answer.span_probability
    vertex_tokens = set(word_tokens(vertex.name))
    for alias in vertex.aliases:
        vertex_tokens.update(word_tokens(alias))
    return sum(p for tok, p in answer.token_probabilities if word_tokens(tok) and word_tokens(tok)[0] in vertex_tokens)


def directed_relation_sum(
    target: Vertex,
    qa_result: QaResult,
    vertices: list[Vertex],
    mode: str = "span",
) -> float:
    """p(x, target): total answer weight whose best match is ``target``."""
    total = 0.0
    for answer in qa_result.answers:
        matched = match_vertex(answer, vertices)
        if matched is not None and matched[0].id == target.id:
            total += _answer_weight(answer, target, mode)
    return total


def relation_probability(
    x: Vertex,
    u: Vertex,
    qa_from_x: QaResult,
    qa_from_u: QaResult,
    vertices: list[Vertex],
    mode: str = "span",
) -> float:
    """Symmetric relation score: average of the two directed sums, clamped."""
    p_xu = directed_relation_sum(u, qa_from_x, vertices, mode)
    p_ux = directed_relation_sum(x, qa_from_u, vertices, mode)
    return min(1.0, max(0.0, (p_xu + p_ux) / 2.0))


# --- graph construction --------------------------------------------------

def construct_graph(
    story: StoryPlot,
    vertices: list[Vertex],
    backend: Backend,
    config: ExtractionConfig,
) -> KnowledgeGraph:
    """Frontier walk from a seeded start location, one scored edge at a time.

    For each frontier location the two relation questions run their own
    ask-and-mask loops (bounded per location); answers are matched onto the
    vertex set and an edge is accepted when its relation probability clears
    the threshold without breaking tree discipline. Unattached leftovers are
    finally glued to their best-scoring attached location, defaulting to the
    start room, so the graph always comes out connected.
    """
    locations = [v for v in vertices if v.kind is VertexKind.LOCATION]
    if not locations:
        raise NoLocationError("cannot construct a graph without a location vertex")
    rng = random.Random(config.seed)
    start = locations[rng.randrange(len(locations))]

    by_id = {v.id: v for v in vertices}
    edges: list[Edge] = []
    attached: set[str] = {start.id}
    attach_order: list[Vertex] = [start]
    frontier: deque[Vertex] = deque([start])
    forward_rounds: dict[tuple[str, Relation], list[QaResult]] = {}
    reverse_cache: dict[str, QaResult] = {}

    def reverse_result(v: Vertex) -> QaResult:
        # The reverse of a containment question is a location question about
        # the entity; for locations it is the same visit question, unmasked.
        if v.id not in reverse_cache:
            template = config.next_to_question if v.kind is VertexKind.LOCATION else config.where_question
            reverse_cache[v.id] = backend.qa_extract(story.text, template.format(name=v.name), config.top_k)
        return reverse_cache[v.id]

    def has_parent(vid: str) -> bool:
        return any(e.relation is Relation.HAS and e.dst == vid for e in edges)

    def next_to_exists(a: str, b: str) -> bool:
        return any(e.relation is Relation.NEXT_TO and {e.src, e.dst} == {a, b} for e in edges)

    def attach(v: Vertex) -> None:
        attached.add(v.id)
        attach_order.append(v)
        if v.kind is VertexKind.LOCATION:
            frontier.append(v)

    while frontier:
        x = frontier.popleft()
        for relation, template in (
            (Relation.NEXT_TO, config.next_to_question),
            (Relation.HAS, config.has_question),
        ):
            question = template.format(name=x.name)
            context = MaskedContext(story.text)
            rounds: list[QaResult] = []
            forward_rounds[(x.id, relation)] = rounds
            for _ in range(config.max_relations_per_location):
                result = backend.qa_extract(context.text, question, config.top_k)
                if _no_answer_wins(result, config.no_answer_margin):
                    break
                rounds.append(result)
                best = result.best
                context.mask(best.span)
                matched = match_vertex(best, vertices)
                if matched is None:
                    continue
                u = matched[0]
                if u.id == x.id:
                    continue
                if relation is Relation.NEXT_TO and u.kind is not VertexKind.LOCATION:
                    continue
                if relation is Relation.HAS and u.kind is VertexKind.LOCATION:
                    continue
                if relation is Relation.HAS and has_parent(u.id):
                    continue
                if relation is Relation.NEXT_TO and next_to_exists(x.id, u.id):
                    continue
                probability = relation_probability(
                    x, u, result, reverse_result(u), vertices, config.probability_mode
                )
                if probability > config.relation_threshold:
                    edges.append(Edge(src=x.id, dst=u.id, relation=relation, confidence=probability))
                    if u.id not in attached:
                        attach(u)

    # Fallback attachment: locations first so entities can pick them up.
    leftovers = [v for v in vertices if v.id not in attached and v.kind is VertexKind.LOCATION]
    leftovers += [v for v in vertices if v.id not in attached and v.kind is not VertexKind.LOCATION]
    for v in leftovers:
        relation = Relation.NEXT_TO if v.kind is VertexKind.LOCATION else Relation.HAS
        rev = reverse_result(v)
        best_location: Vertex | None = None
        best_probability = 0.0
        for candidate in attach_order:
            if candidate.kind is not VertexKind.LOCATION:
                continue
            probability = max(
                (
                    relation_probability(candidate, v, rnd, rev, vertices, config.probability_mode)
                    for rnd in forward_rounds.get((candidate.id, relation), [])
                ),
                default=0.0,
            )
            if probability > best_probability:
                best_location, best_probability = candidate, probability
        if best_location is None:
            best_location, best_probability = start, 0.0
        edges.append(Edge(src=best_location.id, dst=v.id, relation=relation, confidence=best_probability))
        attach(v)

    graph = KnowledgeGraph(
        vertices=tuple(vertices),
        edges=tuple(edges),
        start_location=start.id,
        provenance=Provenance.NEURAL,
    )
    require_valid(graph)
    if not is_connected(graph):
        raise ExtractionError("constructed graph is not connected; this is a bug")
    return graph


def extract_graph(
    story: StoryPlot,
    backend: Backend,
    config: ExtractionConfig,
) -> KnowledgeGraph:
    """Full pipeline: vertex extraction then frontier construction."""
    return construct_graph(story, extract_vertices(story, backend, config), backend, config)


def random_connect(vertices: list[Vertex], seed: int) -> KnowledgeGraph:
    """Ablation wiring: same vertices, uniformly random spanning tree.

    Repeatedly samples an unconnected vertex and hangs it off an already
    connected location, so the result has exactly ``len(vertices) - 1``
    edges. Random-provenance edges carry the uninformative confidence 0.5.
    """
    locations = [v for v in vertices if v.kind is VertexKind.LOCATION]
    if not locations:
        raise NoLocationError("cannot randomly connect without a location vertex")
    rng = random.Random(seed)
    start = locations[rng.randrange(len(locations))]
    connected_locations = [start]
    unconnected = [v for v in vertices if v.id != start.id]
    edges: list[Edge] = []
    while unconnected:
        v = unconnected.pop(rng.randrange(len(unconnected)))
        target = connected_locations[rng.randrange(len(connected_locations))]
        if v.kind is VertexKind.LOCATION:
            edges.append(Edge(src=target.id, dst=v.id, relation=Relation.NEXT_TO, confidence=0.5))
            connected_locations.append(v)
        else:
            edges.append(Edge(src=target.id, dst=v.id, relation=Relation.HAS, confidence=0.5))
    graph = KnowledgeGraph(
        vertices=tuple(vertices),
        edges=tuple(edges),
        start_location=start.id,
        provenance=Provenance.RANDOM,
    )
    require_valid(graph)
    return graph
