"""Knowledge-graph data model: validation, pruning, statistics, serialization.

Graphs hold typed vertices (locations, characters, objects) and two edge
relations: ``next_to`` links location pairs and is interpreted
bidirectionally; ``has`` places a character or object inside a location.
Non-location vertices are leaves with at most one parent, so a well-formed
graph is a tree except for possible cycles among locations.

All values are immutable; every operation here is a pure function.
"""

from __future__ import annotations

import enum
import json
import math
import random
from dataclasses import dataclass
from pathlib import Path

from .errors import StoryworldError


class GraphError(StoryworldError):
    pass


class InvalidGraphError(GraphError):
    """An operation required a valid graph and got violations instead."""

    def __init__(self, violations: list[str]):
        super().__init__("invalid graph: " + "; ".join(violations))
        self.violations = violations


class DisconnectedGraphError(GraphError):
    pass


class GraphSchemaError(GraphError):
    """Serialized graph bytes do not match the documented JSON schema."""


class VertexKind(enum.Enum):
    LOCATION = "location"
    CHARACTER = "character"
    OBJECT = "object"


class Relation(enum.Enum):
    NEXT_TO = "next_to"
    HAS = "has"


class Provenance(enum.Enum):
    NEURAL = "neural"
    RULES = "rules"
    RANDOM = "random"


@dataclass(frozen=True)
class Vertex:
    id: str
    kind: VertexKind
    name: str
    aliases: tuple[str, ...] = ()


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    relation: Relation
    confidence: float


@dataclass(frozen=True)
class KnowledgeGraph:
    vertices: tuple[Vertex, ...]
    edges: tuple[Edge, ...]
    start_location: str | None = None
    provenance: Provenance = Provenance.NEURAL

    def vertex(self, vertex_id: str) -> Vertex:
        for v in self.vertices:
            if v.id == vertex_id:
                return v
        raise KeyError(vertex_id)

    def by_kind(self, kind: VertexKind) -> list[Vertex]:
        return [v for v in self.vertices if v.kind is kind]


@dataclass(frozen=True)
class GraphStats:
    location_count: int
    character_count: int
    object_count: int
    edge_count: int
    avg_degree: float
    degree_std: float

    @property
    def vertex_count(self) -> int:
        return self.location_count + self.character_count + self.object_count


def validate(graph: KnowledgeGraph) -> list[str]:
    """Return one message per invariant violation; empty when well-formed.

    Violations are data, not errors: callers decide whether to raise.
    """
    violations: list[str] = []
    seen_ids: set[str] = set()
    for v in graph.vertices:
        if not v.name:
            violations.append(f"vertex {v.id!r} has an empty name")
        if v.id in seen_ids:
            violations.append(f"duplicate vertex id {v.id!r}")
        seen_ids.add(v.id)
    by_id = {v.id: v for v in graph.vertices}

    has_parents: dict[str, int] = {}
    seen_pairs: set[tuple[str, str, Relation]] = set()
    for e in graph.edges:
        label = f"{e.relation.value} edge {e.src!r}->{e.dst!r}"
        src = by_id.get(e.src)
        dst = by_id.get(e.dst)
        if src is None or dst is None:
            violations.append(f"{label} references a missing vertex")
            continue
        if e.src == e.dst:
            violations.append(f"{label} is a self-loop")
        if not 0.0 <= e.confidence <= 1.0:
            violations.append(f"{label} has confidence {e.confidence} outside [0, 1]")
        if e.relation is Relation.NEXT_TO:
            if src.kind is not VertexKind.LOCATION or dst.kind is not VertexKind.LOCATION:
                violations.append(f"{label} must connect two locations")
            key = (min(e.src, e.dst), max(e.src, e.dst), e.relation)
        else:
            if src.kind is not VertexKind.LOCATION:
                violations.append(f"{label} must originate at a location")
            if dst.kind is VertexKind.LOCATION:
                violations.append(f"{label} must target a character or object")
            else:
                has_parents[e.dst] = has_parents.get(e.dst, 0) + 1
            key = (e.src, e.dst, e.relation)
        if key in seen_pairs:
            violations.append(f"duplicate {label}")
        seen_pairs.add(key)

    for vid, count in has_parents.items():
        if count > 1:
            violations.append(f"vertex {vid!r} has {count} has-parents (max 1)")

    if graph.start_location is not None and graph.start_location not in by_id:
        violations.append(f"start_location {graph.start_location!r} is not a vertex")
    return violations


def require_valid(graph: KnowledgeGraph) -> None:
    violations = validate(graph)
    if violations:
        raise InvalidGraphError(violations)


def _adjacency(graph: KnowledgeGraph) -> dict[str, list[str]]:
    adj: dict[str, list[str]] = {v.id: [] for v in graph.vertices}
    for e in graph.edges:
        if e.src in adj and e.dst in adj:
            adj[e.src].append(e.dst)
            adj[e.dst].append(e.src)
    return adj


def is_connected(graph: KnowledgeGraph) -> bool:
    """Every vertex reachable from the start location, edges undirected.

    Graphs without a start location are rooted at their first vertex; the
    empty graph counts as connected.
    """
    if not graph.vertices:
        return True
    root = graph.start_location or graph.vertices[0].id
    adj = _adjacency(graph)
    seen = {root}
    stack = [root]
    while stack:
        for nbr in adj[stack.pop()]:
            if nbr not in seen:
                seen.add(nbr)
                stack.append(nbr)
    return len(seen) == len(graph.vertices)


def graph_stats(graph: KnowledgeGraph) -> GraphStats:
    """Per-graph counts and degree statistics.

    Degree is the number of incident edges with every edge treated as
    undirected; ``degree_std`` is the population standard deviation over
    this graph's vertices.
    """
    require_valid(graph)
    degrees = {v.id: 0 for v in graph.vertices}
    for e in graph.edges:
        degrees[e.src] += 1
        degrees[e.dst] += 1
    vertex_count = len(graph.vertices)
    edge_count = len(graph.edges)
    if vertex_count:
        avg = 2 * edge_count / vertex_count
        mean = sum(degrees.values()) / vertex_count
        std = math.sqrt(sum((d - mean) ** 2 for d in degrees.values()) / vertex_count)
    else:
        avg = 0.0
        std = 0.0
    kinds = [v.kind for v in graph.vertices]
    return GraphStats(
        location_count=kinds.count(VertexKind.LOCATION),
        character_count=kinds.count(VertexKind.CHARACTER),
        object_count=kinds.count(VertexKind.OBJECT),
        edge_count=edge_count,
        avg_degree=avg,
        degree_std=std,
    )


def prune(
    graph: KnowledgeGraph,
    max_locations: int,
    max_entities_per_location: int,
    seed: int,
) -> KnowledgeGraph:
    """Randomly drop vertices/edges until the caps hold.

    Keeps a connected location subset (always containing the start location
    when one is set), drops entities of removed locations, then samples each
    surviving location's children down to the cap. Same seed, same output;
    a graph already within caps is returned unchanged.
    """
    if max_locations < 1:
        raise GraphError("max_locations must be >= 1")
    if max_entities_per_location < 0:
        raise GraphError("max_entities_per_location must be >= 0")
    require_valid(graph)
    if not is_connected(graph):
        raise DisconnectedGraphError("cannot prune a disconnected graph")

    locations = graph.by_kind(VertexKind.LOCATION)
    children: dict[str, list[Edge]] = {v.id: [] for v in locations}
    for e in graph.edges:
        if e.relation is Relation.HAS:
            children[e.src].append(e)

    within_caps = len(locations) <= max_locations and all(
        len(kids) <= max_entities_per_location for kids in children.values()
    )
    if within_caps:
        return graph

    rng = random.Random(seed)

    # Grow a connected location subset of the right size from the root.
    loc_adj: dict[str, list[str]] = {v.id: [] for v in locations}
    loc_ids = set(loc_adj)
    for e in graph.edges:
        if e.relation is Relation.NEXT_TO and e.src in loc_ids and e.dst in loc_ids:
            loc_adj[e.src].append(e.dst)
            loc_adj[e.dst].append(e.src)
    root = graph.start_location if graph.start_location in loc_ids else locations[0].id
    kept_locations = {root}
    candidates = sorted(loc_adj[root])
    while candidates and len(kept_locations) < max_locations:
        pick = candidates.pop(rng.randrange(len(candidates)))
        if pick in kept_locations:
            continue
        kept_locations.add(pick)
        for nbr in sorted(loc_adj[pick]):
            if nbr not in kept_locations and nbr not in candidates:
                candidates.append(nbr)

    kept_entity_edges: list[Edge] = []
    kept_entities: set[str] = set()
    for loc in locations:
        if loc.id not in kept_locations:
            continue
        kids = children[loc.id]
        if len(kids) > max_entities_per_location:
            kept_idx = sorted(rng.sample(range(len(kids)), max_entities_per_location))
            kids = [kids[i] for i in kept_idx]
        kept_entity_edges.extend(kids)
        kept_entities.update(e.dst for e in kids)

    kept_ids = kept_locations | kept_entities
    vertices = tuple(v for v in graph.vertices if v.id in kept_ids)
    edges = tuple(
        e
        for e in graph.edges
        if (e.relation is Relation.NEXT_TO and e.src in kept_locations and e.dst in kept_locations)
        or (e.relation is Relation.HAS and e in kept_entity_edges)
    )
    start = graph.start_location if graph.start_location in kept_ids else root
    pruned = KnowledgeGraph(
        vertices=vertices,
        edges=edges,
        start_location=start,
        provenance=graph.provenance,
    )
    require_valid(pruned)
    return pruned


# --- JSON serialization ------------------------------------------------

def _vertex_to_json(v: Vertex) -> dict:
    return {"id": v.id, "kind": v.kind.value, "name": v.name, "aliases": list(v.aliases)}


def _edge_to_json(e: Edge) -> dict:
    return {"src": e.src, "dst": e.dst, "relation": e.relation.value, "confidence": e.confidence}


def serialize(graph: KnowledgeGraph) -> bytes:
    """Encode a valid graph as UTF-8 JSON (schema documented in README)."""
    require_valid(graph)
    doc = {
        "provenance": graph.provenance.value,
        "start_location": graph.start_location,
        "vertices": [_vertex_to_json(v) for v in graph.vertices],
        "edges": [_edge_to_json(e) for e in graph.edges],
    }
    return json.dumps(doc, indent=2, ensure_ascii=False).encode("utf-8")


def _expect(condition: bool, message: str) -> None:
    if not condition:
        raise GraphSchemaError(message)


def deserialize(data: bytes | str) -> KnowledgeGraph:
    """Decode graph JSON, checking structure, enums, and value ranges."""
    try:
        doc = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise GraphSchemaError(f"graph bytes are not valid JSON: {exc}") from exc
    _expect(isinstance(doc, dict), "graph document must be a JSON object")
    for key in ("provenance", "start_location", "vertices", "edges"):
        _expect(key in doc, f"graph document is missing the {key!r} key")
    try:
        provenance = Provenance(doc["provenance"])
    except ValueError:
        raise GraphSchemaError(f"unknown provenance {doc['provenance']!r}") from None
    start = doc["start_location"]
    _expect(start is None or isinstance(start, str), "start_location must be a string or null")
    _expect(isinstance(doc["vertices"], list), "vertices must be a list")
    _expect(isinstance(doc["edges"], list), "edges must be a list")

    vertices = []
    for i, item in enumerate(doc["vertices"]):
        _expect(isinstance(item, dict), f"vertex #{i} must be an object")
        for key in ("id", "kind", "name"):
            _expect(isinstance(item.get(key), str), f"vertex #{i} needs a string {key!r}")
        try:
            kind = VertexKind(item["kind"])
        except ValueError:
            raise GraphSchemaError(f"vertex #{i} has unknown kind {item['kind']!r}") from None
        aliases = item.get("aliases", [])
        _expect(
            isinstance(aliases, list) and all(isinstance(a, str) for a in aliases),
            f"vertex #{i} aliases must be a list of strings",
        )
        vertices.append(Vertex(id=item["id"], kind=kind, name=item["name"], aliases=tuple(aliases)))

    edges = []
    for i, item in enumerate(doc["edges"]):
        _expect(isinstance(item, dict), f"edge #{i} must be an object")
        for key in ("src", "dst"):
            _expect(isinstance(item.get(key), str), f"edge #{i} needs a string {key!r}")
        try:
            relation = Relation(item.get("relation"))
        except ValueError:
            raise GraphSchemaError(f"edge #{i} has unknown relation {item.get('relation')!r}") from None
        confidence = item.get("confidence")
        _expect(
            isinstance(confidence, (int, float)) and 0.0 <= confidence <= 1.0,
            f"edge #{i} confidence must be a number in [0, 1]",
        )
        edges.append(Edge(src=item["src"], dst=item["dst"], relation=relation, confidence=float(confidence)))

    return KnowledgeGraph(
        vertices=tuple(vertices),
        edges=tuple(edges),
        start_location=start,
        provenance=provenance,
    )


def load_graph(path) -> KnowledgeGraph:
    return deserialize(Path(path).read_bytes())


def save_graph(graph: KnowledgeGraph, path) -> None:
    Path(path).write_bytes(serialize(graph))
