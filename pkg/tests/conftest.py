from __future__ import annotations

import pytest

from storyworld.corpus import slugify
from storyworld.kg import Edge, KnowledgeGraph, Provenance, Relation, Vertex, VertexKind


def loc(name: str, **kwargs) -> Vertex:
    return Vertex(id=f"location:{slugify(name)}", kind=VertexKind.LOCATION, name=name, **kwargs)


def char(name: str, **kwargs) -> Vertex:
    return Vertex(id=f"character:{slugify(name)}", kind=VertexKind.CHARACTER, name=name, **kwargs)


def obj(name: str, **kwargs) -> Vertex:
    return Vertex(id=f"object:{slugify(name)}", kind=VertexKind.OBJECT, name=name, **kwargs)


def next_to(a: Vertex, b: Vertex, confidence: float = 1.0) -> Edge:
    return Edge(src=a.id, dst=b.id, relation=Relation.NEXT_TO, confidence=confidence)


def has(a: Vertex, b: Vertex, confidence: float = 1.0) -> Edge:
    return Edge(src=a.id, dst=b.id, relation=Relation.HAS, confidence=confidence)


def graph(vertices, edges, start=None, provenance=Provenance.NEURAL) -> KnowledgeGraph:
    return KnowledgeGraph(
        vertices=tuple(vertices),
        edges=tuple(edges),
        start_location=start.id if isinstance(start, Vertex) else start,
        provenance=provenance,
    )


@pytest.fixture
def vault_world(vault_graph):
    from storyworld.flavor import default_grammar, describe_with_templates
    from storyworld.gamegen import GameMetadata, compile_game

    descriptions = describe_with_templates(vault_graph, default_grammar(), seed=0)
    return compile_game(
        vault_graph,
        descriptions,
        GameMetadata(story_id="league", genre="mystery", provenance="neural"),
    )


@pytest.fixture
def vault_graph():
    """Three rooms off a vault, three entities inside it."""
    vault = loc("Bank Vault")
    baker = loc("Baker Street")
    shop = loc("Wilson's Shop")
    archie = char("Archie")
    helper = char("Helper")
    clay = char("John Clay")
    vertices = [vault, baker, shop, archie, helper, clay]
    edges = [
        next_to(vault, baker, 0.8),
        next_to(vault, shop, 0.7),
        has(vault, archie, 0.9),
        has(vault, helper, 0.6),
        has(vault, clay, 0.95),
    ]
    return graph(vertices, edges, start=vault)
