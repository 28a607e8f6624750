from __future__ import annotations

import json

import pytest

from storyworld import rules
from storyworld.corpus import Genre, load_story
from storyworld.kg import Relation, VertexKind, is_connected, validate
from storyworld.rules import (
    TokenAnnotation,
    Triple,
    build_rules_graph,
    filter_entities,
    ingest_triples,
    load_annotations,
    propagate_locations,
    rules_graph_from_files,
)


def triple(subject, relation, object_, sentence_index, confidence=0.9, location=None) -> Triple:
    return Triple(
        subject=subject,
        relation=relation,
        object=object_,
        confidence=confidence,
        sentence_index=sentence_index,
        location_annotation=location,
    )


def write_jsonl(path, rows):
    path.write_text("\n".join(json.dumps(r) for r in rows), "utf-8")
    return path


FIVE_SENTENCES = "One. Two. Three. Four. Five. Six. Seven."


@pytest.fixture
def story():
    return load_story(FIVE_SENTENCES, Genre.MYSTERY, title="counting")


class TestIngest:
    def test_well_formed_rows(self, tmp_path):
        rows = [
            {"subject": "John", "relation": "robbed", "object": "the bank", "confidence": 0.9, "sentence_index": 0},
            {"subject": "He", "relation": "fled", "object": "the city", "confidence": 0.8, "sentence_index": 1},
            {"subject": "Police", "relation": "chased", "object": "him", "confidence": 0.7, "sentence_index": 2},
        ]
        triples = ingest_triples(write_jsonl(tmp_path / "t.jsonl", rows))
        assert len(triples) == 3

    def test_confidence_out_of_range(self, tmp_path):
        rows = [{"subject": "a", "relation": "r", "object": "b", "confidence": 1.3, "sentence_index": 0}]
        with pytest.raises(rules.TripleSchemaError, match="line 1"):
            ingest_triples(write_jsonl(tmp_path / "t.jsonl", rows))

    def test_rows_sorted_stable(self, tmp_path):
        rows = [
            {"subject": "late", "relation": "r", "object": "x", "confidence": 0.5, "sentence_index": 3},
            {"subject": "early-a", "relation": "r", "object": "x", "confidence": 0.5, "sentence_index": 1},
            {"subject": "early-b", "relation": "r", "object": "x", "confidence": 0.5, "sentence_index": 1},
        ]
        triples = ingest_triples(write_jsonl(tmp_path / "t.jsonl", rows))
        assert [t.subject for t in triples] == ["early-a", "early-b", "late"]

    def test_all_bad_rows_reported(self, tmp_path):
        rows = [
            {"subject": "a", "relation": "r", "object": "b", "confidence": 2.0, "sentence_index": 0},
            {"relation": "r", "object": "b", "confidence": 0.5, "sentence_index": 0},
        ]
        with pytest.raises(rules.TripleSchemaError) as excinfo:
            ingest_triples(write_jsonl(tmp_path / "t.jsonl", rows))
        assert "line 1" in str(excinfo.value)
        assert "line 2" in str(excinfo.value)

    def test_invalid_json_line(self, tmp_path):
        path = tmp_path / "t.jsonl"
        path.write_text('{"subject": "a"\nnot json', "utf-8")
        with pytest.raises(rules.TripleSchemaError):
            ingest_triples(path)


class TestAnnotations:
    def test_loads_pos_and_ner(self, tmp_path):
        rows = [
            {"sentence_index": 0, "token": "John", "pos": "NNP", "ner": "PERSON"},
            {"sentence_index": 0, "token": "ran", "pos": "VBD"},
        ]
        annotations = load_annotations(write_jsonl(tmp_path / "a.jsonl", rows))
        assert annotations[0].ner_tag == "PERSON"
        assert annotations[1].ner_tag is None


class TestPropagateLocations:
    def test_paper_style_two_annotations(self, story):
        # location A on the 1st sentence, location B on the 5th (0-based: 0 and 4)
        triples = [
            triple("a", "r", "b", 0, location="A"),
            triple("c", "r", "d", 1),
            triple("e", "r", "f", 3),
            triple("g", "r", "h", 4, location="B"),
            triple("i", "r", "j", 6),
        ]
        resolved = propagate_locations(triples, story)
        assert [location for _, location in resolved] == ["A", "A", "A", "B", "B"]

    def test_single_annotation_covers_everything(self, story):
        triples = [triple("a", "r", "b", 0, location="A")] + [triple("c", "r", "d", i) for i in range(1, 5)]
        resolved = propagate_locations(triples, story)
        assert all(location == "A" for _, location in resolved)

    def test_triples_before_first_annotation_use_first_location(self, story):
        triples = [triple("early", "r", "x", 0), triple("a", "r", "b", 2, location="A")]
        resolved = propagate_locations(triples, story)
        assert resolved[0][1] == "A"

    def test_no_annotation_is_an_error(self, story):
        with pytest.raises(rules.NoLocationAnnotationError):
            propagate_locations([triple("a", "r", "b", 0)], story)

    def test_sentence_index_out_of_range(self, story):
        with pytest.raises(rules.TripleError):
            propagate_locations([triple("a", "r", "b", 99, location="A")], story)

    def test_monotone_changes_only_at_annotations(self, story):
        triples = [
            triple("a", "r", "b", 0, location="A"),
            triple("c", "r", "d", 2, location="B"),
            triple("e", "r", "f", 1),
            triple("g", "r", "h", 3),
        ]
        resolved = propagate_locations(triples, story)
        by_sentence = {t.sentence_index: location for t, location in resolved}
        assert by_sentence == {0: "A", 1: "A", 2: "B", 3: "B"}


class TestFilterEntities:
    def test_person_ner_beats_noun_fallback(self):
        triples = [triple("John Clay", "robbed", "the bank", 0, location="the city")]
        annotations = [
            TokenAnnotation(0, "John", "NNP", "PERSON"),
            TokenAnnotation(0, "Clay", "NNP", "PERSON"),
            TokenAnnotation(0, "bank", "NN", None),
        ]
        characters, objects = filter_entities(triples, annotations)
        assert characters == ["John Clay"]
        assert objects == ["the bank"]

    def test_locations_excluded_from_objects(self):
        triples = [triple("John", "entered", "the city", 0, location="the city")]
        annotations = [TokenAnnotation(0, "city", "NN", None), TokenAnnotation(0, "John", "NNP", "PERSON")]
        characters, objects = filter_entities(triples, annotations)
        assert "the city" not in objects

    def test_pos_noun_fallback_without_ner(self):
        triples = [triple("the watch", "was", "golden", 0, location="shop")]
        annotations = [
            TokenAnnotation(0, "watch", "NN", None),
            TokenAnnotation(0, "golden", "JJ", None),
        ]
        characters, objects = filter_entities(triples, annotations)
        assert characters == []
        assert objects == ["the watch"]

    def test_no_annotations_at_all_is_noun_phrase_heuristic(self):
        triples = [triple("the watch", "was", "gone", 0, location="shop")]
        characters, objects = filter_entities(triples, [])
        assert objects == ["the watch", "gone"]

    def test_dedup_case_insensitive(self):
        triples = [
            triple("The Watch", "was", "gone", 0, location="shop"),
            triple("the watch", "ticked", "loudly", 1),
        ]
        _, objects = filter_entities(triples, [TokenAnnotation(0, "watch", "NN"), TokenAnnotation(1, "watch", "NN")])
        assert objects.count("The Watch") == 1
        assert "the watch" not in objects  # merged into the first surface form


class TestBuildRulesGraph:
    def test_two_locations_chained_with_entities(self):
        located = [
            (triple("e1", "r", "x", 0, location="A"), "A"),
            (triple("e2", "r", "y", 4, location="B"), "B"),
        ]
        graph = build_rules_graph(located, [], ["e1", "e2"], ["A", "B"])
        assert validate(graph) == []
        assert is_connected(graph)
        next_to = [e for e in graph.edges if e.relation is Relation.NEXT_TO]
        assert len(next_to) == 1
        has_edges = {(e.src, e.dst) for e in graph.edges if e.relation is Relation.HAS}
        assert ("location:a", "object:e1") in has_edges
        assert ("location:b", "object:e2") in has_edges

    def test_single_location_star(self):
        located = [(triple(f"e{i}", "r", "x", 0, location="A"), "A") for i in range(3)]
        graph = build_rules_graph(located, [], [f"e{i}" for i in range(3)], ["A"])
        has_edges = [e for e in graph.edges if e.relation is Relation.HAS]
        assert len(has_edges) == 3
        assert all(e.src == "location:a" for e in has_edges)

    def test_entity_at_two_locations_attaches_at_first_mention(self):
        located = [
            (triple("gem", "seen in", "x", 0, location="A"), "A"),
            (triple("gem", "moved to", "y", 4, location="B"), "B"),
        ]
        graph = build_rules_graph(located, [], ["gem"], ["A", "B"])
        has_edges = [e for e in graph.edges if e.relation is Relation.HAS]
        assert len(has_edges) == 1
        assert has_edges[0].src == "location:a"

    def test_has_confidence_is_max_involved(self):
        located = [
            (triple("gem", "r", "x", 0, confidence=0.4, location="A"), "A"),
            (triple("gem", "r", "y", 1, confidence=0.9), "A"),
        ]
        graph = build_rules_graph(located, [], ["gem"], ["A"])
        has_edges = [e for e in graph.edges if e.relation is Relation.HAS]
        assert has_edges[0].confidence == pytest.approx(0.9)

    def test_empty_locations_rejected(self):
        with pytest.raises(rules.TripleError):
            build_rules_graph([], [], ["x"], [])

    def test_chain_preserves_first_mention_order(self):
        located = [
            (triple("a", "r", "x", 0, location="C"), "C"),
            (triple("b", "r", "y", 2, location="A"), "A"),
            (triple("c", "r", "z", 4, location="B"), "B"),
        ]
        graph = build_rules_graph(located, [], [], ["C", "A", "B"])
        pairs = [(e.src, e.dst) for e in graph.edges if e.relation is Relation.NEXT_TO]
        assert pairs == [("location:c", "location:a"), ("location:a", "location:b")]


class TestFullRulesPipeline:
    def test_end_to_end(self, tmp_path, story):
        triples_path = write_jsonl(
            tmp_path / "triples.jsonl",
            [
                {"subject": "John Clay", "relation": "robbed", "object": "the safe",
                 "confidence": 0.9, "sentence_index": 0, "location": "the bank"},
                {"subject": "John Clay", "relation": "fled to", "object": "the alley",
                 "confidence": 0.8, "sentence_index": 4, "location": "the street"},
            ],
        )
        annotations_path = write_jsonl(
            tmp_path / "annotations.jsonl",
            [
                {"sentence_index": 0, "token": "John", "pos": "NNP", "ner": "PERSON"},
                {"sentence_index": 0, "token": "Clay", "pos": "NNP", "ner": "PERSON"},
                {"sentence_index": 0, "token": "safe", "pos": "NN"},
                {"sentence_index": 4, "token": "alley", "pos": "NN"},
            ],
        )
        graph = rules_graph_from_files(story, triples_path, annotations_path)
        assert validate(graph) == []
        assert is_connected(graph)
        kinds = {v.name: v.kind for v in graph.vertices}
        assert kinds["the bank"] is VertexKind.LOCATION
        assert kinds["the street"] is VertexKind.LOCATION
        assert kinds["John Clay"] is VertexKind.CHARACTER
        assert kinds["the safe"] is VertexKind.OBJECT
        assert graph.start_location == "location:the-bank"

    def test_deterministic(self, tmp_path, story):
        triples_path = write_jsonl(
            tmp_path / "triples.jsonl",
            [
                {"subject": "a", "relation": "r", "object": "b",
                 "confidence": 0.9, "sentence_index": 0, "location": "L"},
            ],
        )
        first = rules_graph_from_files(story, triples_path)
        second = rules_graph_from_files(story, triples_path)
        assert first == second
