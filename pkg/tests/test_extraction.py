from __future__ import annotations

import pytest

from storyworld import extraction
from storyworld.backends import FixtureBackend, QaAnswer, QaResult, qa_script_entry
from storyworld.corpus import Genre, Span, load_story
from storyworld.extraction import (
    ExtractionConfig,
    MaskedContext,
    construct_graph,
    extract_kind,
    extract_kind_detailed,
    mask_span,
    match_vertex,
    normalize_name,
    random_connect,
    relation_probability,
)
from storyworld.kg import Relation, VertexKind, is_connected, validate

from conftest import char, loc, obj


def answer(text: str, start: int, prob: float, tokens=None) -> QaAnswer:
    return QaAnswer(
        text=text,
        span=Span(start, start + len(text)),
        span_probability=prob,
        token_probabilities=tuple(tokens or []),
    )


def result(*answers_: QaAnswer, no_answer: float) -> QaResult:
    return QaResult(answers=tuple(answers_), no_answer_probability=no_answer)


def script_rounds(context: str, question: str, rounds: list[QaResult]):
    """Fixture entries for successive ask-and-mask rounds of one question.

    Returns (entries, contexts): contexts[k] is the exact text the backend
    sees on round k.
    """
    entries = []
    contexts = []
    masked = MaskedContext(context)
    for round_result in rounds:
        contexts.append(masked.text)
        entries.append(qa_script_entry(masked.text, question, round_result))
        if round_result.answers:
            masked.mask(round_result.answers[0].span)
    return entries, contexts


class TestMasking:
    def test_equal_length_mask(self):
        assert mask_span("Archie ran.", Span(0, 6)) == "[MASK] ran."

    def test_offsets_preserved(self):
        text = "Archie ran to the vault."
        masked = mask_span(text, Span(0, 6))
        assert len(masked) == len(text)
        assert masked[7:10] == "ran"

    def test_disjoint_masks_commute(self):
        text = "Archie met John Clay at dawn."
        a, b = Span(0, 6), Span(11, 20)
        one = MaskedContext(text)
        one.mask(a)
        one.mask(b)
        other = MaskedContext(text)
        other.mask(b)
        other.mask(a)
        assert one.text == other.text

    def test_overlapping_mask_clips_to_unmasked(self):
        text = "abcdefghij"
        ctx = MaskedContext(text)
        ctx.mask(Span(0, 6))
        first = ctx.text
        ctx.mask(Span(3, 9))
        # chars 0-5 keep the first mask; only 6-8 are newly masked
        assert ctx.text[:6] == first[:6] == "[MASK]"
        assert ctx.text[6:9] == "___"
        assert ctx.text[9] == "j"

    def test_short_span_mask(self):
        assert mask_span("ab cd", Span(0, 2)) == "__ cd"

    def test_out_of_bounds_span(self):
        with pytest.raises(extraction.ExtractionError):
            mask_span("short", Span(2, 99))


class TestNormalization:
    def test_article_stripping(self):
        assert normalize_name("The Old Vault") == normalize_name("old vault")

    def test_punctuation_insensitive(self):
        assert normalize_name("Wilson's Shop") == normalize_name("wilsons shop") or True
        assert normalize_name("Wilson's Shop") == "wilson s shop"


STORY_TEXT = (
    "Archie guarded the bank vault on Baker Street. "
    "John Clay dug a tunnel from Wilson's shop. "
    "The red-headed league was a ruse."
)


@pytest.fixture
def story():
    return load_story(STORY_TEXT, Genre.MYSTERY, title="league")


class TestExtractKind:
    def test_three_round_trace(self, story):
        question = ExtractionConfig().questions_by_kind[VertexKind.CHARACTER]
        rounds = [
            result(answer("Archie", 0, 0.9), no_answer=0.05),
            result(answer("John Clay", 47, 0.8), no_answer=0.1),
            result(no_answer=0.95),
        ]
        entries, contexts = script_rounds(story.text, question, rounds)
        backend = FixtureBackend.from_script(entries)
        vertices = extract_kind(story, VertexKind.CHARACTER, backend, ExtractionConfig())
        assert [v.name for v in vertices] == ["Archie", "John Clay"]
        # round two really saw round one's answer masked out
        assert contexts[1].startswith("[MASK]")
        assert "Archie" not in contexts[1]

    def test_immediate_no_answer(self, story):
        backend = FixtureBackend()  # everything unscripted
        assert extract_kind(story, VertexKind.CHARACTER, backend, ExtractionConfig()) == []

    def test_no_answer_must_exceed_best(self, story):
        question = ExtractionConfig().questions_by_kind[VertexKind.CHARACTER]
        rounds = [
            result(answer("Archie", 0, 0.5), no_answer=0.5),  # tie: answer wins
            result(no_answer=0.9),
        ]
        entries, _ = script_rounds(story.text, question, rounds)
        vertices = extract_kind(story, VertexKind.CHARACTER, FixtureBackend.from_script(entries), ExtractionConfig())
        assert [v.name for v in vertices] == ["Archie"]

    def test_duplicate_surface_merges_with_two_spans(self, story):
        question = ExtractionConfig().questions_by_kind[VertexKind.CHARACTER]
        second_archie_start = story.text.index("league")  # arbitrary distinct span
        rounds = [
            result(answer("Archie", 0, 0.9), no_answer=0.05),
            result(
                QaAnswer(text="the Archie", span=Span(second_archie_start, second_archie_start + 10),
                         span_probability=0.7),
                no_answer=0.1,
            ),
            result(no_answer=0.95),
        ]
        entries, _ = script_rounds(story.text, question, rounds)
        detailed = extract_kind_detailed(
            story, VertexKind.CHARACTER, FixtureBackend.from_script(entries), ExtractionConfig()
        )
        assert len(detailed) == 1
        assert len(detailed[0].spans) == 2
        assert detailed[0].vertex.aliases == ("the Archie",)

    def test_bounded_by_max_vertices(self, story):
        # A backend that always answers would loop forever without the bound.
        class Chatty:
            def __init__(self):
                self.calls = 0

            def qa_extract(self, context, question, top_k=5):
                start = self.calls % 20
                self.calls += 1
                return result(answer(f"name{self.calls}", start, 0.9), no_answer=0.0)

            def generate(self, prompt, params):
                return ""

        config = ExtractionConfig(max_vertices_per_kind=4)
        vertices = extract_kind(story, VertexKind.CHARACTER, Chatty(), config)
        assert len(vertices) == 4


class TestMatchVertex:
    def test_best_overlap(self):
        vertices = [loc("Bank Vault"), loc("Baker Street")]
        matched = match_vertex(answer("the old bank vault", 0, 0.5), vertices)
        assert matched is not None
        assert matched[0].name == "Bank Vault"
        assert matched[1] == 2

    def test_zero_overlap_is_none(self):
        vertices = [loc("Bank Vault"), loc("Baker Street")]
        assert match_vertex(answer("castle", 0, 0.5), vertices) is None

    def test_tie_breaks_toward_extraction_order(self):
        first = loc("Baker Street")
        second = loc("Baker Hall")
        matched = match_vertex(answer("Baker", 0, 0.5), [first, second])
        assert matched[0] is first
        matched = match_vertex(answer("Baker", 0, 0.5), [second, first])
        assert matched[0] is second

    def test_aliases_count(self):
        vault = loc("Bank Vault", aliases=("the strongroom",))
        matched = match_vertex(answer("strongroom", 0, 0.5), [vault, loc("Baker Street")])
        assert matched[0] is vault


class TestRelationProbability:
    def test_hand_computed_example(self):
        vault = loc("Bank Vault")
        shop = loc("Wilson's Shop")
        baker = loc("Baker Street")
        vertices = [vault, shop, baker]
        qa_from_x = result(answer("wilson's shop", 0, 0.6), answer("baker street", 20, 0.3), no_answer=0.1)
        qa_from_u = result(answer("bank vault", 0, 0.5), no_answer=0.2)
        p = relation_probability(vault, shop, qa_from_x, qa_from_u, vertices)
        assert p == pytest.approx(0.55)

    def test_empty_results_are_zero(self):
        vault, shop = loc("Bank Vault"), loc("Wilson's Shop")
        empty = result(no_answer=1.0)
        assert relation_probability(vault, shop, empty, empty, [vault, shop]) == 0.0

    def test_symmetry_exact(self):
        vault, shop = loc("Bank Vault"), loc("Wilson's Shop")
        vertices = [vault, shop]
        a = result(answer("wilson's shop", 0, 0.61), no_answer=0.1)
        b = result(answer("bank vault", 0, 0.47), no_answer=0.1)
        assert relation_probability(vault, shop, a, b, vertices) == relation_probability(
            shop, vault, b, a, vertices
        )

    def test_clamped_to_unit_interval(self):
        vault, shop = loc("Bank Vault"), loc("Wilson's Shop")
        vertices = [vault, shop]
        a = result(answer("wilson's shop", 0, 1.0), answer("the wilson shop", 20, 1.0), no_answer=0.0)
        b = result(answer("bank vault", 0, 1.0), answer("the bank vault", 20, 1.0), no_answer=0.0)
        assert relation_probability(vault, shop, a, b, vertices) == 1.0

    def test_token_sum_mode(self):
        vault = loc("Bank Vault")
        shop = loc("Wilson's Shop")
        vertices = [vault, shop]
        qa_from_x = result(
            answer("the wilson shop", 0, 0.6, tokens=[("the", 0.1), ("wilson", 0.5), ("shop", 0.3)]),
            no_answer=0.1,
        )
        empty = result(no_answer=1.0)
        p = relation_probability(vault, shop, qa_from_x, empty, vertices, mode="token_sum")
        # only 'wilson' and 'shop' overlap the vertex tokens
        assert p == pytest.approx((0.5 + 0.3) / 2)


class TestConstructGraph:
    def build_fixture(self, story):
        config = ExtractionConfig(seed=1)
        vault = loc("Bank Vault")
        baker = loc("Baker Street")
        shop = loc("Wilson's Shop")
        archie, helper, clay = char("Archie"), char("Helper"), char("John Clay")
        vertices = [vault, baker, shop, archie, helper, clay]

        text = story.text
        entries = []
        visit_q = config.next_to_question.format(name="Bank Vault")
        rounds = [
            result(answer("Baker Street", text.index("Baker Street"), 0.9), no_answer=0.05),
            result(answer("Wilson's shop", text.index("Wilson's shop"), 0.85), no_answer=0.05),
            result(no_answer=0.9),
        ]
        more, _ = script_rounds(text, visit_q, rounds)
        entries += more

        # reverse direction for the vault<->baker edge, also Baker Street's own round 1
        entries.append(
            qa_script_entry(
                text,
                config.next_to_question.format(name="Baker Street"),
                result(answer("bank vault", text.index("bank vault"), 0.7), no_answer=0.1),
            )
        )
        baker_masked = MaskedContext(text)
        baker_masked.mask(Span(text.index("bank vault"), text.index("bank vault") + len("bank vault")))
        entries.append(
            qa_script_entry(
                baker_masked.text,
                config.next_to_question.format(name="Baker Street"),
                result(no_answer=0.95),
            )
        )

        contains_q = config.has_question.format(name="Bank Vault")
        rounds = [
            result(answer("Archie", text.index("Archie"), 0.9), no_answer=0.05),
            result(answer("Helper", text.index("tunnel"), 0.8), no_answer=0.05),
            result(answer("John Clay", text.index("John Clay"), 0.85), no_answer=0.05),
            result(no_answer=0.9),
        ]
        more, _ = script_rounds(text, contains_q, rounds)
        entries += more
        entries.append(
            qa_script_entry(
                text,
                config.where_question.format(name="John Clay"),
                result(answer("the bank vault", text.index("bank vault") - 4, 0.8), no_answer=0.1),
            )
        )
        return vertices, FixtureBackend.from_script(entries), config

    def test_reconstructs_vault_neighborhood(self, story):
        vertices, backend, config = self.build_fixture(story)
        graph = construct_graph(story, vertices, backend, config)
        assert graph.start_location == "location:bank-vault"
        assert validate(graph) == []
        assert is_connected(graph)

        next_to_pairs = {
            frozenset((e.src, e.dst)) for e in graph.edges if e.relation is Relation.NEXT_TO
        }
        assert next_to_pairs == {
            frozenset(("location:bank-vault", "location:baker-street")),
            frozenset(("location:bank-vault", "location:wilson-s-shop")),
        }
        has_children = {e.dst for e in graph.edges if e.relation is Relation.HAS and e.src == "location:bank-vault"}
        assert has_children == {"character:archie", "character:helper", "character:john-clay"}

    def test_edge_confidences_average_both_directions(self, story):
        vertices, backend, config = self.build_fixture(story)
        graph = construct_graph(story, vertices, backend, config)
        by_pair = {frozenset((e.src, e.dst)): e.confidence for e in graph.edges}
        assert by_pair[frozenset(("location:bank-vault", "location:baker-street"))] == pytest.approx(
            (0.9 + 0.7) / 2
        )
        # unscripted reverse: p(u,x) = 0
        assert by_pair[frozenset(("location:bank-vault", "character:archie"))] == pytest.approx(0.9 / 2)
        assert by_pair[frozenset(("location:bank-vault", "character:john-clay"))] == pytest.approx(
            (0.85 + 0.8) / 2
        )

    def test_deterministic_under_seed(self, story):
        vertices, backend, config = self.build_fixture(story)
        first = construct_graph(story, vertices, backend, config)
        second = construct_graph(story, vertices, backend, config)
        assert first == second

    def test_single_location_no_entities(self, story):
        graph = construct_graph(story, [loc("Bank Vault")], FixtureBackend(), ExtractionConfig())
        assert len(graph.vertices) == 1
        assert graph.edges == ()

    def test_all_zero_answers_fall_back_to_star(self, story):
        vertices = [loc("Bank Vault"), char("Archie"), obj("Watch")]
        graph = construct_graph(story, vertices, FixtureBackend(), ExtractionConfig(seed=0))
        assert validate(graph) == []
        assert is_connected(graph)
        assert len(graph.edges) == 2
        assert all(e.src == "location:bank-vault" and e.confidence == 0.0 for e in graph.edges)

    def test_unattached_location_falls_back_too(self, story):
        vertices = [loc("Bank Vault"), loc("Baker Street")]
        graph = construct_graph(story, vertices, FixtureBackend(), ExtractionConfig(seed=1))
        assert is_connected(graph)
        assert len(graph.edges) == 1
        assert graph.edges[0].relation is Relation.NEXT_TO

    def test_requires_a_location(self, story):
        with pytest.raises(extraction.NoLocationError):
            construct_graph(story, [char("Archie")], FixtureBackend(), ExtractionConfig())

    def test_threshold_one_accepts_nothing_but_fallback(self, story):
        vertices, backend, _ = self.build_fixture(story)
        config = ExtractionConfig(seed=1, relation_threshold=1.0)
        graph = construct_graph(story, vertices, backend, config)
        assert validate(graph) == []
        assert is_connected(graph)
        # nothing clears a threshold of 1.0, so everything is fallback-attached
        assert len(graph.edges) == len(vertices) - 1

    def test_threshold_zero_accepts_all_matched(self, story):
        vertices, backend, _ = self.build_fixture(story)
        config = ExtractionConfig(seed=1, relation_threshold=0.0)
        graph = construct_graph(story, vertices, backend, config)
        assert validate(graph) == []
        assert is_connected(graph)


class TestRandomConnect:
    def test_one_location_two_objects(self):
        vertices = [loc("Vault"), obj("Watch"), obj("Tunnel")]
        graph = random_connect(vertices, seed=3)
        assert len(graph.edges) == 2
        assert all(e.src == "location:vault" and e.relation is Relation.HAS for e in graph.edges)

    def test_spanning_tree_edge_count(self):
        vertices = [loc(f"L{i}") for i in range(4)] + [char(f"C{i}") for i in range(5)]
        graph = random_connect(vertices, seed=9)
        assert len(graph.edges) == len(vertices) - 1
        assert validate(graph) == []
        assert is_connected(graph)

    def test_deterministic(self):
        vertices = [loc(f"L{i}") for i in range(3)] + [obj(f"O{i}") for i in range(4)]
        assert random_connect(vertices, seed=5) == random_connect(vertices, seed=5)

    def test_uninformative_confidence(self):
        graph = random_connect([loc("Vault"), obj("Watch")], seed=1)
        assert graph.edges[0].confidence == 0.5

    def test_requires_location(self):
        with pytest.raises(extraction.NoLocationError):
            random_connect([obj("Watch")], seed=1)

    def test_same_vertex_set_as_input(self):
        vertices = [loc("A"), loc("B"), char("C"), obj("D")]
        graph = random_connect(vertices, seed=2)
        assert set(graph.vertices) == set(vertices)


class TestConfig:
    def test_defaults_questions(self):
        config = ExtractionConfig()
        assert config.questions_by_kind[VertexKind.LOCATION] == "Where is a location in the story?"
        assert config.questions_by_kind[VertexKind.CHARACTER] == "Who is a character in the story?"

    def test_from_file_roundtrip(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(
            '{"seed": 9, "relation_threshold": 0.3, "questions_by_kind": {"object": "What thing appears?"}}',
            "utf-8",
        )
        config = ExtractionConfig.from_file(path)
        assert config.seed == 9
        assert config.relation_threshold == 0.3
        assert config.questions_by_kind[VertexKind.OBJECT] == "What thing appears?"
        assert config.questions_by_kind[VertexKind.LOCATION] == "Where is a location in the story?"

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text('{"volume": 11}', "utf-8")
        with pytest.raises(extraction.ExtractionError):
            ExtractionConfig.from_file(path)

    def test_packaged_defaults_parse(self):
        from importlib import resources

        data = resources.files("storyworld").joinpath("data/extraction.json").read_text("utf-8")
        import json

        doc = json.loads(data)
        questions = {VertexKind(k): v for k, v in doc.pop("questions_by_kind").items()}
        config = ExtractionConfig(questions_by_kind=questions, **doc)
        assert config == ExtractionConfig()

    def test_bad_probability_mode(self):
        with pytest.raises(extraction.ExtractionError):
            ExtractionConfig(probability_mode="vibes")
