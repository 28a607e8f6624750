from __future__ import annotations

import csv

import pytest

from storyworld.extraction import random_connect
from storyworld.kg import Provenance
from storyworld.report import aggregate_stats, format_table, render_figures, write_csv

from conftest import char, graph, has, loc, next_to, obj


def sample_graphs():
    a, b, gem = loc("A"), loc("B"), obj("Gem")
    neural = graph([a, b, gem], [next_to(a, b), has(a, gem)], start=a, provenance=Provenance.NEURAL)
    rules = graph([a, b], [next_to(a, b)], start=a, provenance=Provenance.RULES)
    random_graph = random_connect([loc("A"), loc("B"), char("C")], seed=3)
    return [neural, rules, random_graph]


class TestAggregate:
    def test_groups_by_provenance(self):
        rows = aggregate_stats(sample_graphs())
        assert [r.provenance for r in rows] == ["neural", "rules", "random"]

    def test_means_over_graphs(self):
        graphs = sample_graphs() + [graph([loc("X")], [], provenance=Provenance.RULES)]
        rows = aggregate_stats(graphs)
        rules_row = next(r for r in rows if r.provenance == "rules")
        assert rules_row.graphs == 2
        assert rules_row.avg_locations == pytest.approx(1.5)
        assert rules_row.avg_edges == pytest.approx(0.5)

    def test_empty_input(self):
        assert aggregate_stats([]) == []


class TestOutputs:
    def test_table_layout_has_edge_and_degree_columns(self):
        table = format_table(aggregate_stats(sample_graphs()))
        header = table.splitlines()[0]
        assert "edges" in header
        assert "degree" in header
        assert "+/-" in table  # degree reported with its std

    def test_csv_roundtrip(self, tmp_path):
        rows = aggregate_stats(sample_graphs())
        path = tmp_path / "stats.csv"
        write_csv(rows, path)
        with open(path, newline="") as handle:
            parsed = list(csv.DictReader(handle))
        assert [row["provenance"] for row in parsed] == ["neural", "rules", "random"]
        assert float(parsed[0]["avg_degree"]) == pytest.approx(rows[0].avg_degree, abs=1e-3)

    def test_figures_written(self, tmp_path):
        files = render_figures(aggregate_stats(sample_graphs()), tmp_path)
        assert [f.name for f in files] == ["vertex_counts.png", "degree.png"]
        for f in files:
            assert f.stat().st_size > 0
