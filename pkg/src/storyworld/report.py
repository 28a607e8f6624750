"""Aggregate graph statistics: delimited report plus rendered figures.

Corpus-level numbers are arithmetic means of per-graph values, grouped by
graph provenance (neural / rules / random). The CSV carries the exact
numbers; the PNG figures are rendered next to it for quick comparison of
vertex makeup and degree spread across methods.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .kg import GraphStats, KnowledgeGraph, graph_stats

CSV_COLUMNS = [
    "provenance",
    "graphs",
    "avg_locations",
    "avg_characters",
    "avg_objects",
    "avg_edges",
    "avg_degree",
    "degree_std",
]


@dataclass(frozen=True)
class ReportRow:
    provenance: str
    graphs: int
    avg_locations: float
    avg_characters: float
    avg_objects: float
    avg_edges: float
    avg_degree: float
    degree_std: float


def _mean(values: list[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def aggregate_stats(graphs: list[KnowledgeGraph]) -> list[ReportRow]:
    """Mean per-graph statistics for each provenance present."""
    by_provenance: dict[str, list[GraphStats]] = {}
    for graph in graphs:
        by_provenance.setdefault(graph.provenance.value, []).append(graph_stats(graph))
    rows = []
    for provenance in ("neural", "rules", "random"):
        stats = by_provenance.get(provenance)
        if not stats:
            continue
        rows.append(
            ReportRow(
                provenance=provenance,
                graphs=len(stats),
                avg_locations=_mean([s.location_count for s in stats]),
                avg_characters=_mean([s.character_count for s in stats]),
                avg_objects=_mean([s.object_count for s in stats]),
                avg_edges=_mean([s.edge_count for s in stats]),
                avg_degree=_mean([s.avg_degree for s in stats]),
                degree_std=_mean([s.degree_std for s in stats]),
            )
        )
    return rows


def write_csv(rows: list[ReportRow], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    row.provenance,
                    row.graphs,
                    f"{row.avg_locations:.3f}",
                    f"{row.avg_characters:.3f}",
                    f"{row.avg_objects:.3f}",
                    f"{row.avg_edges:.3f}",
                    f"{row.avg_degree:.3f}",
                    f"{row.degree_std:.3f}",
                ]
            )


def format_table(rows: list[ReportRow]) -> str:
    """Fixed-width text table: vertex counts, then edge/degree statistics."""
    header = (
        f"{'method':<8} {'graphs':>6} {'locations':>10} {'characters':>11} "
        f"{'objects':>8} {'edges':>8} {'degree':>14}"
    )
    lines = [header, "-" * len(header)]
    for row in rows:
        degree = f"{row.avg_degree:.2f} +/- {row.degree_std:.2f}"
        lines.append(
            f"{row.provenance:<8} {row.graphs:>6} {row.avg_locations:>10.1f} "
            f"{row.avg_characters:>11.1f} {row.avg_objects:>8.1f} {row.avg_edges:>8.1f} {degree:>14}"
        )
    return "\n".join(lines)


def render_figures(rows: list[ReportRow], out_dir: str | Path) -> list[Path]:
    """Write vertex-makeup and degree figures; returns the file paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    methods = [row.provenance for row in rows]
    categories = ["locations", "characters", "objects"]
    values = {
        "locations": [row.avg_locations for row in rows],
        "characters": [row.avg_characters for row in rows],
        "objects": [row.avg_objects for row in rows],
    }
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    width = 0.8 / max(len(methods), 1)
    for i, method in enumerate(methods):
        offsets = [j + i * width for j in range(len(categories))]
        ax.bar(offsets, [values[c][i] for c in categories], width=width, label=method)
    ax.set_xticks([j + width * (len(methods) - 1) / 2 for j in range(len(categories))])
    ax.set_xticklabels(categories)
    ax.set_ylabel("average vertex count per graph")
    ax.set_title("Vertex makeup by construction method")
    ax.legend()
    fig.tight_layout()
    vertex_path = out_dir / "vertex_counts.png"
    fig.savefig(vertex_path, dpi=120)
    plt.close(fig)
    written.append(vertex_path)

    fig, ax = plt.subplots(figsize=(5.6, 4.0))
    ax.bar(
        range(len(rows)),
        [row.avg_degree for row in rows],
        yerr=[row.degree_std for row in rows],
        capsize=6,
        color="tab:blue",
        alpha=0.85,
    )
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(methods)
    ax.set_ylabel("average degree (+/- mean per-graph std)")
    ax.set_title("Degree by construction method")
    fig.tight_layout()
    degree_path = out_dir / "degree.png"
    fig.savefig(degree_path, dpi=120)
    plt.close(fig)
    written.append(degree_path)

    return written
